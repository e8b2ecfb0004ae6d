#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "kgen/analysis.hpp"
#include "kgen/codegen.hpp"
#include "kgen/interp.hpp"
#include "kgen/schedule.hpp"
#include "kgen/script.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw kgen::Error(kgen::Errc::Usage, "cannot read '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void warn(const kgen::ScheduledKernel& s) {
  for (const auto& w : s.warnings) std::cerr << "warning: " << w << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transformation-based OpenCL kernel generator"};
  app.require_subcommand(1);
  std::string kernel_path, types, data_path, out_path;
  std::uint64_t seed = 0;

  auto* show = app.add_subcommand("show", "Print the kernel dump");
  auto* dot = app.add_subcommand("dot", "Print the dependency graph in DOT");
  auto* sched = app.add_subcommand("schedule", "Print the schedule");
  auto* codegen = app.add_subcommand("codegen", "Print OpenCL C");
  auto* run = app.add_subcommand("run", "Execute on a data file and print the outputs");
  for (auto* sub : {show, dot, sched, codegen, run})
    sub->add_option("kernel", kernel_path, "Kernel file")->required()->check(CLI::ExistingFile);
  for (auto* sub : {sched, codegen})
    sub->add_option("--types", types, "Argument dtypes, e.g. a=f32,n=i32");
  run->add_option("--data", data_path, "Data file")->required()->check(CLI::ExistingFile);
  run->add_option("--output,-o", out_path, "Write outputs here instead of stdout");
  run->add_option("--seed", seed, "Work-item shuffle seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  try {
    kgen::Kernel k = kgen::build_kernel(kgen::parse_kernel_file(slurp(kernel_path)));
    const auto bindings = kgen::parse_type_bindings(types);
    if (show->parsed()) {
      std::cout << kgen::kernel_to_text(k);
    } else if (dot->parsed()) {
      std::cout << kgen::dep_graph_dot(k);
    } else if (sched->parsed()) {
      const auto s = kgen::schedule_kernel(bindings.empty() ? k : kgen::infer_types(k, bindings));
      warn(s);
      std::cout << kgen::schedule_to_text(s);
    } else if (codegen->parsed()) {
      const auto s = kgen::schedule_kernel(k);
      warn(s);
      std::cout << kgen::generate_code(s, bindings);
    } else if (run->parsed()) {
      kgen::ExecState st = kgen::parse_data(slurp(data_path));
      st.seed = seed;
      std::map<std::string, kgen::DType> dtypes;
      for (const auto& [n, b] : st.arrays) dtypes[n] = b.dtype;
      const auto s = kgen::schedule_kernel(kgen::infer_types(k, dtypes));
      warn(s);
      const kgen::ExecState result = kgen::run(s, st);
      std::vector<std::string> outputs;
      for (const auto& insn : k.instructions)
        if (k.find_arg(insn.target()) &&
            std::find(outputs.begin(), outputs.end(), insn.target()) == outputs.end())
          outputs.push_back(insn.target());
      const std::string text = kgen::data_to_text(result, outputs);
      if (out_path.empty()) {
        std::cout << text;
      } else {
        std::ofstream out(out_path);
        if (!(out << text)) throw kgen::Error(kgen::Errc::Usage, "cannot write '" + out_path + "'");
      }
    }
  } catch (const kgen::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == kgen::Errc::Usage ? 2 : 1;
  }
  return 0;
}
