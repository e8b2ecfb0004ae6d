#include "kgen/script.hpp"

#include <boost/algorithm/string.hpp>
#include <charconv>
#include <sstream>

#include "kgen/frontend.hpp"
#include "kgen/transform.hpp"

namespace kgen {

namespace {

std::vector<std::string> words(std::string_view line) {
  std::vector<std::string> out;
  std::string s(line);
  boost::algorithm::trim(s);
  if (s.empty()) return out;
  boost::algorithm::split(out, s, boost::is_any_of(" \t"), boost::token_compress_on);
  return out;
}

std::vector<std::string> comma_list(const std::string& s) {
  std::vector<std::string> out;
  boost::algorithm::split(out, s, boost::is_any_of(","));
  for (auto& x : out) boost::algorithm::trim(x);
  std::erase(out, "");
  return out;
}

std::int64_t integer(const std::string& s, const std::string& what) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw Error(Errc::Syntax, what + ": expected an integer, got '" + s + "'");
  return v;
}

AddressSpace space_word(const std::string& s) {
  if (s == "local") return AddressSpace::Local;
  if (s == "private") return AddressSpace::Private;
  throw Error(Errc::Syntax, "expected 'local' or 'private', got '" + s + "'");
}

// Text after the first `n` words.
std::string rest_after(std::string_view line, std::size_t n) {
  std::string s(line);
  boost::algorithm::trim(s);
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    pos = s.find_first_of(" \t", pos);
    if (pos == std::string::npos) return "";
    pos = s.find_first_not_of(" \t", pos);
    if (pos == std::string::npos) return "";
  }
  return s.substr(pos);
}

std::string format_real(double v, DType t) {
  char buf[64];
  auto r = t == DType::F32 ? std::to_chars(buf, buf + sizeof buf, static_cast<float>(v))
                           : std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

KernelFile parse_kernel_file(std::string_view text) {
  KernelFile f;
  f.name = "loopy_kernel";
  std::string section;
  std::map<std::string, std::vector<std::string>> body;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = boost::algorithm::trim_copy(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']' && t.find(' ') == std::string::npos) {
      section = t.substr(1, t.size() - 2);
      if (section != "name" && section != "domain" && section != "instructions" && section != "assumptions" &&
          section != "transforms")
        throw Error(Errc::Syntax, "line " + std::to_string(lineno) + ": unknown section '" + section + "'");
      body[section];
      continue;
    }
    if (section.empty()) throw Error(Errc::Syntax, "line " + std::to_string(lineno) + ": text before the first section");
    body[section].push_back(section == "instructions" ? line : t);
  }
  if (!body.count("domain")) throw Error(Errc::Syntax, "missing [domain] section");
  if (!body.count("instructions")) throw Error(Errc::Syntax, "missing [instructions] section");
  auto joined = [&](const std::string& s, const char* sep) { return boost::algorithm::join(body[s], sep); };
  if (body.count("name") && !body["name"].empty()) f.name = body["name"].front();
  f.domain = joined("domain", " ");
  f.instructions = joined("instructions", "\n");
  f.assumptions = joined("assumptions", " and ");
  f.transforms = body["transforms"];
  return f;
}

Kernel apply_transform(const Kernel& k, std::string_view line) {
  const auto w = words(line);
  if (w.empty()) return k;
  const std::string& verb = w[0];
  auto need = [&](std::size_t lo, std::size_t hi) {
    if (w.size() < lo || w.size() > hi) throw Error(Errc::Syntax, "wrong number of arguments in '" + std::string(line) + "'");
  };
  if (verb == "split_iname") {
    need(3, 5);
    SplitSpec spec{w[1], integer(w[2], "split length"), w.size() > 3 ? w[3] : "", w.size() > 4 ? w[4] : ""};
    return split_iname(k, spec);
  }
  if (verb == "tag_inames") return tag_inames(k, rest_after(line, 1));
  if (verb == "set_loop_priority") {
    need(2, 2);
    return set_loop_priority(k, comma_list(w[1]));
  }
  if (verb == "add_prefetch" || verb == "precompute") {
    need(3, 4);
    const AddressSpace space = w.size() > 3 ? space_word(w[3]) : AddressSpace::Private;
    return verb == "add_prefetch" ? add_prefetch(k, w[1], comma_list(w[2]), space)
                                  : precompute(k, w[1], comma_list(w[2]), space);
  }
  if (verb == "assume") return assume(k, rest_after(line, 1));
  if (verb == "fix_parameters") {
    need(3, 3);
    return fix_parameters(k, w[1], integer(w[2], "parameter value"));
  }
  if (verb == "tag_array_axes") {
    need(3, 3);
    return tag_array_axes(k, w[1], w[2]);
  }
  throw Error(Errc::Syntax, "unknown transformation '" + verb + "'");
}

Kernel build_kernel(const KernelFile& f) {
  KernelOptions opts;
  opts.name = f.name;
  opts.assumptions = f.assumptions;
  Kernel k = make_kernel(f.domain, f.instructions, opts);
  for (const auto& t : f.transforms) k = apply_transform(k, t);
  return k;
}

std::map<std::string, DType> parse_type_bindings(std::string_view text) {
  std::map<std::string, DType> out;
  for (const auto& item : comma_list(std::string(text))) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw Error(Errc::Usage, "expected 'name=dtype', got '" + item + "'");
    const auto t = parse_dtype(boost::algorithm::trim_copy(item.substr(eq + 1)));
    if (!t) throw Error(Errc::Usage, "unknown dtype in '" + item + "'");
    out[boost::algorithm::trim_copy(item.substr(0, eq))] = *t;
  }
  return out;
}

ExecState parse_data(std::string_view text) {
  ExecState st;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = "data line " + std::to_string(lineno);
    boost::algorithm::trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto colon = line.find(':'), eq = line.find('=');
    if (colon == std::string::npos || eq == std::string::npos || eq < colon)
      throw Error(Errc::Syntax, where + ": expected 'name: dtype shape = values'");
    const std::string name = boost::algorithm::trim_copy(line.substr(0, colon));
    const auto head = words(line.substr(colon + 1, eq - colon - 1));
    const auto values = words(line.substr(eq + 1));
    if (head.empty() || head.size() > 2) throw Error(Errc::Syntax, where + ": expected a dtype and an optional shape");
    const auto dtype = parse_dtype(head[0]);
    if (!dtype) throw Error(Errc::Syntax, where + ": unknown dtype '" + head[0] + "'");
    if (head.size() == 1) {
      if (is_float(*dtype) || values.size() != 1) throw Error(Errc::Syntax, where + ": scalars must be one integer");
      st.scalars[name] = integer(values[0], where);
      continue;
    }
    std::vector<std::int64_t> shape;
    for (const auto& e : comma_list(boost::algorithm::trim_copy_if(head[1], boost::is_any_of("[]()"))))
      shape.push_back(integer(e, where));
    Buffer b = Buffer::zeros(*dtype, shape);
    if (values.size() != b.size())
      throw Error(Errc::Syntax, where + ": shape holds " + std::to_string(b.size()) + " values, got " +
                                    std::to_string(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (is_float(*dtype)) {
        double v = 0;
        auto [p, ec] = std::from_chars(values[i].data(), values[i].data() + values[i].size(), v);
        if (ec != std::errc() || p != values[i].data() + values[i].size())
          throw Error(Errc::Syntax, where + ": bad number '" + values[i] + "'");
        b.real[i] = *dtype == DType::F32 ? static_cast<float>(v) : v;
      } else {
        b.integer[i] = integer(values[i], where);
      }
    }
    st.arrays[name] = std::move(b);
  }
  return st;
}

std::string data_to_text(const ExecState& st, const std::vector<std::string>& names) {
  std::ostringstream os;
  for (const auto& n : names) {
    auto it = st.arrays.find(n);
    if (it == st.arrays.end()) continue;
    const Buffer& b = it->second;
    os << n << ": " << dtype_name(b.dtype) << " ";
    for (std::size_t d = 0; d < b.shape.size(); ++d) os << (d ? "," : "") << b.shape[d];
    os << " =";
    for (std::size_t i = 0; i < b.size(); ++i)
      os << " " << (is_float(b.dtype) ? format_real(b.real[i], b.dtype) : std::to_string(b.integer[i]));
    os << "\n";
  }
  return os.str();
}

}  // namespace kgen
