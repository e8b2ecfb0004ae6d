#pragma once

// Transformed kernel versus the reference execution of the original.

#include <optional>
#include <string>
#include <vector>

#include "kgen/analysis.hpp"
#include "kgen/interp.hpp"
#include "kgen/schedule.hpp"

namespace oracle {

inline std::optional<std::string> equivalent(const kgen::Kernel& original, const kgen::Kernel& transformed,
                                             const std::vector<std::int64_t>& ns,
                                             const std::map<std::string, kgen::DType>& dtypes, double rel_tol = 0,
                                             int seeds = 2) {
  const kgen::Kernel reference = kgen::infer_types(original, dtypes);
  const kgen::ScheduledKernel s = kgen::schedule_kernel(kgen::infer_types(transformed, dtypes));
  for (const std::int64_t n : ns) {
    for (int seed = 0; seed < seeds; ++seed) {
      const kgen::ExecState st = kgen::random_state(reference, {{"n", n}}, dtypes, 1000 * n + seed);
      const kgen::ExecState want = kgen::reference_run(reference, st);
      const kgen::ExecState got = kgen::run(s, st);
      if (auto d = kgen::compare_states(want, got, rel_tol))
        return "n=" + std::to_string(n) + " seed=" + std::to_string(seed) + ": " + *d;
    }
  }
  return std::nullopt;
}

inline std::vector<std::int64_t> sizes(std::int64_t lo, std::int64_t hi) {
  std::vector<std::int64_t> v;
  for (std::int64_t n = lo; n <= hi; ++n) v.push_back(n);
  return v;
}

}  // namespace oracle
