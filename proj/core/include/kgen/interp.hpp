#pragma once

// Reference execution of kernels and schedules on concrete data.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kgen/schedule.hpp"

namespace kgen {

/// Row-major array data. Float dtypes use `real` (f32 values are stored
/// exactly representable), integer dtypes use `integer`.
struct Buffer {
  DType dtype = DType::F32;
  std::vector<std::int64_t> shape;
  std::vector<double> real;
  std::vector<std::int64_t> integer;

  static Buffer zeros(DType t, std::vector<std::int64_t> shape);
  std::size_t size() const;
  double as_double(std::size_t i) const { return is_float(dtype) ? real[i] : static_cast<double>(integer[i]); }
};

struct ExecState {
  std::map<std::string, Buffer> arrays;
  std::map<std::string, std::int64_t> scalars;
  /// Seeds the work-item and group shuffles in `run`.
  std::uint64_t seed = 0;
};

/// Executes a schedule with work-group emulation: groups and work items run
/// in seeded-shuffled order, barrier-delimited phase by phase.
ExecState run(const ScheduledKernel& s, const ExecState& st);

/// Executes each instruction over its whole domain, in dependency order.
ExecState reference_run(const Kernel& k, const ExecState& st);

/// Arguments filled with seeded pseudo-random data: integers in [-9, 9],
/// floats in [-1, 1). Types come from `dtypes`, then declared types, then f32.
ExecState random_state(const Kernel& k, const std::map<std::string, std::int64_t>& params,
                       const std::map<std::string, DType>& dtypes, std::uint64_t seed);

/// First difference between the arrays of two states; floats compare with
/// relative tolerance `rel_tol` (0 for exact).
std::optional<std::string> compare_states(const ExecState& a, const ExecState& b, double rel_tol = 0);

}  // namespace kgen
