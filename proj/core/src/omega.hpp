#pragma once

// Exact integer feasibility for conjunctions of linear equalities and
// inequalities (Pugh's Omega test). Internal to polyset.

#include <vector>

#include "kgen/polyset.hpp"

namespace kgen::detail {

struct Row {
  std::vector<Int> coeffs;
  Int constant = 0;
  bool is_eq = false;
};

/// True iff some integer vector x satisfies every row
/// (coeffs . x + constant == 0 for equalities, >= 0 otherwise).
bool omega_feasible(std::size_t nvars, std::vector<Row> rows);

/// Translates a PolySet (parameters included as unknowns, divisibility
/// constraints via fresh quotient variables) and tests feasibility.
bool polyset_feasible(const PolySet& s);

}  // namespace kgen::detail
