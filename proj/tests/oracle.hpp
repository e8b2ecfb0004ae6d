#pragma once

// Brute-force reference for integer sets: dense constraint evaluation and
// exhaustive enumeration over a box.

#include <algorithm>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "kgen/polyset.hpp"

namespace oracle {

using Point = std::vector<std::int64_t>;

struct DenseConstraint {
  kgen::ConstraintKind kind;
  std::vector<std::int64_t> coeffs;
  std::int64_t constant = 0;
  std::int64_t modulus = 0;

  std::int64_t value(const Point& p) const {
    std::int64_t v = constant;
    for (std::size_t i = 0; i < coeffs.size(); ++i) v += coeffs[i] * p[i];
    return v;
  }
  bool holds(const Point& p) const {
    const std::int64_t v = value(p);
    switch (kind) {
      case kgen::ConstraintKind::Eq: return v == 0;
      case kgen::ConstraintKind::Ge: return v >= 0;
      case kgen::ConstraintKind::Div: return ((v % modulus) + modulus) % modulus == 0;
    }
    return false;
  }
};

inline std::vector<std::int64_t> dense_coeffs(const kgen::AffExpr& e, const std::vector<std::string>& names) {
  std::vector<std::int64_t> c(names.size(), 0);
  for (const auto& [n, v] : e.coefficients()) {
    auto it = std::find(names.begin(), names.end(), n);
    if (it == names.end()) throw std::runtime_error("oracle: unknown name " + n);
    c[it - names.begin()] = kgen::to_i64(v);
  }
  return c;
}

inline DenseConstraint dense(const kgen::Constraint& c, const std::vector<std::string>& names) {
  DenseConstraint d{c.kind(), dense_coeffs(c.expr(), names), kgen::to_i64(c.expr().constant()),
                    c.kind() == kgen::ConstraintKind::Div ? kgen::to_i64(c.modulus()) : 0};
  return d;
}

/// Affine value evaluated densely.
struct DenseAff {
  std::vector<std::int64_t> coeffs;
  std::int64_t constant = 0;
  std::int64_t denominator = 1;

  std::int64_t value(const Point& p) const {
    std::int64_t v = constant;
    for (std::size_t i = 0; i < coeffs.size(); ++i) v += coeffs[i] * p[i];
    std::int64_t q = v / denominator;
    if ((v % denominator != 0) && ((v < 0) != (denominator < 0))) --q;
    return q;
  }
};

inline DenseAff dense(const kgen::QuasiAff& q, const std::vector<std::string>& names) {
  return {dense_coeffs(q.numerator, names), kgen::to_i64(q.numerator.constant()), kgen::to_i64(q.denominator)};
}

/// A set evaluated over fixed names with per-name ranges.
struct Space {
  std::vector<std::string> names;
  std::vector<std::int64_t> lo, hi;

  bool contains(const std::vector<DenseConstraint>& cs, const Point& p) const {
    for (const auto& c : cs)
      if (!c.holds(p)) return false;
    return true;
  }

  /// Every point of the space satisfying `cs`.
  std::vector<Point> enumerate(const std::vector<DenseConstraint>& cs) const {
    std::vector<Point> out;
    if (names.empty()) {
      if (contains(cs, {})) out.push_back({});
      return out;
    }
    Point p(lo);
    while (true) {
      if (contains(cs, p)) out.push_back(p);
      std::size_t d = names.size();
      while (d > 0) {
        --d;
        if (++p[d] <= hi[d]) break;
        p[d] = lo[d];
        if (d == 0) return out;
      }
    }
  }

  std::vector<DenseConstraint> compile(const kgen::PolySet& s) const {
    std::vector<DenseConstraint> cs;
    for (const auto& c : s.constraints()) cs.push_back(dense(c, names));
    return cs;
  }
};

/// Parameters in [0, 8], set variables in [-16, 16].
inline Space standard_space(const kgen::PolySet& s) {
  Space sp;
  for (const auto& p : s.params()) {
    sp.names.push_back(p);
    sp.lo.push_back(0);
    sp.hi.push_back(8);
  }
  for (const auto& v : s.set_vars()) {
    sp.names.push_back(v);
    sp.lo.push_back(-16);
    sp.hi.push_back(16);
  }
  return sp;
}

/// Points of `s` after fixing every parameter in `params`; set variables
/// range over [lo, hi].
inline std::vector<Point> points(const kgen::PolySet& s, const std::map<std::string, std::int64_t>& params,
                                 std::int64_t lo, std::int64_t hi) {
  kgen::PolySet f = s;
  for (const auto& [n, v] : params)
    if (f.has_param(n)) f = f.fix(n, v);
  Space sp;
  for (const auto& v : f.set_vars()) {
    sp.names.push_back(v);
    sp.lo.push_back(lo);
    sp.hi.push_back(hi);
  }
  if (!f.params().empty()) throw std::runtime_error("oracle: unbound parameter " + f.params().front());
  return sp.enumerate(sp.compile(f));
}

/// A random set over 1 to 3 of x, y, z and parameter n: box constraints
/// -16 <= v <= 16 and 0 <= n <= 8, up to six random constraints with
/// coefficients in [-4, 4], and sometimes one divisibility constraint.
inline kgen::PolySet random_set(std::mt19937_64& rng) {
  using kgen::AffExpr;
  using kgen::Constraint;
  std::uniform_int_distribution<int> nvars(1, 3), ncons(0, 6), coef(-4, 4), cst(-12, 12), pct(0, 99);
  const std::vector<std::string> all{"x", "y", "z"};
  std::vector<std::string> vars(all.begin(), all.begin() + nvars(rng));
  std::vector<Constraint> cs;
  for (const auto& v : vars) {
    cs.push_back(Constraint::ge(AffExpr::variable(v) + AffExpr(16)));
    cs.push_back(Constraint::ge(AffExpr(16) - AffExpr::variable(v)));
  }
  cs.push_back(Constraint::ge(AffExpr::variable("n")));
  cs.push_back(Constraint::ge(AffExpr(8) - AffExpr::variable("n")));
  auto random_expr = [&] {
    AffExpr e(cst(rng));
    for (const auto& v : vars) e = e + AffExpr::variable(v, coef(rng));
    if (pct(rng) < 40) e = e + AffExpr::variable("n", coef(rng));
    return e;
  };
  const int n = ncons(rng);
  for (int i = 0; i < n; ++i)
    cs.push_back(pct(rng) < 15 ? Constraint::eq(random_expr()) : Constraint::ge(random_expr()));
  if (pct(rng) < 35) cs.push_back(Constraint::div(random_expr(), std::uniform_int_distribution<int>(2, 4)(rng)));
  return kgen::PolySet(vars, {"n"}, cs);
}

}  // namespace oracle
