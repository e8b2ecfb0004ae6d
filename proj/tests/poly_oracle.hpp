#pragma once

// Cross-checks polyset operations against enumeration on one random set.

#include <optional>
#include <sstream>

#include "oracle.hpp"

namespace oracle {

struct PolyStats {
  int sets = 0;
  int nonempty = 0;
  int inexact_projections = 0;
  int exact_fibers = 0;
  int tight_maxima = 0;
};

namespace detail {

inline Point reorder(const Point& p, const std::vector<std::string>& from, const std::vector<std::string>& to) {
  Point q;
  for (const auto& n : to) q.push_back(p[std::find(from.begin(), from.end(), n) - from.begin()]);
  return q;
}

inline kgen::AffExpr random_affine(std::mt19937_64& rng, const std::vector<std::string>& names) {
  std::uniform_int_distribution<int> coef(-4, 4), cst(-12, 12);
  kgen::AffExpr e(cst(rng));
  for (const auto& v : names) e = e + kgen::AffExpr::variable(v, coef(rng));
  return e;
}

}  // namespace detail

/// nullopt when every operation agrees with enumeration, else a description.
inline std::optional<std::string> check_random_set(const kgen::PolySet& s, std::mt19937_64& rng, PolyStats& stats) {
  using namespace kgen;
  std::ostringstream fail;
  auto bad = [&](const std::string& what) {
    fail << what << " on " << s.to_string();
    return fail.str();
  };
  ++stats.sets;
  const Space sp = standard_space(s);
  const auto pts = sp.enumerate(sp.compile(s));
  if (!pts.empty()) ++stats.nonempty;
  const std::size_t n_index = 0;  // n is the only parameter and comes first

  // emptiness, parametric and per parameter value
  if (is_empty(s) != pts.empty()) return bad("is_empty");
  for (std::int64_t n0 = 0; n0 <= 8; ++n0) {
    const bool any = std::any_of(pts.begin(), pts.end(), [&](const Point& p) { return p[n_index] == n0; });
    if (is_empty(s.fix("n", n0)) == any) return bad("is_empty at n=" + std::to_string(n0));
  }

  // projection
  {
    const auto& vars = s.set_vars();
    const std::string v = vars[std::uniform_int_distribution<std::size_t>(0, vars.size() - 1)(rng)];
    const Projection pr = project_out_checked(s, v);
    if (!pr.exact) ++stats.inexact_projections;
    Space psp = standard_space(pr.set);
    if (psp.names.empty() || psp.names.front() != "n") {
      psp.names.insert(psp.names.begin(), "n");
      psp.lo.insert(psp.lo.begin(), 0);
      psp.hi.insert(psp.hi.begin(), 8);
    }
    std::set<Point> expected;
    for (const auto& p : pts) expected.insert(detail::reorder(p, sp.names, psp.names));
    const auto pcs = psp.compile(pr.set);
    for (const auto& q : psp.enumerate({})) {
      const bool in = psp.contains(pcs, q), want = expected.count(q) > 0;
      if (want && !in) return bad("project_out(" + v + ") lost a point");
      if (in && !want && pr.exact) return bad("project_out(" + v + ") claimed exact but gained a point");
    }
  }

  // loop bounds of the last variable inside the others; an empty set has
  // no meaningful bounds
  if (!pts.empty()) {
    const auto& vars = s.set_vars();
    const std::string v = vars.back();
    const std::vector<std::string> outer(vars.begin(), vars.end() - 1);
    const LoopBounds lb = bounds(s, v, outer);
    std::vector<DenseAff> lo, hi;
    for (const auto& c : lb.lower) lo.push_back(dense(c.value, sp.names));
    for (const auto& c : lb.upper) hi.push_back(dense(c.value, sp.names));
    const std::int64_t stride = to_i64(lb.stride), residue = to_i64(lb.residue);
    bool coupled_div = false;
    for (const auto& c : s.constraints())
      if (c.kind() == ConstraintKind::Div && c.involves(v) && c.expr().coefficients().size() > 1) coupled_div = true;
    const std::size_t vi = sp.names.size() - 1;
    std::map<Point, std::set<std::int64_t>> fibers;
    for (const auto& p : pts) {
      Point key(p.begin(), p.end() - 1);
      fibers[key].insert(p[vi]);
      for (const auto& l : lo)
        if (l.value(p) > p[vi]) return bad("lower bound of " + v + " excludes a point");
      for (const auto& h : hi)
        if (h.value(p) < p[vi]) return bad("upper bound of " + v + " excludes a point");
      if (((p[vi] - residue) % stride + stride) % stride != 0) return bad("stride of " + v + " excludes a point");
    }
    if (!coupled_div) {
      for (const auto& [key, fiber] : fibers) {
        Point p = key;
        p.push_back(0);
        std::int64_t l = INT64_MIN, h = INT64_MAX;
        for (const auto& x : lo) l = std::max(l, x.value(p));
        for (const auto& x : hi) h = std::min(h, x.value(p));
        std::size_t count = 0;
        for (std::int64_t x = l; x <= h; ++x)
          if (((x - residue) % stride + stride) % stride == 0) ++count;
        if (count != fiber.size()) return bad("bounds of " + v + " admit extra values");
      }
      ++stats.exact_fibers;
    }
  }

  // static maximum of a random affine form
  if (!pts.empty()) {
    const AffExpr e = detail::random_affine(rng, s.set_vars());
    const auto ed = dense(Constraint::ge(e), sp.names);
    const AffExpr r = static_max(s, e);
    const auto rd = dense(Constraint::ge(r), sp.names);
    std::map<std::int64_t, std::int64_t> best;
    for (const auto& p : pts) {
      auto [it, fresh] = best.emplace(p[n_index], ed.value(p));
      if (!fresh) it->second = std::max(it->second, ed.value(p));
    }
    for (const auto& [n0, m] : best) {
      Point p(sp.names.size(), 0);
      p[n_index] = n0;
      if (rd.value(p) < m) return bad("static_max below the maximum at n=" + std::to_string(n0));
    }
    // with n fixed the answer is exact whenever every elimination is
    const auto [n0, m] = *std::next(best.begin(), std::uniform_int_distribution<std::size_t>(0, best.size() - 1)(rng));
    const PolySet f = s.fix("n", n0);
    const AffExpr fixed = static_max(f, e);
    if (!fixed.is_constant() || fixed.constant() < m) return bad("static_max with n fixed");
    PolySet t = f.with_set_var("__probe").with_constraint(Constraint::eq(AffExpr::variable("__probe") - e));
    bool exact = true;
    for (const auto& v : f.set_vars()) {
      const Projection pr = project_out_checked(t, v);
      exact = exact && pr.exact;
      t = pr.set;
    }
    if (exact) {
      if (fixed.constant() != m) return bad("static_max with n fixed is not tight");
      ++stats.tight_maxima;
    }
  }

  // implication of a random constraint
  {
    std::vector<std::string> names = s.set_vars();
    names.push_back("n");
    const AffExpr e = detail::random_affine(rng, names);
    const int kind = std::uniform_int_distribution<int>(0, 9)(rng);
    const Constraint c = kind == 0 ? Constraint::eq(e)
                         : kind == 1 ? Constraint::div(e, std::uniform_int_distribution<int>(2, 4)(rng))
                                     : Constraint::ge(e);
    const auto cd = dense(c, sp.names);
    const bool want = std::all_of(pts.begin(), pts.end(), [&](const Point& p) { return cd.holds(p); });
    if (implies(s, c) != want) return bad("implies(" + c.to_string(s.set_vars()) + ")");
  }
  return std::nullopt;
}

}  // namespace oracle
