#include "omega.hpp"

#include <algorithm>
#include <map>

namespace kgen::detail {
namespace {

Int abs_int(const Int& v) { return v < 0 ? Int(-v) : v; }

// a - m * floor(a/m + 1/2): the symmetric residue used by equality elimination.
Int mod_hat(const Int& a, const Int& m) { return a - m * floor_div(2 * a + m, 2 * m); }

std::vector<Int> negated(const std::vector<Int>& v) {
  std::vector<Int> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) r[i] = -v[i];
  return r;
}

// gcd-normalizes every row, merges parallel inequalities and detects
// opposite pairs. Returns false on a contradiction.
bool normalize_rows(std::vector<Row>& rows) {
  std::vector<Row> out;
  out.reserve(rows.size());
  std::map<std::vector<Int>, std::size_t> ge_index;
  std::map<std::pair<std::vector<Int>, Int>, bool> eq_seen;

  for (auto& r : rows) {
    Int g = 0;
    for (const auto& c : r.coeffs) g = gcd(g, c);
    if (g == 0) {
      if (r.is_eq ? r.constant != 0 : r.constant < 0) return false;
      continue;
    }
    if (r.is_eq) {
      if (r.constant % g != 0) return false;
      for (auto& c : r.coeffs) c /= g;
      r.constant /= g;
      auto first = std::find_if(r.coeffs.begin(), r.coeffs.end(), [](const Int& c) { return c != 0; });
      if (*first < 0) {
        for (auto& c : r.coeffs) c = -c;
        r.constant = -r.constant;
      }
      auto key = std::make_pair(r.coeffs, r.constant);
      if (eq_seen.emplace(key, true).second) out.push_back(std::move(r));
      continue;
    }
    if (g != 1) {
      for (auto& c : r.coeffs) c /= g;
      r.constant = floor_div(r.constant, g);
    }
    auto it = ge_index.find(r.coeffs);
    if (it != ge_index.end()) {
      if (r.constant < out[it->second].constant) out[it->second].constant = r.constant;
      continue;
    }
    ge_index.emplace(r.coeffs, out.size());
    out.push_back(std::move(r));
  }

  std::vector<bool> dead(out.size(), false);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].is_eq || dead[i]) continue;
    auto it = ge_index.find(negated(out[i].coeffs));
    if (it == ge_index.end()) continue;
    std::size_t j = it->second;
    if (j <= i || dead[j]) continue;
    Int sum = out[i].constant + out[j].constant;
    if (sum < 0) return false;
    if (sum == 0) {
      out[i].is_eq = true;
      dead[j] = true;
    }
  }
  rows.clear();
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!dead[i]) rows.push_back(std::move(out[i]));
  return true;
}

// Uses `eq` (unit coefficient at k) to eliminate variable k from `r`.
void eliminate_with(Row& r, const Row& eq, std::size_t k) {
  const Int b = r.coeffs[k];
  if (b == 0) return;
  const Int f = b * eq.coeffs[k];  // eq.coeffs[k] is +-1
  for (std::size_t i = 0; i < r.coeffs.size(); ++i) r.coeffs[i] -= f * eq.coeffs[i];
  r.constant -= f * eq.constant;
}

Row combine(const Row& lower, const Row& upper, std::size_t v, bool dark) {
  const Int a = lower.coeffs[v];
  const Int b = -upper.coeffs[v];
  Row r;
  r.coeffs.resize(lower.coeffs.size());
  for (std::size_t i = 0; i < r.coeffs.size(); ++i) r.coeffs[i] = b * lower.coeffs[i] + a * upper.coeffs[i];
  r.constant = b * lower.constant + a * upper.constant;
  if (dark) r.constant -= (a - 1) * (b - 1);
  return r;
}

bool feasible(std::size_t nvars, std::vector<Row> rows);

bool eliminate_inequality_var(std::size_t nvars, std::vector<Row>& rows, std::size_t v, bool exact,
                              bool& decided) {
  std::vector<Row> lowers, uppers, rest;
  for (auto& r : rows) {
    if (r.coeffs[v] > 0)
      lowers.push_back(r);
    else if (r.coeffs[v] < 0)
      uppers.push_back(r);
    else
      rest.push_back(r);
  }
  std::vector<Row> real = rest;
  for (const auto& l : lowers)
    for (const auto& u : uppers) real.push_back(combine(l, u, v, false));
  if (exact) {
    rows = std::move(real);
    decided = false;
    return true;
  }
  decided = true;
  if (!feasible(nvars, real)) return false;

  std::vector<Row> dark = rest;
  for (const auto& l : lowers)
    for (const auto& u : uppers) dark.push_back(combine(l, u, v, true));
  if (feasible(nvars, dark)) return true;

  Int amax = 0;
  for (const auto& u : uppers) amax = std::max(amax, Int(-u.coeffs[v]));
  for (const auto& l : lowers) {
    const Int a = l.coeffs[v];
    const Int imax = floor_div(amax * a - a - amax, amax);
    for (Int i = 0; i <= imax; ++i) {
      std::vector<Row> splinter = rows;
      Row e = l;
      e.is_eq = true;
      e.constant -= i;
      splinter.push_back(std::move(e));
      if (feasible(nvars, std::move(splinter))) return true;
    }
  }
  return false;
}

bool feasible(std::size_t nvars, std::vector<Row> rows) {
  for (;;) {
    if (!normalize_rows(rows)) return false;

    auto eq_it = std::find_if(rows.begin(), rows.end(), [](const Row& r) { return r.is_eq; });
    if (eq_it != rows.end()) {
      std::size_t k = nvars;
      Int best = 0;
      for (std::size_t i = 0; i < nvars; ++i) {
        Int a = abs_int(eq_it->coeffs[i]);
        if (a != 0 && (k == nvars || a < best)) {
          k = i;
          best = a;
        }
      }
      if (best == 1) {
        Row eq = *eq_it;
        rows.erase(eq_it);
        for (auto& r : rows) eliminate_with(r, eq, k);
        continue;
      }
      // Coefficients all exceed one: introduce sigma so that the new
      // equation has a unit coefficient on x_k, then substitute.
      const Int m = best + 1;
      Row sigma;
      sigma.is_eq = true;
      sigma.coeffs.resize(nvars + 1);
      for (std::size_t i = 0; i < nvars; ++i) sigma.coeffs[i] = mod_hat(eq_it->coeffs[i], m);
      sigma.constant = mod_hat(eq_it->constant, m);
      sigma.coeffs[nvars] = -m;
      ++nvars;
      for (auto& r : rows) r.coeffs.push_back(0);
      for (auto& r : rows) eliminate_with(r, sigma, k);
      continue;
    }

    // Only inequalities remain.
    std::vector<std::size_t> nlow(nvars, 0), nup(nvars, 0);
    std::vector<bool> unit_low(nvars, true), unit_up(nvars, true);
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < nvars; ++i) {
        if (r.coeffs[i] > 0) {
          ++nlow[i];
          if (r.coeffs[i] != 1) unit_low[i] = false;
        } else if (r.coeffs[i] < 0) {
          ++nup[i];
          if (r.coeffs[i] != -1) unit_up[i] = false;
        }
      }
    }
    bool any = false;
    std::optional<std::size_t> one_sided;
    for (std::size_t i = 0; i < nvars; ++i) {
      if (nlow[i] + nup[i] == 0) continue;
      any = true;
      if (nlow[i] == 0 || nup[i] == 0) {
        one_sided = i;
        break;
      }
    }
    if (!any) return true;
    if (one_sided) {
      // An unbounded direction: every row mentioning the variable can be
      // satisfied by pushing it far enough.
      const std::size_t v = *one_sided;
      std::erase_if(rows, [v](const Row& r) { return r.coeffs[v] != 0; });
      continue;
    }

    std::size_t pick = nvars;
    bool pick_exact = false;
    std::size_t pick_score = 0;
    for (std::size_t i = 0; i < nvars; ++i) {
      if (nlow[i] + nup[i] == 0) continue;
      const bool ex = unit_low[i] || unit_up[i];
      const std::size_t score = nlow[i] * nup[i];
      if (pick == nvars || (ex && !pick_exact) || (ex == pick_exact && score < pick_score)) {
        pick = i;
        pick_exact = ex;
        pick_score = score;
      }
    }
    bool decided = false;
    const bool result = eliminate_inequality_var(nvars, rows, pick, pick_exact, decided);
    if (decided) return result;
  }
}

}  // namespace

bool omega_feasible(std::size_t nvars, std::vector<Row> rows) {
  for (auto& r : rows) r.coeffs.resize(nvars);
  return feasible(nvars, std::move(rows));
}

bool polyset_feasible(const PolySet& s) {
  std::map<std::string, std::size_t> index;
  for (const auto& n : s.all_names()) index.emplace(n, index.size());
  for (const auto& c : s.constraints())
    for (const auto& [n, _] : c.expr().coefficients()) index.emplace(n, index.size());

  std::size_t nvars = index.size();
  std::size_t ndiv = 0;
  for (const auto& c : s.constraints())
    if (c.kind() == ConstraintKind::Div) ++ndiv;
  const std::size_t total = nvars + ndiv;

  std::vector<Row> rows;
  std::size_t next_q = nvars;
  for (const auto& c : s.constraints()) {
    Row r;
    r.coeffs.assign(total, 0);
    for (const auto& [n, v] : c.expr().coefficients()) r.coeffs[index.at(n)] = v;
    r.constant = c.expr().constant();
    switch (c.kind()) {
      case ConstraintKind::Ge: break;
      case ConstraintKind::Eq: r.is_eq = true; break;
      case ConstraintKind::Div:
        r.is_eq = true;
        r.coeffs[next_q++] = -c.modulus();
        break;
    }
    rows.push_back(std::move(r));
  }
  return feasible(total, std::move(rows));
}

}  // namespace kgen::detail
