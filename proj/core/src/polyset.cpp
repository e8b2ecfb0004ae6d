#include "kgen/polyset.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "omega.hpp"

namespace kgen {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::Syntax: return "SyntaxError";
    case Errc::NonAffine: return "NonAffineError";
    case Errc::NameClassMismatch: return "NameClassMismatch";
    case Errc::Unbounded: return "UnboundedError";
    case Errc::UnknownIname: return "UnknownIname";
    case Errc::UnknownParameter: return "UnknownParameter";
    case Errc::UnknownRule: return "UnknownRule";
    case Errc::UnknownArray: return "UnknownArray";
    case Errc::NameCollision: return "NameCollision";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::UnknownAnnotationKey: return "UnknownAnnotationKey";
    case Errc::AmbiguousName: return "AmbiguousName";
    case Errc::InvalidKernel: return "InvalidKernel";
    case Errc::TypeConflict: return "TypeConflict";
    case Errc::Untypeable: return "Untypeable";
    case Errc::NonAffineIndex: return "NonAffineIndex";
    case Errc::NonConstantTripCount: return "NonConstantTripCount";
    case Errc::AxisConflict: return "AxisConflict";
    case Errc::RankMismatch: return "RankMismatch";
    case Errc::IllegalVecWidth: return "IllegalVecWidth";
    case Errc::NonAffineFootprint: return "NonAffineFootprint";
    case Errc::SchedulingDeadlock: return "SchedulingDeadlock";
    case Errc::BarrierInsideIllegalContext: return "BarrierInsideIllegalContext";
    case Errc::UnsupportedVecShape: return "UnsupportedVecShape";
    case Errc::OutOfBounds: return "OutOfBounds";
    case Errc::UnboundParameter: return "UnboundParameter";
    case Errc::DivisionByZero: return "DivisionByZero";
    case Errc::UninitializedRead: return "UninitializedRead";
    case Errc::Usage: return "UsageError";
  }
  return "Error";
}

// {{{ integer helpers

Int floor_div(const Int& a, const Int& b) {
  Int q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

Int ceil_div(const Int& a, const Int& b) { return -floor_div(-a, b); }

Int mod_floor(const Int& a, const Int& b) { return a - b * floor_div(a, b); }

Int gcd(const Int& a, const Int& b) {
  Int x = a < 0 ? Int(-a) : a;
  Int y = b < 0 ? Int(-b) : b;
  while (y != 0) {
    Int t = x % y;
    x = y;
    y = t;
  }
  return x;
}

Int lcm(const Int& a, const Int& b) {
  if (a == 0 || b == 0) return 0;
  Int g = gcd(a, b);
  Int r = a / g * b;
  return r < 0 ? Int(-r) : r;
}

std::int64_t to_i64(const Int& v) { return v.convert_to<std::int64_t>(); }

// }}}

// {{{ AffExpr

AffExpr AffExpr::variable(const std::string& name, const Int& coeff) {
  AffExpr e;
  e.set_coeff(name, coeff);
  return e;
}

Int AffExpr::coeff(const std::string& name) const {
  auto it = coeffs_.find(name);
  return it == coeffs_.end() ? Int(0) : it->second;
}

std::vector<std::string> AffExpr::variables() const {
  std::vector<std::string> r;
  r.reserve(coeffs_.size());
  for (const auto& [n, _] : coeffs_) r.push_back(n);
  return r;
}

void AffExpr::set_coeff(const std::string& name, const Int& value) {
  if (value == 0)
    coeffs_.erase(name);
  else
    coeffs_[name] = value;
}

AffExpr& AffExpr::operator+=(const AffExpr& other) {
  for (const auto& [n, c] : other.coeffs_) set_coeff(n, coeff(n) + c);
  constant_ += other.constant_;
  return *this;
}

AffExpr& AffExpr::operator-=(const AffExpr& other) {
  for (const auto& [n, c] : other.coeffs_) set_coeff(n, coeff(n) - c);
  constant_ -= other.constant_;
  return *this;
}

AffExpr& AffExpr::operator*=(const Int& factor) {
  if (factor == 0) {
    coeffs_.clear();
    constant_ = 0;
    return *this;
  }
  for (auto& [_, c] : coeffs_) c *= factor;
  constant_ *= factor;
  return *this;
}

AffExpr AffExpr::substitute(const std::string& name, const AffExpr& value) const {
  auto it = coeffs_.find(name);
  if (it == coeffs_.end()) return *this;
  Int c = it->second;
  AffExpr r = without(name);
  r += value * c;
  return r;
}

AffExpr AffExpr::rename(const std::string& from, const std::string& to) const {
  if (!depends_on(from)) return *this;
  return substitute(from, variable(to));
}

AffExpr AffExpr::without(const std::string& name) const {
  AffExpr r = *this;
  r.coeffs_.erase(name);
  return r;
}

Int AffExpr::content() const {
  Int g = 0;
  for (const auto& [_, c] : coeffs_) g = gcd(g, c);
  return g;
}

namespace {

std::string term_text(const Int& magnitude, const std::string& name) {
  if (magnitude == 1) return name;
  return magnitude.str() + "*" + name;
}

}  // namespace

std::string AffExpr::to_string() const {
  std::ostringstream os;
  bool first = true;
  if (constant_ != 0 || coeffs_.empty()) {
    os << constant_.str();
    first = false;
  }
  for (const auto& [n, c] : coeffs_) {
    const bool neg = c < 0;
    const Int mag = neg ? Int(-c) : c;
    if (first)
      os << (neg ? "-" : "") << term_text(mag, n);
    else
      os << (neg ? " - " : " + ") << term_text(mag, n);
    first = false;
  }
  return os.str();
}

// }}}

// {{{ Constraint

std::optional<Constraint> Constraint::normalized() const {
  const Int g = expr_.content();
  const Int& c = expr_.constant();
  switch (kind_) {
    case ConstraintKind::Ge: {
      if (g == 0) {
        if (c >= 0) return std::nullopt;
        return falsum();
      }
      AffExpr e;
      for (const auto& [n, v] : expr_.coefficients()) e.set_coeff(n, v / g);
      e.set_constant(floor_div(c, g));
      return ge(std::move(e));
    }
    case ConstraintKind::Eq: {
      if (g == 0) {
        if (c == 0) return std::nullopt;
        return falsum();
      }
      if (c % g != 0) return falsum();
      AffExpr e;
      for (const auto& [n, v] : expr_.coefficients()) e.set_coeff(n, v / g);
      e.set_constant(c / g);
      // Canonical sign: first coefficient positive.
      if (e.coefficients().begin()->second < 0) e = -e;
      return eq(std::move(e));
    }
    case ConstraintKind::Div: {
      Int m = modulus_ < 0 ? Int(-modulus_) : modulus_;
      if (m <= 1) return std::nullopt;
      AffExpr e;
      for (const auto& [n, v] : expr_.coefficients()) e.set_coeff(n, mod_floor(v, m));
      e.set_constant(mod_floor(c, m));
      Int gm = gcd(e.content(), m);
      if (e.is_constant()) {
        if (e.constant() == 0) return std::nullopt;
        return falsum();
      }
      if (e.constant() % gm != 0) return falsum();
      if (gm > 1) {
        AffExpr r;
        for (const auto& [n, v] : e.coefficients()) r.set_coeff(n, v / gm);
        r.set_constant(e.constant() / gm);
        e = std::move(r);
        m /= gm;
      }
      if (m == 1) return std::nullopt;
      return div(std::move(e), m);
    }
  }
  return *this;
}

bool Constraint::is_falsum() const {
  return kind_ == ConstraintKind::Ge && expr_.is_constant() && expr_.constant() < 0;
}

std::string Constraint::to_string(const std::vector<std::string>& var_order) const {
  if (kind_ == ConstraintKind::Div) {
    if (expr_.coefficients().size() + (expr_.constant() != 0 ? 1 : 0) > 1)
      return "(" + expr_.to_string() + ") mod " + modulus_.str() + " = 0";
    return expr_.to_string() + " mod " + modulus_.str() + " = 0";
  }
  // Isolate the last variable (in declaration order) that occurs.
  std::string display;
  for (auto it = var_order.rbegin(); it != var_order.rend(); ++it) {
    if (expr_.depends_on(*it)) {
      display = *it;
      break;
    }
  }
  if (display.empty() && !expr_.is_constant()) display = expr_.coefficients().rbegin()->first;
  const char* rel_eq = "=";
  if (display.empty()) return expr_.to_string() + (kind_ == ConstraintKind::Eq ? " = 0" : " >= 0");

  Int a = expr_.coeff(display);
  AffExpr rest = -expr_.without(display);  // a*v >= rest  or  a*v = rest
  std::string op = kind_ == ConstraintKind::Eq ? rel_eq : ">=";
  if (a < 0) {
    a = -a;
    rest = -rest;
    if (kind_ == ConstraintKind::Ge) op = "<=";
  }
  return term_text(a, display) + " " + op + " " + rest.to_string();
}

// }}}

// {{{ PolySet

PolySet::PolySet(std::vector<std::string> set_vars, std::vector<std::string> params,
                 std::vector<Constraint> constraints)
    : set_vars_(std::move(set_vars)), params_(std::move(params)), constraints_(std::move(constraints)) {
  for (const auto& c : constraints_)
    for (const auto& [n, _] : c.expr().coefficients())
      if (!knows(n)) params_.push_back(n);
}

bool PolySet::has_set_var(const std::string& name) const {
  return std::find(set_vars_.begin(), set_vars_.end(), name) != set_vars_.end();
}

bool PolySet::has_param(const std::string& name) const {
  return std::find(params_.begin(), params_.end(), name) != params_.end();
}

std::vector<std::string> PolySet::all_names() const {
  std::vector<std::string> r = params_;
  r.insert(r.end(), set_vars_.begin(), set_vars_.end());
  return r;
}

PolySet PolySet::with_constraint(const Constraint& c) const {
  std::vector<Constraint> cs = constraints_;
  cs.push_back(c);
  return PolySet(set_vars_, params_, std::move(cs));
}

PolySet PolySet::with_constraints(const std::vector<Constraint>& extra) const {
  std::vector<Constraint> cs = constraints_;
  cs.insert(cs.end(), extra.begin(), extra.end());
  return PolySet(set_vars_, params_, std::move(cs));
}

PolySet PolySet::with_set_var(const std::string& name, std::optional<std::size_t> position) const {
  if (has_set_var(name)) return *this;
  if (has_param(name))
    throw Error(Errc::NameClassMismatch, "'" + name + "' is already a parameter");
  std::vector<std::string> vars = set_vars_;
  std::size_t pos = std::min(position.value_or(vars.size()), vars.size());
  vars.insert(vars.begin() + static_cast<std::ptrdiff_t>(pos), name);
  return PolySet(std::move(vars), params_, constraints_);
}

PolySet PolySet::with_param(const std::string& name) const {
  if (knows(name)) return *this;
  std::vector<std::string> ps = params_;
  ps.push_back(name);
  return PolySet(set_vars_, std::move(ps), constraints_);
}

PolySet PolySet::without_param(const std::string& name) const {
  std::vector<std::string> ps = params_;
  std::erase(ps, name);
  for (const auto& c : constraints_)
    if (c.involves(name))
      throw Error(Errc::InvalidKernel, "parameter '" + name + "' still constrained");
  return PolySet(set_vars_, std::move(ps), constraints_);
}

PolySet PolySet::rename(const std::string& from, const std::string& to) const {
  auto swap_name = [&](std::vector<std::string> v) {
    for (auto& n : v)
      if (n == from) n = to;
    return v;
  };
  std::vector<Constraint> cs;
  for (const auto& c : constraints_) cs.push_back(c.with_expr(c.expr().rename(from, to)));
  return PolySet(swap_name(set_vars_), swap_name(params_), std::move(cs));
}

PolySet PolySet::fix(const std::string& name, const Int& value) const {
  std::vector<Constraint> cs;
  for (const auto& c : constraints_) cs.push_back(c.substitute(name, AffExpr(value)));
  std::vector<std::string> vars = set_vars_, ps = params_;
  std::erase(vars, name);
  std::erase(ps, name);
  return PolySet(std::move(vars), std::move(ps), std::move(cs)).simplified();
}

namespace {

AffExpr linear_part(const AffExpr& e) {
  AffExpr r = e;
  r.set_constant(0);
  return r;
}

}  // namespace

PolySet PolySet::simplified() const {
  std::vector<Constraint> norm;
  for (const auto& c : constraints_) {
    auto n = c.normalized();
    if (!n) continue;
    if (n->is_falsum()) return PolySet(set_vars_, params_, {Constraint::falsum()});
    if (std::find(norm.begin(), norm.end(), *n) == norm.end()) norm.push_back(*n);
  }

  // Pairwise redundancy among constraints sharing a linear part.
  std::vector<bool> dead(norm.size(), false);
  for (std::size_t i = 0; i < norm.size(); ++i) {
    if (dead[i] || norm[i].kind() == ConstraintKind::Div) continue;
    for (std::size_t j = i + 1; j < norm.size(); ++j) {
      const AffExpr li = linear_part(norm[i].expr());
      const Int ci = norm[i].expr().constant();
      if (dead[j] || dead[i] || norm[j].kind() == ConstraintKind::Div) continue;
      const AffExpr lj = linear_part(norm[j].expr());
      const Int cj = norm[j].expr().constant();
      const bool same = li == lj;
      const bool opposite = !same && li == -lj;
      if (!same && !opposite) continue;
      const auto ki = norm[i].kind(), kj = norm[j].kind();
      if (ki == ConstraintKind::Ge && kj == ConstraintKind::Ge) {
        if (same) {
          if (cj < ci) norm[i] = norm[j];
          dead[j] = true;
        } else {
          const Int sum = ci + cj;
          if (sum < 0) return PolySet(set_vars_, params_, {Constraint::falsum()});
          if (sum == 0) {
            norm[i] = *Constraint::eq(norm[i].expr()).normalized();
            dead[j] = true;
          }
        }
      } else if (ki == ConstraintKind::Eq && kj == ConstraintKind::Eq) {
        // Equal linear parts with different constants (opposite handled by
        // sign canonicalization) are contradictory.
        if (same && ci != cj) return PolySet(set_vars_, params_, {Constraint::falsum()});
      } else {
        // One equality, one inequality.
        const bool i_is_eq = ki == ConstraintKind::Eq;
        const std::size_t e = i_is_eq ? i : j, g = i_is_eq ? j : i;
        const Int ce = norm[e].expr().constant(), cg = norm[g].expr().constant();
        // On the equality, linear = -ce. Ge reads +-linear + cg >= 0.
        const Int value = same ? Int(cg - ce) : Int(cg + ce);
        if (value < 0) return PolySet(set_vars_, params_, {Constraint::falsum()});
        dead[g] = true;
      }
    }
  }
  std::vector<Constraint> out;
  for (std::size_t i = 0; i < norm.size(); ++i)
    if (!dead[i]) out.push_back(norm[i]);
  return PolySet(set_vars_, params_, std::move(out));
}

bool PolySet::is_obviously_empty() const {
  return std::any_of(constraints_.begin(), constraints_.end(),
                     [](const Constraint& c) { return c.is_falsum(); });
}

std::string PolySet::to_string() const {
  std::ostringstream os;
  if (!params_.empty()) {
    os << "[";
    for (std::size_t i = 0; i < params_.size(); ++i) os << (i ? ", " : "") << params_[i];
    os << "] -> ";
  }
  os << "{ ";
  if (!set_vars_.empty()) {
    os << "[";
    for (std::size_t i = 0; i < set_vars_.size(); ++i) os << (i ? ", " : "") << set_vars_[i];
    os << "] ";
  }
  if (!constraints_.empty()) {
    os << ": ";
    const auto order = all_names();
    for (std::size_t i = 0; i < constraints_.size(); ++i)
      os << (i ? " and " : "") << constraints_[i].to_string(order);
    os << " ";
  } else if (set_vars_.empty()) {
    os << ": ";
  }
  os << "}";
  return os.str();
}

// }}}

// {{{ set operations

PolySet intersect(const PolySet& a, const PolySet& b) {
  std::vector<std::string> vars = a.set_vars();
  std::vector<std::string> params = a.params();
  for (const auto& v : b.set_vars()) {
    if (a.has_param(v))
      throw Error(Errc::NameClassMismatch, "'" + v + "' is a parameter on the left, a variable on the right");
    if (!a.has_set_var(v)) vars.push_back(v);
  }
  for (const auto& p : b.params()) {
    if (a.has_set_var(p))
      throw Error(Errc::NameClassMismatch, "'" + p + "' is a variable on the left, a parameter on the right");
    if (!a.has_param(p)) params.push_back(p);
  }
  std::vector<Constraint> cs = a.constraints();
  cs.insert(cs.end(), b.constraints().begin(), b.constraints().end());
  return PolySet(std::move(vars), std::move(params), std::move(cs)).simplified();
}

Projection project_out_checked(const PolySet& input, const std::string& var) {
  if (!input.has_set_var(var)) throw Error(Errc::UnknownIname, "'" + var + "' is not a set variable");
  const PolySet s = input.simplified();
  std::vector<std::string> vars = s.set_vars();
  std::erase(vars, var);
  if (s.is_obviously_empty()) return {PolySet(vars, s.params(), {Constraint::falsum()}), true};

  const auto& cs = s.constraints();

  // Prefer elimination through an equality: exact.
  std::optional<std::size_t> eq_idx;
  for (std::size_t i = 0; i < cs.size(); ++i) {
    if (cs[i].kind() != ConstraintKind::Eq || !cs[i].involves(var)) continue;
    if (!eq_idx || abs(cs[i].expr().coeff(var)) < abs(cs[*eq_idx].expr().coeff(var))) eq_idx = i;
  }
  if (eq_idx) {
    const Int a = cs[*eq_idx].expr().coeff(var);
    const AffExpr rest = cs[*eq_idx].expr().without(var);
    const Int abs_a = abs(a);
    const Int sign_a = a < 0 ? -1 : 1;
    std::vector<Constraint> out;
    for (std::size_t i = 0; i < cs.size(); ++i) {
      if (i == *eq_idx) continue;
      const Int b = cs[i].expr().coeff(var);
      if (b == 0) {
        out.push_back(cs[i]);
        continue;
      }
      // |a| * (b*var + r) with a*var = -rest.
      AffExpr e = cs[i].expr().without(var) * abs_a - rest * (b * sign_a);
      if (cs[i].kind() == ConstraintKind::Div)
        out.push_back(Constraint::div(std::move(e), cs[i].modulus() * abs_a));
      else
        out.push_back(cs[i].with_expr(std::move(e)));
    }
    if (abs_a > 1) out.push_back(Constraint::div(rest, abs_a));
    return {PolySet(vars, s.params(), std::move(out)).simplified(), true};
  }

  std::vector<Constraint> lowers, uppers, divs, out;
  for (const auto& c : cs) {
    if (!c.involves(var)) {
      out.push_back(c);
    } else if (c.kind() == ConstraintKind::Div) {
      divs.push_back(c);
    } else if (c.expr().coeff(var) > 0) {
      lowers.push_back(c);
    } else {
      uppers.push_back(c);
    }
  }

  bool exact = true;
  // A divisibility constraint d*var + e = 0 (mod m) forces gcd(d, m) | e.
  for (const auto& d : divs) {
    const Int g = gcd(d.expr().coeff(var), d.modulus());
    out.push_back(Constraint::div(d.expr().without(var), g));
  }
  const bool one_sided = lowers.empty() || uppers.empty();
  if (one_sided) {
    // var is free in one direction; the residue conditions above are then
    // exact for a single divisibility constraint.
    if (divs.size() > 1) exact = false;
  } else {
    if (!divs.empty()) exact = false;
    bool unit_low = true, unit_up = true;
    for (const auto& l : lowers)
      if (l.expr().coeff(var) != 1) unit_low = false;
    for (const auto& u : uppers)
      if (u.expr().coeff(var) != -1) unit_up = false;
    if (!unit_low && !unit_up) exact = false;
    for (const auto& l : lowers) {
      const Int a = l.expr().coeff(var);
      for (const auto& u : uppers) {
        const Int b = -u.expr().coeff(var);
        out.push_back(Constraint::ge(l.expr() * b + u.expr() * a));
      }
    }
  }
  PolySet result = PolySet(vars, s.params(), std::move(out)).simplified();
  if (!exact && is_empty(s)) {
    // An empty input projects to an empty set; report it exactly.
    return {PolySet(vars, s.params(), {Constraint::falsum()}), true};
  }
  return {std::move(result), exact};
}

PolySet project_out(const PolySet& s, const std::string& var) { return project_out_checked(s, var).set; }

PolySet project_onto(const PolySet& s, const std::vector<std::string>& keep) {
  PolySet r = s;
  const auto vars = s.set_vars();
  for (auto it = vars.rbegin(); it != vars.rend(); ++it)
    if (std::find(keep.begin(), keep.end(), *it) == keep.end()) r = project_out(r, *it);
  return r;
}

bool is_empty(const PolySet& s) {
  const PolySet t = s.simplified();
  if (t.is_obviously_empty()) return true;
  return !detail::polyset_feasible(t);
}

bool implies(const PolySet& context, const Constraint& c) {
  auto n = c.normalized();
  if (!n) return true;
  const AffExpr& e = n->expr();
  switch (n->kind()) {
    case ConstraintKind::Ge:
      return is_empty(context.with_constraint(Constraint::ge(-e - AffExpr(1))));
    case ConstraintKind::Eq:
      return is_empty(context.with_constraint(Constraint::ge(-e - AffExpr(1)))) &&
             is_empty(context.with_constraint(Constraint::ge(e - AffExpr(1))));
    case ConstraintKind::Div:
      for (Int r = 1; r < n->modulus(); ++r)
        if (!is_empty(context.with_constraint(Constraint::div(e - AffExpr(r), n->modulus())))) return false;
      return true;
  }
  return false;
}

// }}}

// {{{ bounds

namespace {

// Removes candidates that the rest of `context` already implies.
std::vector<BoundCandidate> prune(std::vector<BoundCandidate> cands, const PolySet& context) {
  if (cands.size() <= 1) return cands;
  std::vector<Constraint> current = context.constraints();
  std::vector<BoundCandidate> kept;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    std::vector<Constraint> others;
    bool removed_self = false;
    for (const auto& c : current) {
      if (!removed_self && c == cands[i].source) {
        removed_self = true;
        continue;
      }
      others.push_back(c);
    }
    // Only prune while another candidate on the same side remains.
    const std::size_t remaining = kept.size() + (cands.size() - i - 1);
    if (removed_self && remaining > 0 &&
        implies(PolySet(context.set_vars(), context.params(), others), cands[i].source)) {
      current = std::move(others);
      continue;
    }
    kept.push_back(cands[i]);
  }
  return kept;
}

}  // namespace

LoopBounds bounds(const PolySet& s, const std::string& var, const std::vector<std::string>& outer) {
  if (!s.has_set_var(var)) throw Error(Errc::UnknownIname, "'" + var + "' is not a set variable");
  std::vector<std::string> keep = outer;
  keep.push_back(var);
  const PolySet p = project_onto(s, keep).simplified();

  LoopBounds lb;
  std::vector<BoundCandidate> lowers, uppers;
  std::vector<std::pair<Int, Int>> congruences;  // (modulus, residue)
  for (const auto& c : p.constraints()) {
    if (!c.involves(var)) continue;
    const Int a = c.expr().coeff(var);
    const AffExpr rest = c.expr().without(var);
    switch (c.kind()) {
      case ConstraintKind::Ge:
        if (a > 0)
          lowers.push_back({{-rest + AffExpr(a - 1), a}, c});
        else
          uppers.push_back({{rest, -a}, c});
        break;
      case ConstraintKind::Eq: {
        // a*var + rest = 0, a > 0 after canonicalization.
        const Int aa = abs(a);
        const AffExpr r = a > 0 ? rest : -rest;
        lowers.push_back({{-r + AffExpr(aa - 1), aa}, Constraint::ge(AffExpr::variable(var, aa) + r)});
        uppers.push_back({{-r, aa}, Constraint::ge(-(AffExpr::variable(var, aa) + r))});
        break;
      }
      case ConstraintKind::Div:
        if (rest.is_constant()) {
          // a*var + k = 0 (mod m) with gcd(a, m) = 1.
          const Int m = c.modulus();
          Int residue = 0;
          for (Int x = 0; x < m; ++x)
            if (mod_floor(a * x + rest.constant(), m) == 0) {
              residue = x;
              break;
            }
          congruences.emplace_back(m, residue);
        }
        break;
    }
  }
  if (lowers.empty() || uppers.empty())
    throw Error(Errc::Unbounded, "'" + var + "' has no " + (lowers.empty() ? "lower" : "upper") + " bound");

  lb.lower = prune(std::move(lowers), p);
  lb.upper = prune(std::move(uppers), p);
  for (const auto& [m, r] : congruences) {
    const Int l = lcm(lb.stride, m);
    Int residue = 0;
    for (Int x = 0; x < l; ++x)
      if (mod_floor(x - lb.residue, lb.stride) == 0 && mod_floor(x - r, m) == 0) {
        residue = x;
        break;
      }
    lb.stride = l;
    lb.residue = residue;
  }
  return lb;
}

namespace {

const std::string kProbe = "__kgen_probe";

LoopBounds probe_bounds(const PolySet& s, const AffExpr& e) {
  PolySet t = s.with_set_var(kProbe).with_constraint(Constraint::eq(AffExpr::variable(kProbe) - e));
  return bounds(t, kProbe, {});
}

// Constant candidates are moved onto the congruence class of the probe.
QuasiAff pick_static(const LoopBounds& lb, bool upper) {
  const auto& cands = upper ? lb.upper : lb.lower;
  std::optional<Int> best_const;
  for (const auto& c : cands) {
    if (!c.value.is_constant()) continue;
    Int v = floor_div(c.value.numerator.constant(), c.value.denominator);
    if (!best_const || (upper ? v < *best_const : v > *best_const)) best_const = v;
  }
  if (best_const) {
    const Int v = upper ? *best_const - mod_floor(*best_const - lb.residue, lb.stride)
                        : *best_const + mod_floor(lb.residue - *best_const, lb.stride);
    return {AffExpr(v), 1};
  }
  return cands.front().value;
}

}  // namespace

QuasiAff static_upper(const PolySet& s, const std::string& var) {
  return pick_static(probe_bounds(s, AffExpr::variable(var)), true);
}

QuasiAff static_lower(const PolySet& s, const std::string& var) {
  return pick_static(probe_bounds(s, AffExpr::variable(var)), false);
}

namespace {

AffExpr as_affine(const QuasiAff& q, const AffExpr& e) {
  if (q.is_affine()) return q.numerator;
  if (q.is_constant()) return AffExpr(floor_div(q.numerator.constant(), q.denominator));
  throw Error(Errc::Unbounded, "bound of " + e.to_string() + " is not affine in the parameters");
}

// Every parameter eliminated as well; sound for all parameter values.
AffExpr constant_bound(const PolySet& s, const AffExpr& e, bool upper) {
  std::vector<std::string> vars = s.set_vars();
  vars.insert(vars.end(), s.params().begin(), s.params().end());
  const PolySet all(vars, {}, s.constraints());
  const LoopBounds lb = probe_bounds(all, e);
  for (const auto& c : upper ? lb.upper : lb.lower)
    if (c.value.is_constant()) return as_affine(pick_static(lb, upper), e);
  throw Error(Errc::Unbounded, "bound of " + e.to_string() + " is not affine in the parameters");
}

}  // namespace

AffExpr static_max(const PolySet& s, const AffExpr& e) {
  if (e.is_constant()) return e;
  const LoopBounds lb = probe_bounds(s, e);
  const auto& cands = lb.upper;
  // Prefer an affine candidate; constants first.
  for (const auto& c : cands)
    if (c.value.is_constant()) return as_affine(pick_static(lb, true), e);
  for (const auto& c : cands)
    if (c.value.is_affine()) return c.value.numerator;
  return constant_bound(s, e, true);
}

AffExpr static_min(const PolySet& s, const AffExpr& e) {
  if (e.is_constant()) return e;
  const LoopBounds lb = probe_bounds(s, e);
  const auto& cands = lb.lower;
  for (const auto& c : cands)
    if (c.value.is_constant()) return as_affine(pick_static(lb, false), e);
  for (const auto& c : cands)
    if (c.value.is_affine()) return c.value.numerator;
  return constant_bound(s, e, false);
}

// }}}

}  // namespace kgen
