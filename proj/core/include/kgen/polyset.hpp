#pragma once

// Integer sets described by conjunctions of affine constraints over named
// variables, with divisibility constraints standing in for strides.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "kgen/error.hpp"

namespace kgen {

using Int = boost::multiprecision::cpp_int;

Int floor_div(const Int& a, const Int& b);
Int ceil_div(const Int& a, const Int& b);
/// Result in [0, b) for b > 0.
Int mod_floor(const Int& a, const Int& b);
Int gcd(const Int& a, const Int& b);
Int lcm(const Int& a, const Int& b);
std::int64_t to_i64(const Int& v);

class AffExpr {
 public:
  AffExpr() = default;
  AffExpr(Int constant) : constant_(std::move(constant)) {}  // NOLINT: implicit by design of literals
  AffExpr(int constant) : constant_(constant) {}              // NOLINT

  static AffExpr variable(const std::string& name, const Int& coeff = 1);

  const std::map<std::string, Int>& coefficients() const { return coeffs_; }
  const Int& constant() const { return constant_; }
  Int coeff(const std::string& name) const;
  bool is_constant() const { return coeffs_.empty(); }
  bool depends_on(const std::string& name) const { return coeffs_.count(name) != 0; }
  std::vector<std::string> variables() const;

  void set_coeff(const std::string& name, const Int& value);
  void set_constant(const Int& value) { constant_ = value; }

  AffExpr& operator+=(const AffExpr& other);
  AffExpr& operator-=(const AffExpr& other);
  AffExpr& operator*=(const Int& factor);
  friend AffExpr operator+(AffExpr a, const AffExpr& b) { return a += b; }
  friend AffExpr operator-(AffExpr a, const AffExpr& b) { return a -= b; }
  friend AffExpr operator*(AffExpr a, const Int& f) { return a *= f; }
  friend AffExpr operator*(const Int& f, AffExpr a) { return a *= f; }
  AffExpr operator-() const { return *this * Int(-1); }

  /// Replace `name` by `value` (coefficient-scaled).
  AffExpr substitute(const std::string& name, const AffExpr& value) const;
  AffExpr rename(const std::string& from, const std::string& to) const;
  /// The expression without its `name` term.
  AffExpr without(const std::string& name) const;
  /// gcd of the variable coefficients; 0 for a constant.
  Int content() const;

  /// Evaluate given a callable `Int lookup(const std::string&)`.
  template <class Lookup>
  Int eval(Lookup&& lookup) const {
    Int r = constant_;
    for (const auto& [name, c] : coeffs_) r += c * Int(lookup(name));
    return r;
  }

  /// isl-style rendering, constant first: "-1 + n", "2*i - j".
  std::string to_string() const;

  friend bool operator==(const AffExpr& a, const AffExpr& b) {
    return a.constant_ == b.constant_ && a.coeffs_ == b.coeffs_;
  }
  friend bool operator<(const AffExpr& a, const AffExpr& b) {
    if (a.coeffs_ != b.coeffs_) return a.coeffs_ < b.coeffs_;
    return a.constant_ < b.constant_;
  }

 private:
  std::map<std::string, Int> coeffs_;
  Int constant_ = 0;
};

enum class ConstraintKind { Eq, Ge, Div };

/// `expr = 0`, `expr >= 0`, or `expr = 0 (mod modulus)`.
class Constraint {
 public:
  static Constraint eq(AffExpr e) { return Constraint(ConstraintKind::Eq, std::move(e), 0); }
  static Constraint ge(AffExpr e) { return Constraint(ConstraintKind::Ge, std::move(e), 0); }
  static Constraint div(AffExpr e, Int modulus) {
    return Constraint(ConstraintKind::Div, std::move(e), std::move(modulus));
  }
  /// The canonical unsatisfiable constraint `-1 >= 0`.
  static Constraint falsum() { return ge(AffExpr(-1)); }

  ConstraintKind kind() const { return kind_; }
  const AffExpr& expr() const { return expr_; }
  const Int& modulus() const { return modulus_; }
  bool involves(const std::string& name) const { return expr_.depends_on(name); }

  /// Normal form: gcd-reduced coefficients, tightened constant for Ge,
  /// residues in [0, m) for Div. Returns nullopt for a tautology and
  /// `falsum()` for a contradiction.
  std::optional<Constraint> normalized() const;
  bool is_falsum() const;

  template <class Lookup>
  bool holds(Lookup&& lookup) const {
    Int v = expr_.eval(lookup);
    switch (kind_) {
      case ConstraintKind::Eq: return v == 0;
      case ConstraintKind::Ge: return v >= 0;
      case ConstraintKind::Div: return mod_floor(v, modulus_) == 0;
    }
    return false;
  }

  Constraint with_expr(AffExpr e) const { return Constraint(kind_, std::move(e), modulus_); }
  Constraint substitute(const std::string& name, const AffExpr& value) const {
    return with_expr(expr_.substitute(name, value));
  }

  /// Renders with the display variable isolated: "i <= -1 + n".
  std::string to_string(const std::vector<std::string>& var_order) const;

  friend bool operator==(const Constraint& a, const Constraint& b) {
    return a.kind_ == b.kind_ && a.modulus_ == b.modulus_ && a.expr_ == b.expr_;
  }
  friend bool operator<(const Constraint& a, const Constraint& b) {
    if (a.kind_ != b.kind_) return a.kind_ < b.kind_;
    if (a.modulus_ != b.modulus_) return a.modulus_ < b.modulus_;
    return a.expr_ < b.expr_;
  }

 private:
  Constraint(ConstraintKind k, AffExpr e, Int m)
      : kind_(k), expr_(std::move(e)), modulus_(std::move(m)) {}

  ConstraintKind kind_;
  AffExpr expr_;
  Int modulus_;
};

class PolySet {
 public:
  PolySet() = default;
  PolySet(std::vector<std::string> set_vars, std::vector<std::string> params,
          std::vector<Constraint> constraints);

  static PolySet universe(std::vector<std::string> set_vars = {},
                          std::vector<std::string> params = {}) {
    return PolySet(std::move(set_vars), std::move(params), {});
  }

  const std::vector<std::string>& set_vars() const { return set_vars_; }
  const std::vector<std::string>& params() const { return params_; }
  const std::vector<Constraint>& constraints() const { return constraints_; }

  bool has_set_var(const std::string& name) const;
  bool has_param(const std::string& name) const;
  bool knows(const std::string& name) const { return has_set_var(name) || has_param(name); }
  /// Params first, then set vars.
  std::vector<std::string> all_names() const;

  /// Adds a constraint, registering unknown names as parameters.
  PolySet with_constraint(const Constraint& c) const;
  PolySet with_constraints(const std::vector<Constraint>& cs) const;
  PolySet with_set_var(const std::string& name, std::optional<std::size_t> position = {}) const;
  /// Reclassify: drop `name` from params and append to set vars, or vice versa.
  PolySet with_param(const std::string& name) const;
  PolySet without_param(const std::string& name) const;
  PolySet rename(const std::string& from, const std::string& to) const;
  /// Substitute `name := value` in all constraints and drop `name`.
  PolySet fix(const std::string& name, const Int& value) const;

  /// Canonical form: normalized constraints, duplicates and pairwise
  /// redundancies removed, contradictions collapsed to a single falsum.
  PolySet simplified() const;
  bool is_obviously_empty() const;

  template <class Lookup>
  bool contains(Lookup&& lookup) const {
    for (const auto& c : constraints_)
      if (!c.holds(lookup)) return false;
    return true;
  }

  std::string to_string() const;

  friend bool operator==(const PolySet& a, const PolySet& b) {
    return a.set_vars_ == b.set_vars_ && a.params_ == b.params_ &&
           a.constraints_ == b.constraints_;
  }

 private:
  std::vector<std::string> set_vars_;
  std::vector<std::string> params_;
  std::vector<Constraint> constraints_;
};

/// Parses `[ params ] -> { [ vars ] : conj }`. Names that are not set
/// variables become parameters in order of first appearance.
PolySet parse_set(std::string_view text);
/// Parses a bare affine expression such as "n + 1".
AffExpr parse_affine(std::string_view text);

PolySet intersect(const PolySet& a, const PolySet& b);

struct Projection {
  PolySet set;
  /// True when the result is exactly the integer projection. False means the
  /// result is a (sound) superset.
  bool exact = true;
};

Projection project_out_checked(const PolySet& s, const std::string& var);
PolySet project_out(const PolySet& s, const std::string& var);
/// Projects out every set variable not listed in `keep`.
PolySet project_onto(const PolySet& s, const std::vector<std::string>& keep);

/// True iff no integer point exists, parameters treated as existential.
bool is_empty(const PolySet& s);
/// True iff every integer point of `context` satisfies `c`. Exact.
bool implies(const PolySet& context, const Constraint& c);

/// floor(numerator / denominator), denominator >= 1.
struct QuasiAff {
  AffExpr numerator;
  Int denominator = 1;

  bool is_affine() const { return denominator == 1; }
  bool is_constant() const { return numerator.is_constant(); }
  template <class Lookup>
  Int eval(Lookup&& lookup) const {
    return floor_div(numerator.eval(lookup), denominator);
  }
  QuasiAff substitute(const std::string& name, const AffExpr& value) const {
    return {numerator.substitute(name, value), denominator};
  }
  friend bool operator==(const QuasiAff& a, const QuasiAff& b) {
    return a.denominator == b.denominator && a.numerator == b.numerator;
  }
};

struct BoundCandidate {
  QuasiAff value;
  /// The constraint the bound was read off; `var >= value` (or `<=`) is
  /// equivalent to it over the integers.
  Constraint source;
};

struct LoopBounds {
  std::vector<BoundCandidate> lower;
  std::vector<BoundCandidate> upper;
  Int stride = 1;
  /// Feasible values satisfy var = residue (mod stride).
  Int residue = 0;
};

/// Loop bounds of `var` in terms of `outer` variables and parameters.
LoopBounds bounds(const PolySet& s, const std::string& var, const std::vector<std::string>& outer);

/// Parameter-only affine upper (lower) bound of `e` over `s`.
AffExpr static_max(const PolySet& s, const AffExpr& e);
AffExpr static_min(const PolySet& s, const AffExpr& e);

/// Lower/upper bound of `var` over `s` with every other set variable
/// projected out, as floor-quasi-affine expressions in the parameters.
/// Picks a constant candidate when one exists.
QuasiAff static_lower(const PolySet& s, const std::string& var);
QuasiAff static_upper(const PolySet& s, const std::string& var);

}  // namespace kgen
