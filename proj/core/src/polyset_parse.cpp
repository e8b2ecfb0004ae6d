#include <algorithm>
#include <cctype>

#include "kgen/polyset.hpp"

namespace kgen {
namespace {

class SetParser {
 public:
  explicit SetParser(std::string_view text) : text_(text) {}

  PolySet parse_set() {
    std::vector<std::string> params, vars;
    if (peek_is("[")) {
      params = name_list();
      expect("->");
    }
    expect("{");
    if (peek_is("[")) vars = name_list();
    vars_ = vars;
    std::vector<Constraint> cs;
    if (accept(":")) {
      if (!peek_is("}")) conj(cs);
    }
    expect("}");
    end();
    // Order parameters: declared first, then by first appearance.
    for (const auto& n : seen_)
      if (std::find(vars.begin(), vars.end(), n) == vars.end() &&
          std::find(params.begin(), params.end(), n) == params.end())
        params.push_back(n);
    for (const auto& p : params)
      if (std::find(vars.begin(), vars.end(), p) != vars.end())
        throw Error(Errc::NameClassMismatch, "'" + p + "' declared both as parameter and variable");
    return PolySet(std::move(vars), std::move(params), std::move(cs)).simplified();
  }

  AffExpr parse_affine_only() {
    AffExpr e = affexpr();
    end();
    return e;
  }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  [[noreturn]] void fail(const std::string& msg) const { throw SyntaxError(pos_, msg); }

  bool peek_is(std::string_view tok) {
    skip_ws();
    if (text_.substr(pos_, tok.size()) != tok) return false;
    if (std::isalpha(static_cast<unsigned char>(tok.front()))) {
      const std::size_t after = pos_ + tok.size();
      if (after < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[after])) || text_[after] == '_'))
        return false;
    }
    return true;
  }

  bool accept(std::string_view tok) {
    if (!peek_is(tok)) return false;
    pos_ += tok.size();
    return true;
  }

  void expect(std::string_view tok) {
    if (!accept(tok)) fail("expected '" + std::string(tok) + "'");
  }

  void end() {
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
  }

  bool peek_ident() {
    skip_ws();
    return pos_ < text_.size() && (std::isalpha(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_');
  }

  std::string ident() {
    if (!peek_ident()) fail("expected a name");
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  bool peek_int() {
    skip_ws();
    return pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]));
  }

  Int integer() {
    if (!peek_int()) fail("expected an integer");
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    return Int(std::string(text_.substr(start, pos_ - start)));
  }

  std::vector<std::string> name_list() {
    expect("[");
    std::vector<std::string> names;
    if (!peek_is("]")) {
      do {
        names.push_back(ident());
      } while (accept(","));
    }
    expect("]");
    return names;
  }

  void note(const std::string& name) {
    if (std::find(seen_.begin(), seen_.end(), name) == seen_.end()) seen_.push_back(name);
  }

  // affexpr := term { (+|-) term }
  AffExpr affexpr() {
    AffExpr e = term();
    for (;;) {
      if (accept("+"))
        e += term();
      else if (peek_is("-") && !peek_is("->"))
        (void)accept("-"), e -= term();
      else
        return e;
    }
  }

  // term := factor { * factor }
  AffExpr term() {
    AffExpr e = factor();
    for (;;) {
      skip_ws();
      const std::size_t at = pos_;
      if (!accept("*")) return e;
      AffExpr f = factor();
      if (e.is_constant())
        e = f * e.constant();
      else if (f.is_constant())
        e *= f.constant();
      else
        throw Error(Errc::NonAffine, "product of two non-constant terms at offset " + std::to_string(at));
    }
  }

  AffExpr factor() {
    if (accept("-")) return -factor();
    if (accept("+")) return factor();
    if (accept("(")) {
      AffExpr e = affexpr();
      expect(")");
      return e;
    }
    if (peek_int()) {
      Int v = integer();
      // Juxtaposition such as "2i" is accepted as a product.
      if (peek_ident() && !peek_is("and") && !peek_is("mod")) {
        std::string n = ident();
        note(n);
        return AffExpr::variable(n, v);
      }
      return AffExpr(v);
    }
    if (peek_ident() && !peek_is("and") && !peek_is("mod")) {
      std::string n = ident();
      note(n);
      return AffExpr::variable(n);
    }
    fail("expected an affine expression");
  }

  std::vector<AffExpr> expr_list() {
    std::vector<AffExpr> r{affexpr()};
    while (accept(",")) r.push_back(affexpr());
    return r;
  }

  enum class Rel { Lt, Le, Eq, Ge, Gt };

  std::optional<Rel> relation() {
    if (accept("<=")) return Rel::Le;
    if (accept(">=")) return Rel::Ge;
    if (accept("==")) return Rel::Eq;
    if (accept("<")) return Rel::Lt;
    if (accept(">")) return Rel::Gt;
    if (accept("=")) return Rel::Eq;
    return std::nullopt;
  }

  static void add_rel(std::vector<Constraint>& cs, const AffExpr& l, Rel r, const AffExpr& u) {
    switch (r) {
      case Rel::Lt: cs.push_back(Constraint::ge(u - l - AffExpr(1))); break;
      case Rel::Le: cs.push_back(Constraint::ge(u - l)); break;
      case Rel::Eq: cs.push_back(Constraint::eq(u - l)); break;
      case Rel::Ge: cs.push_back(Constraint::ge(l - u)); break;
      case Rel::Gt: cs.push_back(Constraint::ge(l - u - AffExpr(1))); break;
    }
  }

  void rel(std::vector<Constraint>& cs) {
    std::vector<AffExpr> lhs = expr_list();
    if (accept("mod")) {
      if (lhs.size() != 1) fail("'mod' applies to a single expression");
      Int m = integer();
      if (m < 1) fail("modulus must be positive");
      auto r = relation();
      if (!r || *r != Rel::Eq) fail("expected '=' after mod");
      AffExpr rhs = affexpr();
      if (!rhs.is_constant()) fail("mod residue must be a constant");
      cs.push_back(Constraint::div(lhs.front() - rhs, m));
      return;
    }
    auto r = relation();
    if (!r) fail("expected a comparison");
    do {
      std::vector<AffExpr> rhs = expr_list();
      for (const auto& a : lhs)
        for (const auto& b : rhs) add_rel(cs, a, *r, b);
      lhs = std::move(rhs);
    } while ((r = relation()));
  }

  void conj(std::vector<Constraint>& cs) {
    rel(cs);
    while (accept("and")) rel(cs);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::vector<std::string> vars_;
  std::vector<std::string> seen_;
};

}  // namespace

PolySet parse_set(std::string_view text) { return SetParser(text).parse_set(); }

AffExpr parse_affine(std::string_view text) { return SetParser(text).parse_affine_only(); }

}  // namespace kgen
