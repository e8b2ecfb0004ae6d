#include "kgen/frontend.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "kgen/analysis.hpp"

namespace kgen {

// {{{ expression parser

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

class ExprParser {
 public:
  ExprParser(std::string_view text, std::size_t base) : text_(text), base_(base) {}

  std::size_t pos() const { return pos_; }
  bool at_end() {
    skip_ws();
    return pos_ >= text_.size();
  }
  [[noreturn]] void fail(const std::string& msg) const { throw SyntaxError(base_ + pos_, msg); }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  bool peek(std::string_view tok) {
    skip_ws();
    return text_.substr(pos_, tok.size()) == tok;
  }
  bool accept(std::string_view tok) {
    if (!peek(tok)) return false;
    pos_ += tok.size();
    return true;
  }
  void expect(std::string_view tok) {
    if (!accept(tok)) fail("expected '" + std::string(tok) + "'");
  }
  bool peek_ident() {
    skip_ws();
    return pos_ < text_.size() && is_ident_start(text_[pos_]);
  }
  std::string ident() {
    if (!peek_ident()) fail("expected a name");
    std::size_t start = pos_;
    while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }
  std::string_view rest() const { return text_.substr(pos_); }
  void advance(std::size_t n) { pos_ += n; }

  ExprPtr expression() {
    ExprPtr e = term();
    for (;;) {
      // "->" never occurs inside expressions; ":=" and "=" end them.
      if (accept("+"))
        e = make_binary(BinOp::Add, e, term());
      else if (accept("-"))
        e = make_binary(BinOp::Sub, e, term());
      else
        return e;
    }
  }

  ExprPtr postfix() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      ExprPtr e = expression();
      expect(")");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && pos_ + 1 < text_.size() &&
                                                        std::isdigit(static_cast<unsigned char>(text_[pos_ + 1]))))
      return number();
    if (!is_ident_start(c)) fail(std::string("unexpected character '") + c + "'");
    std::string name = ident();
    if (accept("[")) {
      std::vector<ExprPtr> idx;
      if (!peek("]")) {
        do {
          idx.push_back(expression());
        } while (accept(","));
      }
      expect("]");
      return make_subscript(std::move(name), std::move(idx));
    }
    if (accept("(")) {
      std::vector<ExprPtr> args;
      if (!peek(")")) {
        do {
          args.push_back(expression());
        } while (accept(","));
      }
      expect(")");
      if (auto op = reduce_op_from_name(name); op && args.size() == 2 && args[0]->as<Variable>())
        return make_reduction(*op, args[0]->as<Variable>()->name, args[1]);
      return make_call(std::move(name), std::move(args));
    }
    return make_var(std::move(name));
  }

 private:
  ExprPtr term() {
    ExprPtr e = unary();
    for (;;) {
      if (accept("*"))
        e = make_binary(BinOp::Mul, e, unary());
      else if (accept("/"))
        e = make_binary(BinOp::Div, e, unary());
      else if (accept("%"))
        e = make_binary(BinOp::Mod, e, unary());
      else
        return e;
    }
  }

  ExprPtr unary() {
    if (accept("-")) {
      ExprPtr operand = unary();
      if (const auto* i = operand->as<IntLiteral>()) return make_int(-i->value);
      return make_neg(operand);
    }
    if (accept("+")) return unary();
    return postfix();
  }

  ExprPtr number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    };
    digits();
    bool is_float = false;
    if (pos_ < text_.size() && text_[pos_] == '.') {
      is_float = true;
      ++pos_;
      digits();
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t save = pos_;
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        is_float = true;
        digits();
      } else {
        pos_ = save;
      }
    }
    std::string spelled(text_.substr(start, pos_ - start));
    if (pos_ < text_.size() && (text_[pos_] == 'f' || text_[pos_] == 'F') &&
        !(pos_ + 1 < text_.size() && is_ident_char(text_[pos_ + 1]))) {
      is_float = true;
      ++pos_;
    }
    if (pos_ < text_.size() && is_ident_start(text_[pos_])) fail("malformed number");
    if (is_float) return make_float(spelled);
    try {
      return make_int(std::stoll(spelled));
    } catch (const std::out_of_range&) {
      fail("integer literal out of range");
    }
  }

  std::string_view text_;
  std::size_t base_;
  std::size_t pos_ = 0;
};

}  // namespace

ExprPtr parse_expression(std::string_view text) {
  ExprParser p(text, 0);
  ExprPtr e = p.expression();
  if (!p.at_end()) p.fail("unexpected trailing input");
  return e;
}

// }}}

// {{{ instructions

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      auto piece = trim(s.substr(start, i - start));
      if (!piece.empty()) out.emplace_back(piece);
      start = i + 1;
    }
  }
  return out;
}

struct Annotation {
  std::optional<std::string> id;
  std::vector<std::string> deps;
  bool exhaustive = false;
  std::vector<std::string> inames;
};

Annotation parse_annotation(std::string_view body, std::size_t offset) {
  Annotation a;
  for (const auto& item : split(body, ',')) {
    auto eq = item.find('=');
    if (eq == std::string::npos) throw SyntaxError(offset, "annotation '" + item + "' lacks '='");
    std::string key(trim(std::string_view(item).substr(0, eq)));
    std::string value(trim(std::string_view(item).substr(eq + 1)));
    if (key == "id") {
      a.id = value;
    } else if (key == "dep") {
      if (!value.empty() && value.front() == '*') {
        a.exhaustive = true;
        value.erase(0, 1);
      }
      for (auto& d : split(value, ':')) a.deps.push_back(d);
    } else if (key == "inames") {
      for (auto& n : split(value, ':')) a.inames.push_back(n);
    } else {
      throw Error(Errc::UnknownAnnotationKey, "unknown annotation key '" + key + "'");
    }
  }
  return a;
}

// Position of the top-level '=' that separates assignee from rhs.
std::size_t find_assignment(std::string_view line) {
  int depth = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '(' || c == '[' || c == '{') ++depth;
    if (c == ')' || c == ']' || c == '}') --depth;
    if (depth == 0 && c == '=') {
      const char prev = i ? line[i - 1] : ' ';
      const char next = i + 1 < line.size() ? line[i + 1] : ' ';
      if (prev != '<' && prev != '>' && prev != '!' && prev != '=' && next != '=') return i;
    }
  }
  return std::string_view::npos;
}

}  // namespace

ParsedInstructions parse_instructions(std::string_view text) {
  ParsedInstructions out;
  struct Pending {
    Instruction insn;
    bool named;
  };
  std::vector<Pending> pending;
  std::size_t line_start = 0;
  while (line_start <= text.size()) {
    std::size_t nl = text.find('\n', line_start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view raw = text.substr(line_start, nl - line_start);
    const std::size_t base = line_start;
    line_start = nl + 1;

    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const std::size_t lead = static_cast<std::size_t>(line.data() - raw.data());

    if (auto def = line.find(":="); def != std::string_view::npos) {
      ExprParser head(line.substr(0, def), base + lead);
      SubstitutionRule rule;
      rule.name = head.ident();
      head.expect("(");
      if (!head.peek(")")) {
        do {
          rule.params.push_back(head.ident());
        } while (head.accept(","));
      }
      head.expect(")");
      if (!head.at_end()) head.fail("unexpected input before ':='");
      ExprParser body(line.substr(def + 2), base + lead + def + 2);
      rule.body = body.expression();
      if (!body.at_end()) body.fail("unexpected trailing input");
      if (out.rules.count(rule.name)) throw Error(Errc::DuplicateId, "rule '" + rule.name + "' defined twice");
      out.rules.emplace(rule.name, std::move(rule));
      continue;
    }

    // Split off a trailing {annotation} block.
    Annotation ann;
    std::string_view stmt = line;
    if (stmt.back() == '}') {
      auto open = stmt.rfind('{');
      if (open == std::string_view::npos) throw SyntaxError(base + lead + stmt.size() - 1, "unbalanced '}'");
      ann = parse_annotation(stmt.substr(open + 1, stmt.size() - open - 2), base + lead + open);
      stmt = trim(stmt.substr(0, open));
    }
    const std::size_t eq = find_assignment(stmt);
    if (eq == std::string_view::npos) throw SyntaxError(base + lead, "expected 'lhs = rhs' or a rule definition");

    ExprParser lhs(stmt.substr(0, eq), base + lead);
    ExprPtr assignee = lhs.postfix();
    if (!lhs.at_end()) lhs.fail("unexpected input in assignee");
    if (!assignee->as<Variable>() && !assignee->as<Subscript>())
      throw SyntaxError(base + lead, "assignee must be a name or a subscript");
    ExprParser rhs(stmt.substr(eq + 1), base + lead + eq + 1);
    ExprPtr value = rhs.expression();
    if (!rhs.at_end()) rhs.fail("unexpected trailing input");

    Instruction insn;
    insn.assignee = std::move(assignee);
    insn.rhs = std::move(value);
    insn.depends_on.insert(ann.deps.begin(), ann.deps.end());
    insn.deps_exhaustive = ann.exhaustive;
    insn.within_inames.insert(ann.inames.begin(), ann.inames.end());
    const bool named = ann.id.has_value();
    if (named) insn.id = *ann.id;
    pending.push_back({std::move(insn), named});
  }

  std::set<std::string> used;
  for (const auto& p : pending) {
    if (!p.named) continue;
    if (!used.insert(p.insn.id).second) throw Error(Errc::DuplicateId, "duplicate instruction id '" + p.insn.id + "'");
  }
  int counter = -1;
  for (auto& p : pending) {
    if (!p.named) {
      for (;;) {
        std::string cand = counter < 0 ? "insn" : "insn_" + std::to_string(counter);
        ++counter;
        if (!used.count(cand)) {
          p.insn.id = cand;
          used.insert(cand);
          break;
        }
      }
    }
    out.instructions.push_back(std::move(p.insn));
  }
  return out;
}

// }}}

// {{{ make_kernel

PolySet parse_param_set(std::string_view text) {
  std::string_view t = trim(text);
  if (t.empty()) return PolySet();
  PolySet s = (t.find('{') == std::string_view::npos) ? parse_set("{ : " + std::string(t) + " }") : parse_set(t);
  if (!s.set_vars().empty()) throw Error(Errc::InvalidKernel, "assumptions must constrain parameters only");
  return s;
}

namespace {

// min/max with a non-iname first argument are plain calls.
ExprPtr demote_reductions(const ExprPtr& e, const PolySet& domain) {
  return rewrite(e, [&](const ExprPtr& x) -> ExprPtr {
    if (const auto* r = x->as<Reduction>()) {
      if (!domain.has_set_var(r->iname) && (r->op == ReduceOp::Min || r->op == ReduceOp::Max))
        return make_call(std::string(reduce_op_name(r->op)),
                         {make_var(r->iname), demote_reductions(r->body, domain)});
    }
    return nullptr;
  });
}

}  // namespace

Kernel make_kernel(std::string_view domain_text, std::string_view insn_text, const KernelOptions& options) {
  Kernel k;
  k.name = options.name;
  k.domain = parse_set(domain_text);
  k.assumptions = parse_param_set(options.assumptions);
  for (const auto& p : k.assumptions.params())
    if (k.domain.has_set_var(p)) throw Error(Errc::NameClassMismatch, "'" + p + "' is an iname, not a parameter");

  ParsedInstructions parsed = parse_instructions(insn_text);
  for (auto& insn : parsed.instructions) {
    insn.assignee = demote_reductions(insn.assignee, k.domain);
    insn.rhs = demote_reductions(insn.rhs, k.domain);
  }
  for (auto& [_, r] : parsed.rules) r.body = demote_reductions(r.body, k.domain);
  k.instructions = std::move(parsed.instructions);
  k.rules = std::move(parsed.rules);

  // Classify names.
  std::vector<std::string> order;
  std::set<std::string> subscripted, bare, written_scalars;
  auto note = [&](const std::string& n) {
    if (std::find(order.begin(), order.end(), n) == order.end()) order.push_back(n);
  };
  auto scan = [&](const ExprPtr& e, const std::set<std::string>& formals) {
    visit(e, [&](const ExprPtr& x) {
      if (const auto* s = x->as<Subscript>()) {
        subscripted.insert(s->array);
        note(s->array);
      }
    });
    for (const auto& n : free_variables(e)) {
      if (formals.count(n) || k.domain.has_set_var(n)) continue;
      bare.insert(n);
      note(n);
    }
  };
  for (const auto& insn : k.instructions) {
    if (const auto* v = insn.assignee->as<Variable>()) {
      written_scalars.insert(v->name);
      note(v->name);
    } else {
      scan(insn.assignee, {});
    }
    scan(insn.rhs, {});
  }
  for (const auto& [_, r] : k.rules) scan(r.body, std::set<std::string>(r.params.begin(), r.params.end()));
  for (const auto& n : written_scalars) {
    if (k.domain.has_set_var(n)) throw Error(Errc::InvalidKernel, "iname '" + n + "' is assigned to");
  }
  for (const auto& n : subscripted)
    if (bare.count(n) || written_scalars.count(n))
      throw Error(Errc::AmbiguousName, "'" + n + "' is used both subscripted and bare");

  auto declared = [&](const std::string& n) -> const ArgSpec* {
    for (const auto& a : options.args)
      if (a.name == n) return &a;
    return nullptr;
  };
  std::set<std::string> have;
  auto add_arg = [&](ArgSpec a) {
    if (!have.insert(a.name).second) return;
    if (const ArgSpec* d = declared(a.name)) a = *d;
    k.args.push_back(std::move(a));
  };
  for (const auto& n : order) {
    if (subscripted.count(n)) {
      ArgSpec a;
      a.name = n;
      add_arg(std::move(a));
    } else if (written_scalars.count(n)) {
      TempVar t;
      t.name = n;
      k.temps.emplace(n, std::move(t));
    } else {
      ArgSpec a;
      a.name = n;
      a.kind = ArgSpec::Kind::Value;
      add_arg(std::move(a));
    }
  }
  for (const auto& p : k.domain.params()) {
    ArgSpec a;
    a.name = p;
    a.kind = ArgSpec::Kind::Value;
    add_arg(std::move(a));
  }
  for (const auto& p : k.assumptions.params()) {
    ArgSpec a;
    a.name = p;
    a.kind = ArgSpec::Kind::Value;
    add_arg(std::move(a));
  }
  for (const auto& a : options.args) add_arg(a);

  k = infer_dependencies(k);
  k = compute_active_inames(k);
  k = infer_shapes(k);
  ensure_valid(k);
  return k;
}

// }}}

// {{{ dump reparser

namespace {

std::vector<std::string> split_top(std::string_view s) {
  std::vector<std::string> out;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i < s.size() && (s[i] == '(' || s[i] == '[')) ++depth;
    if (i < s.size() && (s[i] == ')' || s[i] == ']')) --depth;
    if (i == s.size() || (s[i] == ',' && depth == 0)) {
      auto piece = trim(s.substr(start, i - start));
      if (!piece.empty()) out.emplace_back(piece);
      start = i + 1;
    }
  }
  return out;
}

std::vector<AffExpr> parse_tuple(std::string_view s) {
  s = trim(s);
  if (s.size() < 2 || s.front() != '(' || s.back() != ')') throw SyntaxError(0, "expected a parenthesized tuple");
  std::vector<AffExpr> out;
  for (const auto& p : split_top(s.substr(1, s.size() - 2))) out.push_back(parse_affine(p));
  return out;
}

// Returns the value after "key: " up to the next ", <known key>:" or end.
std::string field(std::string_view line, std::string_view key, const std::vector<std::string_view>& keys) {
  const std::string marker = std::string(key) + ": ";
  auto at = line.find(marker);
  if (at == std::string_view::npos) throw SyntaxError(0, "missing field '" + std::string(key) + "'");
  std::size_t start = at + marker.size();
  std::size_t end = line.size();
  for (auto k : keys) {
    auto p = line.find(", " + std::string(k) + ": ", start);
    if (p != std::string_view::npos) end = std::min(end, p);
  }
  return std::string(trim(line.substr(start, end - start)));
}

DType dtype_or_throw(const std::string& s) {
  auto t = parse_dtype(s);
  if (!t) throw SyntaxError(0, "unknown type '" + s + "'");
  return *t;
}

}  // namespace

Kernel parse_kernel_text(std::string_view dump) {
  Kernel k;
  std::string section;
  std::istringstream in{std::string(dump)};
  std::string raw;
  std::vector<std::string> insn_lines, dep_lines;
  const std::vector<std::string_view> arg_keys = {"type", "shape", "dim_tags", "scope", "base"};
  while (std::getline(in, raw)) {
    std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (line.find_first_not_of('-') == std::string_view::npos) continue;
    if (line.substr(0, 8) == "KERNEL: ") {
      k.name = std::string(line.substr(8));
      continue;
    }
    if (line.back() == ':' && line.find(' ') == std::string_view::npos) {
      section = std::string(line.substr(0, line.size() - 1));
      continue;
    }
    if (line == "SUBSTITUTION RULES:" || line == "INAME TAGS:" || line == "LOOP PRIORITY:") {
      section = std::string(line.substr(0, line.size() - 1));
      continue;
    }
    if (section == "ARGUMENTS") {
      auto colon = line.find(": ");
      ArgSpec a;
      a.name = std::string(line.substr(0, colon));
      std::string_view rest = line.substr(colon + 2);
      a.kind = rest.substr(0, 8) == "ValueArg" ? ArgSpec::Kind::Value : ArgSpec::Kind::GlobalArray;
      a.dtype = dtype_or_throw(field(line, "type", arg_keys));
      if (a.kind == ArgSpec::Kind::GlobalArray) {
        std::string shape = field(line, "shape", arg_keys);
        if (shape != "auto") a.shape = parse_tuple(shape);
        std::string tags = field(line, "dim_tags", arg_keys);
        if (tags != "auto")
          for (const auto& t : split_top(std::string_view(tags).substr(1, tags.size() - 2)))
            a.dim_tags.push_back(parse_dim_tag(t));
      }
      k.args.push_back(std::move(a));
    } else if (section == "DOMAINS") {
      k.domain = parse_set(line);
    } else if (section == "ASSUMPTIONS") {
      k.assumptions = parse_param_set(line);
    } else if (section == "TEMPORARIES") {
      TempVar t;
      t.name = std::string(line.substr(0, line.find(": ")));
      t.dtype = dtype_or_throw(field(line, "type", arg_keys));
      t.shape = parse_tuple(field(line, "shape", arg_keys));
      t.space = field(line, "scope", arg_keys) == "local" ? AddressSpace::Local : AddressSpace::Private;
      t.base_indices = parse_tuple(field(line, "base", arg_keys));
      k.temps.emplace(t.name, std::move(t));
    } else if (section == "SUBSTITUTION RULES") {
      auto parsed = parse_instructions(line);
      for (auto& [n, r] : parsed.rules) k.rules.emplace(n, std::move(r));
    } else if (section == "INAME TAGS") {
      auto colon = line.find(": ");
      k.iname_tags[std::string(line.substr(0, colon))] = parse_iname_tag(line.substr(colon + 2));
    } else if (section == "LOOP PRIORITY") {
      k.loop_priority = split(line, ',');
    } else if (section == "INSTRUCTIONS") {
      insn_lines.emplace_back(line);
    } else if (section == "DEPENDENCIES") {
      dep_lines.emplace_back(line);
    } else {
      throw SyntaxError(0, "unexpected line outside a known section: " + std::string(line));
    }
  }
  for (const auto& l : insn_lines) {
    std::string_view line = l;
    auto close = line.find(']');
    auto arrow = line.find(" <- ");
    auto hash = line.rfind("   # ");
    if (line.front() != '[' || close == std::string_view::npos || arrow == std::string_view::npos ||
        hash == std::string_view::npos)
      throw SyntaxError(0, "malformed instruction line: " + l);
    Instruction insn;
    for (const auto& n : split(line.substr(1, close - 1), ',')) insn.within_inames.insert(n);
    insn.assignee = parse_expression(line.substr(close + 1, arrow - close - 1));
    insn.rhs = demote_reductions(parse_expression(line.substr(arrow + 4, hash - arrow - 4)), k.domain);
    insn.id = std::string(trim(line.substr(hash + 5)));
    k.instructions.push_back(std::move(insn));
  }
  for (auto& [_, r] : k.rules) r.body = demote_reductions(r.body, k.domain);
  for (const auto& l : dep_lines) {
    auto colon = l.find(':');
    Instruction* insn = k.find_insn(std::string(trim(std::string_view(l).substr(0, colon))));
    if (!insn) throw SyntaxError(0, "dependencies for unknown instruction: " + l);
    std::string_view rest = trim(std::string_view(l).substr(colon + 1));
    if (!rest.empty() && rest.front() == '*') {
      insn->deps_exhaustive = true;
      rest.remove_prefix(1);
    }
    for (const auto& d : split(rest, ',')) insn->depends_on.insert(d);
  }
  return k;
}

// }}}

}  // namespace kgen
