#include "kgen/expr.hpp"

#include <sstream>

namespace kgen {

std::string_view reduce_op_name(ReduceOp op) {
  switch (op) {
    case ReduceOp::Sum: return "sum";
    case ReduceOp::Product: return "product";
    case ReduceOp::Min: return "min";
    case ReduceOp::Max: return "max";
  }
  return "sum";
}

std::optional<ReduceOp> reduce_op_from_name(std::string_view name) {
  if (name == "sum") return ReduceOp::Sum;
  if (name == "product") return ReduceOp::Product;
  if (name == "min") return ReduceOp::Min;
  if (name == "max") return ReduceOp::Max;
  return std::nullopt;
}

ExprPtr make_var(std::string name) { return std::make_shared<Expr>(Expr{Variable{std::move(name)}}); }
ExprPtr make_int(std::int64_t v) { return std::make_shared<Expr>(Expr{IntLiteral{v}}); }
ExprPtr make_float(std::string text) {
  double v = std::stod(text);
  return std::make_shared<Expr>(Expr{FloatLiteral{std::move(text), v}});
}
ExprPtr make_neg(ExprPtr e) { return std::make_shared<Expr>(Expr{Negate{std::move(e)}}); }
ExprPtr make_binary(BinOp op, ExprPtr lhs, ExprPtr rhs) {
  return std::make_shared<Expr>(Expr{Binary{op, std::move(lhs), std::move(rhs)}});
}
ExprPtr make_call(std::string fn, std::vector<ExprPtr> args) {
  return std::make_shared<Expr>(Expr{Call{std::move(fn), std::move(args)}});
}
ExprPtr make_reduction(ReduceOp op, std::string iname, ExprPtr body) {
  return std::make_shared<Expr>(Expr{Reduction{op, std::move(iname), std::move(body)}});
}
ExprPtr make_subscript(std::string array, std::vector<ExprPtr> index) {
  return std::make_shared<Expr>(Expr{Subscript{std::move(array), std::move(index)}});
}

ExprPtr affine_to_expr(const AffExpr& e) {
  ExprPtr r;
  if (e.constant() != 0 || e.is_constant()) r = make_int(to_i64(e.constant()));
  for (const auto& [name, c] : e.coefficients()) {
    const std::int64_t k = to_i64(c);
    ExprPtr term = make_var(name);
    const std::int64_t mag = k < 0 ? -k : k;
    if (mag != 1) term = make_binary(BinOp::Mul, term, make_int(mag));
    if (!r)
      r = k < 0 ? make_neg(term) : term;
    else
      r = make_binary(k < 0 ? BinOp::Sub : BinOp::Add, r, term);
  }
  return r;
}

bool expr_equal(const ExprPtr& a, const ExprPtr& b) {
  if (a == b) return true;
  if (!a || !b || a->node.index() != b->node.index()) return false;
  auto list_equal = [](const std::vector<ExprPtr>& x, const std::vector<ExprPtr>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (!expr_equal(x[i], y[i])) return false;
    return true;
  };
  return std::visit(
      [&](const auto& n) -> bool {
        using T = std::decay_t<decltype(n)>;
        const T& m = std::get<T>(b->node);
        if constexpr (std::is_same_v<T, Variable>) return n.name == m.name;
        if constexpr (std::is_same_v<T, IntLiteral>) return n.value == m.value;
        if constexpr (std::is_same_v<T, FloatLiteral>) return n.text == m.text;
        if constexpr (std::is_same_v<T, Negate>) return expr_equal(n.operand, m.operand);
        if constexpr (std::is_same_v<T, Binary>)
          return n.op == m.op && expr_equal(n.lhs, m.lhs) && expr_equal(n.rhs, m.rhs);
        if constexpr (std::is_same_v<T, Call>) return n.function == m.function && list_equal(n.args, m.args);
        if constexpr (std::is_same_v<T, Reduction>)
          return n.op == m.op && n.iname == m.iname && expr_equal(n.body, m.body);
        if constexpr (std::is_same_v<T, Subscript>) return n.array == m.array && list_equal(n.index, m.index);
        return false;
      },
      a->node);
}

namespace {

int precedence(const ExprPtr& e) {
  if (const auto* b = e->as<Binary>()) return (b->op == BinOp::Add || b->op == BinOp::Sub) ? 1 : 2;
  if (e->as<Negate>()) return 3;
  if (const auto* i = e->as<IntLiteral>()) return i->value < 0 ? 3 : 4;
  return 4;
}

void print(std::ostream& os, const ExprPtr& e);

void print_wrapped(std::ostream& os, const ExprPtr& e, bool wrap) {
  if (wrap) os << "(";
  print(os, e);
  if (wrap) os << ")";
}

void print_list(std::ostream& os, const std::vector<ExprPtr>& xs) {
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) os << ", ";
    print(os, xs[i]);
  }
}

void print(std::ostream& os, const ExprPtr& e) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Variable>) {
          os << n.name;
        } else if constexpr (std::is_same_v<T, IntLiteral>) {
          os << n.value;
        } else if constexpr (std::is_same_v<T, FloatLiteral>) {
          os << n.text;
        } else if constexpr (std::is_same_v<T, Negate>) {
          os << "-";
          print_wrapped(os, n.operand, precedence(n.operand) < 3);
        } else if constexpr (std::is_same_v<T, Binary>) {
          const int p = precedence(e);
          print_wrapped(os, n.lhs, precedence(n.lhs) < p);
          switch (n.op) {
            case BinOp::Add: os << " + "; break;
            case BinOp::Sub: os << " - "; break;
            case BinOp::Mul: os << "*"; break;
            case BinOp::Div: os << " / "; break;
            case BinOp::Mod: os << " % "; break;
          }
          print_wrapped(os, n.rhs, precedence(n.rhs) <= p);
        } else if constexpr (std::is_same_v<T, Call>) {
          os << n.function << "(";
          print_list(os, n.args);
          os << ")";
        } else if constexpr (std::is_same_v<T, Reduction>) {
          os << reduce_op_name(n.op) << "(" << n.iname << ", ";
          print(os, n.body);
          os << ")";
        } else if constexpr (std::is_same_v<T, Subscript>) {
          os << n.array << "[";
          print_list(os, n.index);
          os << "]";
        }
      },
      e->node);
}

}  // namespace

std::string to_text(const ExprPtr& e) {
  std::ostringstream os;
  print(os, e);
  return os.str();
}

std::optional<AffExpr> to_affine(const ExprPtr& e) {
  if (const auto* v = e->as<Variable>()) return AffExpr::variable(v->name);
  if (const auto* i = e->as<IntLiteral>()) return AffExpr(Int(i->value));
  if (const auto* n = e->as<Negate>()) {
    auto a = to_affine(n->operand);
    if (!a) return std::nullopt;
    return -*a;
  }
  if (const auto* b = e->as<Binary>()) {
    auto l = to_affine(b->lhs);
    if (!l) return std::nullopt;
    auto r = to_affine(b->rhs);
    if (!r) return std::nullopt;
    switch (b->op) {
      case BinOp::Add: return *l + *r;
      case BinOp::Sub: return *l - *r;
      case BinOp::Mul:
        if (l->is_constant()) return *r * l->constant();
        if (r->is_constant()) return *l * r->constant();
        return std::nullopt;
      default: return std::nullopt;
    }
  }
  return std::nullopt;
}

ExprPtr rewrite(const ExprPtr& e, const std::function<ExprPtr(const ExprPtr&)>& fn) {
  if (ExprPtr r = fn(e)) return r;
  return std::visit(
      [&](const auto& n) -> ExprPtr {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Negate>) {
          return make_neg(rewrite(n.operand, fn));
        } else if constexpr (std::is_same_v<T, Binary>) {
          return make_binary(n.op, rewrite(n.lhs, fn), rewrite(n.rhs, fn));
        } else if constexpr (std::is_same_v<T, Call>) {
          std::vector<ExprPtr> args;
          for (const auto& a : n.args) args.push_back(rewrite(a, fn));
          return make_call(n.function, std::move(args));
        } else if constexpr (std::is_same_v<T, Reduction>) {
          return make_reduction(n.op, n.iname, rewrite(n.body, fn));
        } else if constexpr (std::is_same_v<T, Subscript>) {
          std::vector<ExprPtr> idx;
          for (const auto& a : n.index) idx.push_back(rewrite(a, fn));
          return make_subscript(n.array, std::move(idx));
        } else {
          return e;
        }
      },
      e->node);
}

ExprPtr substitute(const ExprPtr& e, const std::map<std::string, ExprPtr>& values) {
  if (values.empty()) return e;
  std::function<ExprPtr(const ExprPtr&)> fn = [&](const ExprPtr& x) -> ExprPtr {
    if (const auto* v = x->as<Variable>()) {
      auto it = values.find(v->name);
      return it == values.end() ? x : it->second;
    }
    if (const auto* r = x->as<Reduction>()) {
      if (values.count(r->iname)) {
        auto inner = values;
        inner.erase(r->iname);
        return make_reduction(r->op, r->iname, substitute(r->body, inner));
      }
    }
    return nullptr;
  };
  return rewrite(e, fn);
}

void visit(const ExprPtr& e, const std::function<void(const ExprPtr&)>& fn) {
  fn(e);
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Negate>) {
          visit(n.operand, fn);
        } else if constexpr (std::is_same_v<T, Binary>) {
          visit(n.lhs, fn);
          visit(n.rhs, fn);
        } else if constexpr (std::is_same_v<T, Call>) {
          for (const auto& a : n.args) visit(a, fn);
        } else if constexpr (std::is_same_v<T, Reduction>) {
          visit(n.body, fn);
        } else if constexpr (std::is_same_v<T, Subscript>) {
          for (const auto& a : n.index) visit(a, fn);
        }
      },
      e->node);
}

namespace {

void collect_free(const ExprPtr& e, std::set<std::string>& bound, std::set<std::string>& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Variable>) {
          if (!bound.count(n.name)) out.insert(n.name);
        } else if constexpr (std::is_same_v<T, Negate>) {
          collect_free(n.operand, bound, out);
        } else if constexpr (std::is_same_v<T, Binary>) {
          collect_free(n.lhs, bound, out);
          collect_free(n.rhs, bound, out);
        } else if constexpr (std::is_same_v<T, Call>) {
          for (const auto& a : n.args) collect_free(a, bound, out);
        } else if constexpr (std::is_same_v<T, Reduction>) {
          const bool fresh = bound.insert(n.iname).second;
          collect_free(n.body, bound, out);
          if (fresh) bound.erase(n.iname);
        } else if constexpr (std::is_same_v<T, Subscript>) {
          for (const auto& a : n.index) collect_free(a, bound, out);
        }
      },
      e->node);
}

}  // namespace

std::set<std::string> free_variables(const ExprPtr& e) {
  std::set<std::string> bound, out;
  collect_free(e, bound, out);
  return out;
}

std::set<std::string> reduction_inames(const ExprPtr& e) {
  std::set<std::string> out;
  visit(e, [&](const ExprPtr& x) {
    if (const auto* r = x->as<Reduction>()) out.insert(r->iname);
  });
  return out;
}

std::vector<const Subscript*> subscripts(const ExprPtr& e) {
  std::vector<const Subscript*> out;
  visit(e, [&](const ExprPtr& x) {
    if (const auto* s = x->as<Subscript>()) out.push_back(s);
  });
  return out;
}

const std::string& assignee_name(const ExprPtr& assignee) {
  if (const auto* s = assignee->as<Subscript>()) return s->array;
  if (const auto* v = assignee->as<Variable>()) return v->name;
  throw Error(Errc::InvalidKernel, "assignee must be a variable or subscript: " + to_text(assignee));
}

}  // namespace kgen
