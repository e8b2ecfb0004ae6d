#pragma once

// Expression trees for instruction right-hand sides, assignees and rules.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "kgen/polyset.hpp"

namespace kgen {

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

enum class BinOp { Add, Sub, Mul, Div, Mod };
enum class ReduceOp { Sum, Product, Min, Max };

std::string_view reduce_op_name(ReduceOp op);
std::optional<ReduceOp> reduce_op_from_name(std::string_view name);

struct Variable {
  std::string name;
};
struct IntLiteral {
  std::int64_t value;
};
struct FloatLiteral {
  std::string text;  // exact source spelling, e.g. "2.5"
  double value;
};
struct Negate {
  ExprPtr operand;
};
struct Binary {
  BinOp op;
  ExprPtr lhs, rhs;
};
struct Call {
  std::string function;
  std::vector<ExprPtr> args;
};
struct Reduction {
  ReduceOp op;
  std::string iname;
  ExprPtr body;
};
struct Subscript {
  std::string array;
  std::vector<ExprPtr> index;
};

struct Expr {
  std::variant<Variable, IntLiteral, FloatLiteral, Negate, Binary, Call, Reduction, Subscript> node;

  template <class T>
  const T* as() const {
    return std::get_if<T>(&node);
  }
};

ExprPtr make_var(std::string name);
ExprPtr make_int(std::int64_t v);
ExprPtr make_float(std::string text);
ExprPtr make_neg(ExprPtr e);
ExprPtr make_binary(BinOp op, ExprPtr lhs, ExprPtr rhs);
ExprPtr make_call(std::string fn, std::vector<ExprPtr> args);
ExprPtr make_reduction(ReduceOp op, std::string iname, ExprPtr body);
ExprPtr make_subscript(std::string array, std::vector<ExprPtr> index);
/// Builds an expression tree for an affine form: constant first, then terms.
ExprPtr affine_to_expr(const AffExpr& e);

bool expr_equal(const ExprPtr& a, const ExprPtr& b);

/// Dump style: "2*a[i]", "out[ii, jj]", "sum(k, a[i, k]*b[k, j])".
std::string to_text(const ExprPtr& e);

/// Affine form of `e` if it is one (names as variables).
std::optional<AffExpr> to_affine(const ExprPtr& e);

/// Rebuilds `e` bottom-up; `fn` may replace any node (return nullptr to keep
/// recursing). Reduction binders shadow `Variable` names given in `bound`.
ExprPtr rewrite(const ExprPtr& e, const std::function<ExprPtr(const ExprPtr&)>& fn);

/// Replaces free occurrences of variables.
ExprPtr substitute(const ExprPtr& e, const std::map<std::string, ExprPtr>& values);

/// Visits every node in pre-order.
void visit(const ExprPtr& e, const std::function<void(const ExprPtr&)>& fn);

/// Free variable names (reduction binders excluded), including those used in
/// subscript indices.
std::set<std::string> free_variables(const ExprPtr& e);

/// Names of reduction binders occurring in `e`.
std::set<std::string> reduction_inames(const ExprPtr& e);

/// Every subscript in `e` (pre-order).
std::vector<const Subscript*> subscripts(const ExprPtr& e);

/// Name written by an assignee (Variable or Subscript).
const std::string& assignee_name(const ExprPtr& assignee);

}  // namespace kgen
