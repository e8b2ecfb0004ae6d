#pragma once

// Kernel data model. Kernels are values: transformations copy and return.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "kgen/expr.hpp"
#include "kgen/polyset.hpp"

namespace kgen {

enum class DType { I32, I64, F32, F64, Runtime };

/// "int32", "float32", ..., "<runtime>".
std::string_view dtype_name(DType t);
/// Accepts "f32"/"float32"/"float", "i32"/"int32"/"int", and the 64-bit forms.
std::optional<DType> parse_dtype(std::string_view s);
bool is_float(DType t);
/// Lattice join i32 < i64 < f32 < f64.
DType join(DType a, DType b);

struct DimTag {
  enum class Kind { Stride, Vec, Sep };
  Kind kind = Kind::Stride;
  /// Stride expression; nullopt while unresolved ("auto").
  std::optional<AffExpr> stride;
  /// For auto strides: rank in fastest-first order requested with "N<k>";
  /// -1 means plain row-major.
  int order = -1;
  /// Vector width for Vec.
  int width = 0;

  static DimTag stride_of(AffExpr s) { return {Kind::Stride, std::move(s), -1, 0}; }
  static DimTag auto_stride(int order = -1) { return {Kind::Stride, std::nullopt, order, 0}; }
  static DimTag vec(int w = 0) { return {Kind::Vec, std::nullopt, -1, w}; }
  static DimTag sep() { return {Kind::Sep, std::nullopt, -1, 0}; }

  std::string to_string() const;
  friend bool operator==(const DimTag& a, const DimTag& b) {
    return a.kind == b.kind && a.stride == b.stride && a.order == b.order && a.width == b.width;
  }
};

/// Parses "stride:<expr>", "stride:auto", "c", "N<k>", "vec", "sep".
DimTag parse_dim_tag(std::string_view text);

struct ArgSpec {
  enum class Kind { GlobalArray, Value };
  std::string name;
  Kind kind = Kind::GlobalArray;
  DType dtype = DType::Runtime;
  /// nullopt until inferred or declared.
  std::optional<std::vector<AffExpr>> shape;
  /// Empty until inferred or declared.
  std::vector<DimTag> dim_tags;
};

enum class AddressSpace { Private, Local };

struct TempVar {
  std::string name;
  DType dtype = DType::Runtime;
  std::vector<AffExpr> shape;  // empty for scalars
  AddressSpace space = AddressSpace::Private;
  std::vector<AffExpr> base_indices;
};

struct InameTag {
  enum class Kind { None, Unroll, ILP, Vec, Group, Local };
  Kind kind = Kind::None;
  int axis = 0;

  bool is_parallel() const { return kind == Kind::Group || kind == Kind::Local; }
  /// "unr", "ilp", "vec", "g.0", "l.1", or "" for None.
  std::string to_string() const;
  friend bool operator==(const InameTag& a, const InameTag& b) {
    return a.kind == b.kind && (!a.is_parallel() || a.axis == b.axis);
  }
};

InameTag parse_iname_tag(std::string_view text);

struct Instruction {
  std::string id;
  ExprPtr assignee;  // Variable or Subscript
  ExprPtr rhs;
  std::set<std::string> depends_on;
  bool deps_exhaustive = false;
  std::set<std::string> within_inames;
  /// Dependencies added by the single-writer heuristic (subset of depends_on).
  std::set<std::string> heuristic_deps;

  const std::string& target() const { return assignee_name(assignee); }
};

struct SubstitutionRule {
  std::string name;
  std::vector<std::string> params;
  ExprPtr body;
};

struct Kernel {
  std::string name = "loopy_kernel";
  PolySet domain;
  PolySet assumptions;
  std::vector<Instruction> instructions;
  std::map<std::string, SubstitutionRule> rules;
  std::vector<ArgSpec> args;
  std::map<std::string, TempVar> temps;
  std::map<std::string, InameTag> iname_tags;
  std::vector<std::string> loop_priority;

  const ArgSpec* find_arg(const std::string& name) const;
  ArgSpec* find_arg(const std::string& name);
  const Instruction* find_insn(const std::string& id) const;
  Instruction* find_insn(const std::string& id);
  bool is_iname(const std::string& name) const { return domain.has_set_var(name); }
  InameTag tag_of(const std::string& iname) const;
  /// Arguments that are Value args, in declaration order.
  std::vector<std::string> value_args() const;
  /// Domain intersected with assumptions.
  PolySet full_domain() const;
  /// All inames an instruction iterates: within_inames plus reduction binders.
  std::set<std::string> all_inames_of(const Instruction& insn) const;
};

struct Diagnostic {
  Errc code;
  std::string subject;  // instruction id or other source name
  std::string message;
};

std::vector<Diagnostic> validate(const Kernel& k);

/// Throws an Error carrying every diagnostic when validation fails.
void ensure_valid(const Kernel& k);

/// Plain-text dump starting with "KERNEL: <name>".
std::string kernel_to_text(const Kernel& k);

}  // namespace kgen
