#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "kgen/ir.hpp"

namespace kgen {

/// Single-writer heuristic: a reader of a variable written by exactly one
/// other instruction depends on it, unless its dependency list is exhaustive.
Kernel infer_dependencies(const Kernel& k);

/// Propagates inames along dependencies to a fixed point. An instruction
/// inherits a dependency's inames except those indexing the dependency's
/// assignee (those enumerate the written data, not a shared loop).
Kernel compute_active_inames(const Kernel& k);

/// Resolves runtime dtypes. `bindings` supplies types for runtime-typed args.
Kernel infer_types(const Kernel& k, const std::map<std::string, DType>& bindings = {});

/// Shapes of auto-shaped arrays from accessed index ranges; default
/// row-major dim tags.
Kernel infer_shapes(const Kernel& k);

/// Explicit strides for auto/N<k> tags given a shape.
std::vector<DimTag> resolve_dim_tags(const std::vector<AffExpr>& shape, const std::vector<DimTag>& tags);

/// GraphViz digraph of instruction dependencies, clustered by inames.
std::string dep_graph_dot(const Kernel& k);

/// Inlines every substitution-rule call (recursively).
ExprPtr expand_rules(const Kernel& k, const ExprPtr& e);

/// Names read by an instruction (scalars and arrays, rules expanded),
/// including names in the assignee's indices.
std::set<std::string> names_read(const Kernel& k, const Instruction& insn);

/// Inames referenced by an instruction outside reduction binders.
std::set<std::string> referenced_inames(const Kernel& k, const Instruction& insn);

/// Domain of an instruction: the kernel domain (with assumptions) projected
/// onto the instruction's inames.
PolySet instruction_domain(const Kernel& k, const Instruction& insn);

/// Type of an expression given resolved argument and temporary types.
DType expression_type(const Kernel& k, const ExprPtr& e);

/// Topological order of instruction ids (source order breaks ties).
std::vector<std::string> topological_order(const Kernel& k);

}  // namespace kgen
