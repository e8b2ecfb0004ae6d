#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "kgen/ir.hpp"

namespace kgen {

/// Infix expression grammar: + - (lowest), * / %, unary -, then
/// call/subscript/parentheses. `sum(k, ...)` and friends become reductions.
ExprPtr parse_expression(std::string_view text);

struct ParsedInstructions {
  std::vector<Instruction> instructions;
  std::map<std::string, SubstitutionRule> rules;
};

/// One statement per line: `lhs = rhs {annotations}` or `f(x) := body`.
/// Blank lines and lines starting with '#' are skipped.
ParsedInstructions parse_instructions(std::string_view text);

struct KernelOptions {
  std::string name = "loopy_kernel";
  /// Parameter-only set; bare conditions such as "n > 0" are accepted.
  std::string assumptions;
  /// Declarations overriding the inferred defaults, matched by name.
  std::vector<ArgSpec> args;
};

/// Parses and analyses a kernel: argument defaults, dependencies, active
/// inames and array shapes.
Kernel make_kernel(std::string_view domain, std::string_view instructions, const KernelOptions& options = {});

/// Parses a parameter-only set, wrapping bare conditions in "{ : ... }".
PolySet parse_param_set(std::string_view text);

/// Rebuilds a kernel from kernel_to_text output. No analysis is rerun.
Kernel parse_kernel_text(std::string_view dump);

}  // namespace kgen
