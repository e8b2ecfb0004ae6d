#pragma once

// Kernel files, transformation scripts and data files for the command line.

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "kgen/interp.hpp"
#include "kgen/ir.hpp"

namespace kgen {

/// Sections of a kernel file:
///
///   [name]          optional, defaults to loopy_kernel
///   [domain]
///   [instructions]
///   [assumptions]   optional
///   [transforms]    optional, one verb per line
///
/// Lines starting with '#' are comments.
struct KernelFile {
  std::string name;
  std::string domain;
  std::string instructions;
  std::string assumptions;
  std::vector<std::string> transforms;
};

KernelFile parse_kernel_file(std::string_view text);

/// Applies one transformation line, e.g. "split_iname i 16",
/// "tag_inames i_inner=unr", "add_prefetch a i_inner local".
Kernel apply_transform(const Kernel& k, std::string_view line);

/// make_kernel followed by every transform line, top to bottom.
Kernel build_kernel(const KernelFile& f);

/// "a=f32,n=i32" → bindings.
std::map<std::string, DType> parse_type_bindings(std::string_view text);

/// One entry per line: "name: dtype shape = v0 v1 ..." for arrays, where
/// shape is a comma-separated extent list, and "name: dtype = v" for scalars.
ExecState parse_data(std::string_view text);

/// Renders arrays in the parse_data format; `names` selects and orders them.
std::string data_to_text(const ExecState& st, const std::vector<std::string>& names);

}  // namespace kgen
