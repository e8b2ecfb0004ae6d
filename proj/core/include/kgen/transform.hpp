#pragma once

#include <map>
#include <string>
#include <vector>

#include "kgen/ir.hpp"

namespace kgen {

struct SplitSpec {
  std::string old;
  std::int64_t length = 1;
  /// Defaults: old + "_outer", old + "_inner".
  std::string outer;
  std::string inner;
};

/// old = inner + length * outer, with 0 <= inner < length.
Kernel split_iname(const Kernel& k, const SplitSpec& spec);
Kernel split_iname(const Kernel& k, const std::string& old, std::int64_t length);

Kernel tag_inames(const Kernel& k, const std::map<std::string, InameTag>& tags);
/// "i_inner:unr, i_outer:g.0" or "i_inner=unr".
Kernel tag_inames(const Kernel& k, const std::string& spec);

Kernel set_loop_priority(const Kernel& k, const std::vector<std::string>& order);

Kernel tag_array_axes(const Kernel& k, const std::string& array, const std::vector<DimTag>& tags);
/// Comma-separated dim tags, e.g. "stride:auto,sep" or "N0,N1".
Kernel tag_array_axes(const Kernel& k, const std::string& array, const std::string& tags);

/// Materializes a substitution rule into a temporary over the footprint of
/// its uses with respect to `footprint_inames`.
Kernel precompute(const Kernel& k, const std::string& rule, const std::vector<std::string>& footprint_inames,
                  AddressSpace space = AddressSpace::Private);

/// Routes instruction-level reads of `array` through a rule named
/// `<array>_fetch` and precomputes it.
Kernel add_prefetch(const Kernel& k, const std::string& array, const std::vector<std::string>& sweep_inames,
                    AddressSpace space = AddressSpace::Private);

Kernel assume(const Kernel& k, const std::string& text);
Kernel fix_parameters(const Kernel& k, const std::string& name, std::int64_t value);

}  // namespace kgen
