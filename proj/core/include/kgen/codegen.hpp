#pragma once

#include <map>
#include <string>

#include "kgen/schedule.hpp"

namespace kgen {

/// OpenCL C source for a scheduled kernel. `bindings` supplies dtypes for
/// arguments left at runtime type.
std::string generate_code(const ScheduledKernel& s, const std::map<std::string, DType>& bindings = {});

/// OpenCL C type name: "float", "double", "int", "long".
std::string_view c_type_name(DType t);

}  // namespace kgen
