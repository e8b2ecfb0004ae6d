#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kgen {

enum class Errc {
  Syntax,
  NonAffine,
  NameClassMismatch,
  Unbounded,
  UnknownIname,
  UnknownParameter,
  UnknownRule,
  UnknownArray,
  NameCollision,
  DuplicateId,
  UnknownAnnotationKey,
  AmbiguousName,
  InvalidKernel,
  TypeConflict,
  Untypeable,
  NonAffineIndex,
  NonConstantTripCount,
  AxisConflict,
  RankMismatch,
  IllegalVecWidth,
  NonAffineFootprint,
  SchedulingDeadlock,
  BarrierInsideIllegalContext,
  UnsupportedVecShape,
  OutOfBounds,
  UnboundParameter,
  DivisionByZero,
  UninitializedRead,
  Usage,
};

std::string_view errc_name(Errc code);

/// Every failure raised by the library. `code()` identifies the failure class
/// so callers (and tests) can dispatch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Parse failure with the byte offset where the parser gave up.
class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t offset, const std::string& message)
      : Error(Errc::Syntax, "at offset " + std::to_string(offset) + ": " + message),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace kgen
