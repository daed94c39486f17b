#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tdpkit {

enum class ErrorCode {
  InvalidArg,
  OutOfBounds,
  DimensionMismatch,
  EmptyMask,
  NonFiniteInMask,
  BadMagic,
  TruncatedPayload,
  DimOverflow,
  IoFailure,
  EmptySet,
  TemplateMismatch,
  SpecOutOfBounds,
  UndefinedRatio,
};

std::string_view error_code_name(ErrorCode code) noexcept;

/// Library-wide exception; `code()` is what the serve API reports as `{code, message}`.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

} // namespace tdpkit
