#include "tdpkit/error.hpp"

namespace tdpkit {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
  case ErrorCode::InvalidArg: return "InvalidArg";
  case ErrorCode::OutOfBounds: return "OutOfBounds";
  case ErrorCode::DimensionMismatch: return "DimensionMismatch";
  case ErrorCode::EmptyMask: return "EmptyMask";
  case ErrorCode::NonFiniteInMask: return "NonFiniteInMask";
  case ErrorCode::BadMagic: return "BadMagic";
  case ErrorCode::TruncatedPayload: return "TruncatedPayload";
  case ErrorCode::DimOverflow: return "DimOverflow";
  case ErrorCode::IoFailure: return "IoFailure";
  case ErrorCode::EmptySet: return "EmptySet";
  case ErrorCode::TemplateMismatch: return "TemplateMismatch";
  case ErrorCode::SpecOutOfBounds: return "SpecOutOfBounds";
  case ErrorCode::UndefinedRatio: return "UndefinedRatio";
  }
  return "Unknown";
}

} // namespace tdpkit
