#include "gradibd/error.hpp"

namespace gradibd {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyCode: return "EmptyCode";
    case ErrorCode::ShortCode: return "ShortCode";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::TooFewRecords: return "TooFewRecords";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NotScalar: return "NotScalar";
    case ErrorCode::EmptyIncoming: return "EmptyIncoming";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::NoPositives: return "NoPositives";
    case ErrorCode::EmptyTestSet: return "EmptyTestSet";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::UnknownCommand: return "UnknownCommand";
    case ErrorCode::MissingFlag: return "MissingFlag";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyCode:
    case ErrorCode::ShortCode:
    case ErrorCode::ParseError:
    case ErrorCode::InvariantViolation:
    case ErrorCode::ConfigError:
    case ErrorCode::TooFewRecords:
    case ErrorCode::FormatError:
    case ErrorCode::UnknownCommand:
    case ErrorCode::MissingFlag:
      return true;
    default:
      return false;
  }
}

}  // namespace gradibd
