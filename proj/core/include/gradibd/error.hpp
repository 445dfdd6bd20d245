#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gradibd {

enum class ErrorCode {
  EmptyCode,
  ShortCode,
  ParseError,
  InvariantViolation,
  ConfigError,
  TooFewRecords,
  ShapeMismatch,
  NonFiniteGradient,
  NonFiniteLoss,
  EmptyInput,
  NotScalar,
  EmptyIncoming,
  SingleClass,
  NoPositives,
  EmptyTestSet,
  IoError,
  FormatError,
  UnknownCommand,
  MissingFlag,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Validation errors are caused by bad input (exit code 1 at the CLI); the
/// rest are runtime failures (exit code 2).
bool is_validation_error(ErrorCode code) noexcept;

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

}  // namespace gradibd
