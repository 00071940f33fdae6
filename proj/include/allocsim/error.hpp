#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace allocsim {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  NoEvents,
  SingularHessian,
  NonConvergence,
  EmptyBaseline,
  NoComparablePairs,
  SingleClass,
  TooLarge,
  SchemaMismatch,
  EventOutOfRange,
  ParseError,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace allocsim
