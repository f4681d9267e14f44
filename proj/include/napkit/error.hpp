#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace napkit {

enum class ErrorKind {
  // configuration / argument errors
  InvalidArgument,
  ParseError,
  ValidationError,
  ConfigInfeasible,
  DimensionMismatch,
  ResolutionMismatch,
  // data errors
  IoError,
  EmptyImage,
  EmptyPool,
  EmptyBatch,
  ZeroBrightness,
  InsufficientSources,
  TooDarkAfterRetries,
  BackgroundNotUndistorted,
  NoStopBoxes,
  DegenerateBox,
  BoxTooSmall,
  TooSmall,
  NonConvergence,
  NonFiniteGradient,
  InsufficientData,
  Unreachable,
  ProtocolError,
  // capability
  NoGradientSupport,
  // report precondition
  MissingCleanBaseline,
};

/// Coarse failure class; doubles as the CLI exit code.
enum class ErrorCategory : int {
  Config = 2,
  Data = 3,
  Capability = 4,
  Precondition = 5,
};

std::string_view to_string(ErrorKind kind) noexcept;
ErrorCategory category_of(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  ErrorCategory category() const noexcept { return category_of(kind_); }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace napkit
