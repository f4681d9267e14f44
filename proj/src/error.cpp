#include "napkit/error.hpp"

namespace napkit {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ValidationError: return "ValidationError";
    case ErrorKind::ConfigInfeasible: return "ConfigInfeasible";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::ResolutionMismatch: return "ResolutionMismatch";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::EmptyImage: return "EmptyImage";
    case ErrorKind::EmptyPool: return "EmptyPool";
    case ErrorKind::EmptyBatch: return "EmptyBatch";
    case ErrorKind::ZeroBrightness: return "ZeroBrightness";
    case ErrorKind::InsufficientSources: return "InsufficientSources";
    case ErrorKind::TooDarkAfterRetries: return "TooDarkAfterRetries";
    case ErrorKind::BackgroundNotUndistorted: return "BackgroundNotUndistorted";
    case ErrorKind::NoStopBoxes: return "NoStopBoxes";
    case ErrorKind::DegenerateBox: return "DegenerateBox";
    case ErrorKind::BoxTooSmall: return "BoxTooSmall";
    case ErrorKind::TooSmall: return "TooSmall";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::Unreachable: return "Unreachable";
    case ErrorKind::ProtocolError: return "ProtocolError";
    case ErrorKind::NoGradientSupport: return "NoGradientSupport";
    case ErrorKind::MissingCleanBaseline: return "MissingCleanBaseline";
  }
  return "Unknown";
}

ErrorCategory category_of(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument:
    case ErrorKind::ParseError:
    case ErrorKind::ValidationError:
    case ErrorKind::ConfigInfeasible:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::ResolutionMismatch:
      return ErrorCategory::Config;
    case ErrorKind::NoGradientSupport:
      return ErrorCategory::Capability;
    case ErrorKind::MissingCleanBaseline:
      return ErrorCategory::Precondition;
    default:
      return ErrorCategory::Data;
  }
}

}  // namespace napkit
