#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace quenchlab {

enum class ErrorKind {
  InvalidArgument,
  NonHermitian,
  DecompositionFailure,
  DimensionCap,
  OrderCap,
  IdentityMismatch,
  NonlinearFamily,
  DegenerateGround,
  GridTooShort,
  FitWindowTooNarrow,
  NoContinuum,
  AliasingDetected,
  DivergentMGF,
  NonConcaveInput,
  InsufficientCurves,
  WindowTooShort,
  ConfigInvalid,
  IoError,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries a kind so callers (the CLI in
/// particular) can map it onto exit codes without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NonHermitian: return "NonHermitian";
    case ErrorKind::DecompositionFailure: return "DecompositionFailure";
    case ErrorKind::DimensionCap: return "DimensionCap";
    case ErrorKind::OrderCap: return "OrderCap";
    case ErrorKind::IdentityMismatch: return "IdentityMismatch";
    case ErrorKind::NonlinearFamily: return "NonlinearFamily";
    case ErrorKind::DegenerateGround: return "DegenerateGround";
    case ErrorKind::GridTooShort: return "GridTooShort";
    case ErrorKind::FitWindowTooNarrow: return "FitWindowTooNarrow";
    case ErrorKind::NoContinuum: return "NoContinuum";
    case ErrorKind::AliasingDetected: return "AliasingDetected";
    case ErrorKind::DivergentMGF: return "DivergentMGF";
    case ErrorKind::NonConcaveInput: return "NonConcaveInput";
    case ErrorKind::InsufficientCurves: return "InsufficientCurves";
    case ErrorKind::WindowTooShort: return "WindowTooShort";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace quenchlab
