#pragma once

#include <stdexcept>
#include <string>

namespace polyray {

enum class ErrorKind {
  InvalidPolynomial,
  Parse,
  Overflow,
  RootFinding,
  Precision,
  InsufficientDepth,
  CrashUnresolved,
  NotDisconnected,
  NoBoundedCritical,
  PeriodBudgetExceeded,
  ModelMismatch,
  Domain,
  CriticalLevel,
  TheoremViolation,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidPolynomial: return "InvalidPolynomial";
    case ErrorKind::Parse: return "Parse";
    case ErrorKind::Overflow: return "Overflow";
    case ErrorKind::RootFinding: return "RootFinding";
    case ErrorKind::Precision: return "Precision";
    case ErrorKind::InsufficientDepth: return "InsufficientDepth";
    case ErrorKind::CrashUnresolved: return "CrashUnresolved";
    case ErrorKind::NotDisconnected: return "NotDisconnected";
    case ErrorKind::NoBoundedCritical: return "NoBoundedCritical";
    case ErrorKind::PeriodBudgetExceeded: return "PeriodBudgetExceeded";
    case ErrorKind::ModelMismatch: return "ModelMismatch";
    case ErrorKind::Domain: return "Domain";
    case ErrorKind::CriticalLevel: return "CriticalLevel";
    case ErrorKind::TheoremViolation: return "TheoremViolation";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a kind so callers (the CLI in
/// particular) can map it onto an exit status without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace polyray
