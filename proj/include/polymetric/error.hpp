#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace polymetric {

enum class ErrorKind {
  NonPrincipalLog,
  SingularMatrix,
  DefectiveMatrix,
  NonFinite,
  ClassTooSmall,
  EmptyTrainingSet,
  DimensionMismatch,
  ParseError,
  IoError,
  InvalidArgument,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Every failure surfaced by the library carries a kind so callers (and the
// CLI) can branch on it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), detail_(message) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }
  /// Message without the kind prefix.
  [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

inline std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::NonPrincipalLog: return "NonPrincipalLog";
    case ErrorKind::SingularMatrix: return "SingularMatrix";
    case ErrorKind::DefectiveMatrix: return "DefectiveMatrix";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::ClassTooSmall: return "ClassTooSmall";
    case ErrorKind::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace polymetric
