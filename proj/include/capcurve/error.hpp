#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace capcurve {

enum class ErrorKind {
  DomainError,
  OverflowGuard,
  InvalidDate,
  UnparseableDate,
  MissingColumn,
  DuplicateModel,
  EmptyInput,
  EmptySlice,
  InvalidKnots,
  LengthMismatch,
  NonPositiveCoefficient,
  NonPositiveSlope,
  DegenerateDesign,
  NonConvergence,
  ModelNotFound,
  MissingModel,
  GridMismatch,
  Precondition,
  HypothesisViolation,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::OverflowGuard: return "OverflowGuard";
    case ErrorKind::InvalidDate: return "InvalidDate";
    case ErrorKind::UnparseableDate: return "UnparseableDate";
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::DuplicateModel: return "DuplicateModel";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::EmptySlice: return "EmptySlice";
    case ErrorKind::InvalidKnots: return "InvalidKnots";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::NonPositiveCoefficient: return "NonPositiveCoefficient";
    case ErrorKind::NonPositiveSlope: return "NonPositiveSlope";
    case ErrorKind::DegenerateDesign: return "DegenerateDesign";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::ModelNotFound: return "ModelNotFound";
    case ErrorKind::MissingModel: return "MissingModel";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::Precondition: return "Precondition";
    case ErrorKind::HypothesisViolation: return "HypothesisViolation";
  }
  return "Unknown";
}

/// Every library failure carries a machine-readable kind; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), detail_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) throw Error(kind, message);
}

}  // namespace capcurve
