#include "stratdesign/error.hpp"

namespace stratdesign {

std::string_view error_name(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::ColumnNotFound: return "ColumnNotFound";
    case ErrorKind::DuplicateColumn: return "DuplicateColumn";
    case ErrorKind::TypeMismatch: return "TypeMismatch";
    case ErrorKind::MissingValues: return "MissingValues";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::DuplicateId: return "DuplicateId";
    case ErrorKind::UnknownId: return "UnknownId";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::UnknownStratum: return "UnknownStratum";
    case ErrorKind::EmptyStratumPiece: return "EmptyStratumPiece";
    case ErrorKind::LabelCollision: return "LabelCollision";
    case ErrorKind::InvalidSplit: return "InvalidSplit";
    case ErrorKind::InsufficientData: return "InsufficientData";
    case ErrorKind::DegenerateVariance: return "DegenerateVariance";
    case ErrorKind::BudgetExceedsPopulation: return "BudgetExceedsPopulation";
    case ErrorKind::BudgetBelowFloor: return "BudgetBelowFloor";
    case ErrorKind::ZeroAllocation: return "ZeroAllocation";
    case ErrorKind::StratumTooSmall: return "StratumTooSmall";
    case ErrorKind::InsufficientUnits: return "InsufficientUnits";
    case ErrorKind::AmbiguousInput: return "AmbiguousInput";
    case ErrorKind::FitDiverged: return "FitDiverged";
    case ErrorKind::SingularInformation: return "SingularInformation";
    case ErrorKind::UnknownLocation: return "UnknownLocation";
    case ErrorKind::WaveRequired: return "WaveRequired";
    case ErrorKind::SlotTypeMismatch: return "SlotTypeMismatch";
    case ErrorKind::MissingArgument: return "MissingArgument";
    case ErrorKind::LockFailed: return "LockFailed";
    case ErrorKind::IoError: return "IoError";
  }
  return "Error";
}

ErrorCategory error_category(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::AmbiguousInput:
    case ErrorKind::MissingArgument:
    case ErrorKind::InvalidArgument:
    case ErrorKind::WaveRequired:
      return ErrorCategory::Usage;
    case ErrorKind::EmptyStratumPiece:
    case ErrorKind::DegenerateVariance:
    case ErrorKind::BudgetExceedsPopulation:
    case ErrorKind::BudgetBelowFloor:
    case ErrorKind::ZeroAllocation:
    case ErrorKind::StratumTooSmall:
    case ErrorKind::InsufficientUnits:
    case ErrorKind::InsufficientData:
    case ErrorKind::FitDiverged:
    case ErrorKind::SingularInformation:
      return ErrorCategory::Infeasible;
    default:
      return ErrorCategory::Data;
  }
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(error_name(kind)) + ": " + message),
      kind_(kind),
      detail_(message) {}

}  // namespace stratdesign
