#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stratdesign {

enum class ErrorKind {
  // input and data shape
  ColumnNotFound,
  DuplicateColumn,
  TypeMismatch,
  MissingValues,
  ParseError,
  DuplicateId,
  UnknownId,
  ShapeMismatch,
  InvalidArgument,
  EmptyInput,
  // stratum manipulation
  UnknownStratum,
  EmptyStratumPiece,
  LabelCollision,
  InvalidSplit,
  // allocation feasibility
  InsufficientData,
  DegenerateVariance,
  BudgetExceedsPopulation,
  BudgetBelowFloor,
  ZeroAllocation,
  StratumTooSmall,
  InsufficientUnits,
  AmbiguousInput,
  // model fitting
  FitDiverged,
  SingularInformation,
  // workflow store
  UnknownLocation,
  WaveRequired,
  SlotTypeMismatch,
  MissingArgument,
  LockFailed,
  IoError,
};

/// Broad class of an error, used for CLI exit codes and HTTP statuses.
enum class ErrorCategory { Usage, Data, Infeasible };

std::string_view error_name(ErrorKind kind) noexcept;
ErrorCategory error_category(ErrorKind kind) noexcept;

/// The single exception type thrown by the library. `what()` reads
/// "<Kind>: <message>" so diagnostics stay one line.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace stratdesign
