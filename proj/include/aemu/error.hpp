#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aemu {

enum class ErrorCode {
  kInvalidValue,
  kOverflowValue,
  kMissingColumn,
  kUnknownColumn,
  kOrderMismatch,
  kEmptyDataset,
  kNonFiniteValue,
  kSchemaHashMismatch,
  kSpaceMismatch,
  kRowCountMismatch,
  kDimensionMismatch,
  kInvalidDims,
  kCorruptCheckpoint,
  kVersionMismatch,
  kNonFiniteGradient,
  kNumericalFailure,
  kInvalidInput,
  kInvalidConfig,
  kEmptyRequest,
  kIo,
  kUsage,
};

/// Coarse grouping used by the command-line tool to choose an exit code.
enum class ErrorCategory { kUsage, kData, kNumerical };

std::string_view to_string(ErrorCode code);
ErrorCategory category(ErrorCode code);

/// Single exception type for the library. `subject()` carries the offending
/// column name, layer index, or row index when one applies.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string subject = {});

  ErrorCode code() const noexcept { return code_; }
  const std::string& subject() const noexcept { return subject_; }

 private:
  ErrorCode code_;
  std::string subject_;
};

}  // namespace aemu
