#include "aemu/error.hpp"

namespace aemu {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidValue: return "InvalidValue";
    case ErrorCode::kOverflowValue: return "OverflowValue";
    case ErrorCode::kMissingColumn: return "MissingColumn";
    case ErrorCode::kUnknownColumn: return "UnknownColumn";
    case ErrorCode::kOrderMismatch: return "OrderMismatch";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kNonFiniteValue: return "NonFiniteValue";
    case ErrorCode::kSchemaHashMismatch: return "SchemaHashMismatch";
    case ErrorCode::kSpaceMismatch: return "SpaceMismatch";
    case ErrorCode::kRowCountMismatch: return "RowCountMismatch";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kInvalidDims: return "InvalidDims";
    case ErrorCode::kCorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kNonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::kNumericalFailure: return "NumericalFailure";
    case ErrorCode::kInvalidInput: return "InvalidInput";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kEmptyRequest: return "EmptyRequest";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kUsage: return "Usage";
  }
  return "Unknown";
}

ErrorCategory category(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUsage:
    case ErrorCode::kInvalidConfig:
    case ErrorCode::kEmptyRequest:
      return ErrorCategory::kUsage;
    case ErrorCode::kNonFiniteGradient:
    case ErrorCode::kNumericalFailure:
    case ErrorCode::kOverflowValue:
      return ErrorCategory::kNumerical;
    default:
      return ErrorCategory::kData;
  }
}

Error::Error(ErrorCode code, std::string message, std::string subject)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      subject_(std::move(subject)) {}

}  // namespace aemu
