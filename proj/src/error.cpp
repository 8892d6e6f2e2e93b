#include "hnal/error.hpp"

namespace hnal {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::DanglingPair: return "DanglingPair";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::KOutOfRange: return "KOutOfRange";
    case ErrorCode::TooFewPairs: return "TooFewPairs";
    case ErrorCode::KExceedsCandidates: return "KExceedsCandidates";
    case ErrorCode::MissingThreshold: return "MissingThreshold";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::EmptyCovered: return "EmptyCovered";
    case ErrorCode::BatchTooSmall: return "BatchTooSmall";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::MissingOracleMatch: return "MissingOracleMatch";
    case ErrorCode::MissingK: return "MissingK";
    case ErrorCode::UnknownId: return "UnknownId";
    case ErrorCode::AnnotationMismatch: return "AnnotationMismatch";
    case ErrorCode::BudgetExhausted: return "BudgetExhausted";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::EpochInProgress: return "EpochInProgress";
    case ErrorCode::UnknownTask: return "UnknownTask";
    case ErrorCode::AlreadySubmitted: return "AlreadySubmitted";
    case ErrorCode::BadVectorDim: return "BadVectorDim";
    case ErrorCode::EpochIncomplete: return "EpochIncomplete";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace hnal
