#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hnal {

enum class ErrorCode {
  ParseError,
  SchemaError,
  DanglingPair,
  ZeroVector,
  DimensionMismatch,
  KOutOfRange,
  TooFewPairs,
  KExceedsCandidates,
  MissingThreshold,
  EmptyInput,
  TooFewPoints,
  EmptyCovered,
  BatchTooSmall,
  NonFiniteLoss,
  MissingOracleMatch,
  MissingK,
  UnknownId,
  AnnotationMismatch,
  BudgetExhausted,
  IoError,
  VersionMismatch,
  EpochInProgress,
  UnknownTask,
  AlreadySubmitted,
  BadVectorDim,
  EpochIncomplete,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace hnal
