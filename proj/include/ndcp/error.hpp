#pragma once

#include <stdexcept>
#include <string>

namespace ndcp {

/// Error categories used across the toolkit. Tests match on the code, not
/// on message text.
enum class ErrorCode {
  // dataset
  MissingColumn,
  NonBinaryLabel,
  MalformedRow,
  EmptyFile,
  DegenerateSplit,
  InfeasiblePartition,
  // forest / conformal
  EmptyDataset,
  DimensionMismatch,
  EmptyCategory,
  // aggregate / metrics
  EmptyList,
  LengthMismatch,
  Empty,
  TooFewPairs,
  UnpairedResults,
  // federation
  InvalidMessage,
  ProtocolError,
  MalformedJson,
  BindFailure,
  SourceTimeout,
  SourceError,
  // generic
  InvalidArgument,
  IoError,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ndcp
