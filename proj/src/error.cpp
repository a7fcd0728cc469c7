#include "ndcp/error.hpp"

namespace ndcp {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NonBinaryLabel: return "NonBinaryLabel";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::DegenerateSplit: return "DegenerateSplit";
    case ErrorCode::InfeasiblePartition: return "InfeasiblePartition";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyCategory: return "EmptyCategory";
    case ErrorCode::EmptyList: return "EmptyList";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::Empty: return "Empty";
    case ErrorCode::TooFewPairs: return "TooFewPairs";
    case ErrorCode::UnpairedResults: return "UnpairedResults";
    case ErrorCode::InvalidMessage: return "InvalidMessage";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::MalformedJson: return "MalformedJson";
    case ErrorCode::BindFailure: return "BindFailure";
    case ErrorCode::SourceTimeout: return "SourceTimeout";
    case ErrorCode::SourceError: return "SourceError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

}  // namespace ndcp
