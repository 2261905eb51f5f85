#include "spoc/error.hpp"

namespace spoc {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::DegenerateComponent: return "DegenerateComponent";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NumericFailure: return "NumericFailure";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::EmptyCrop: return "EmptyCrop";
    case ErrorCode::EmptyRelevantSet: return "EmptyRelevantSet";
    case ErrorCode::MissingTruth: return "MissingTruth";
    case ErrorCode::ShortRanking: return "ShortRanking";
    case ErrorCode::InsufficientReference: return "InsufficientReference";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

bool is_numeric(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateComponent:
    case ErrorCode::ZeroVector:
    case ErrorCode::RankDeficient:
    case ErrorCode::NumericFailure:
      return true;
    default:
      return false;
  }
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace spoc
