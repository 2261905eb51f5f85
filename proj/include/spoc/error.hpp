#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spoc {

enum class ErrorCode {
  // feature_store
  MalformedHeader,
  ShapeMismatch,
  NonFiniteValue,
  IoFailure,
  OutOfBounds,
  // embed / postprocess
  InsufficientData,
  DegenerateComponent,
  DimensionMismatch,
  ZeroVector,
  RankDeficient,
  NumericFailure,
  // retrieval
  DuplicateId,
  NotNormalized,
  EmptyCrop,
  // evaluation
  EmptyRelevantSet,
  MissingTruth,
  ShortRanking,
  InsufficientReference,
  // generic
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

/// True for errors caused by numerical breakdown rather than bad input data.
bool is_numeric(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace spoc
