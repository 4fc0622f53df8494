#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tcfd {

enum class ErrorCode {
  InvalidArgument,
  // ingestion
  EmptyDocument,
  UnsupportedFormat,
  ExtractionFailure,
  InvalidChunkParams,
  // embedding / index
  EmptyBatch,
  DimensionMismatch,
  ZeroVector,
  EmptyIndex,
  CorruptIndex,
  // backends
  BackendUnavailable,
  Timeout,
  RateLimited,
  // prompting / parsing
  MissingBinding,
  MalformedOutput,
  MissingKey,
  ScoreOutOfRange,
  // promptlab
  CompanySpecificGuideline,
  InvalidTransition,
  // traceability
  EmptyCandidate,
  FragmentTooShort,
  MissingFinalLabel,
  MissingAdjudication,
  LengthMismatch,
  // storage / orchestration
  IoFailure,
  NotFound,
  Conflict,
  AnalysisFailed,
};

std::string_view to_string(ErrorCode code);

/// Backend failures worth another attempt.
bool is_retriable(ErrorCode code);

/// The single exception type thrown by the library. `stage` names the
/// pipeline step that failed ("basic_info", "qa", "conformity", ...) and is
/// empty for errors raised outside a pipeline.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string stage = {})
      : std::runtime_error(message), code_(code), stage_(std::move(stage)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& stage() const noexcept { return stage_; }

  /// Copy of this error with the stage set, unless one is already present.
  Error with_stage(std::string stage) const {
    return Error(code_, what(), stage_.empty() ? std::move(stage) : stage_);
  }

 private:
  ErrorCode code_;
  std::string stage_;
};

}  // namespace tcfd
