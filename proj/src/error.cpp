#include "tcfd/error.hpp"

namespace tcfd {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyDocument: return "EmptyDocument";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::ExtractionFailure: return "ExtractionFailure";
    case ErrorCode::InvalidChunkParams: return "InvalidChunkParams";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::EmptyIndex: return "EmptyIndex";
    case ErrorCode::CorruptIndex: return "CorruptIndex";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::MissingBinding: return "MissingBinding";
    case ErrorCode::MalformedOutput: return "MalformedOutput";
    case ErrorCode::MissingKey: return "MissingKey";
    case ErrorCode::ScoreOutOfRange: return "ScoreOutOfRange";
    case ErrorCode::CompanySpecificGuideline: return "CompanySpecificGuideline";
    case ErrorCode::InvalidTransition: return "InvalidTransition";
    case ErrorCode::EmptyCandidate: return "EmptyCandidate";
    case ErrorCode::FragmentTooShort: return "FragmentTooShort";
    case ErrorCode::MissingFinalLabel: return "MissingFinalLabel";
    case ErrorCode::MissingAdjudication: return "MissingAdjudication";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::Conflict: return "Conflict";
    case ErrorCode::AnalysisFailed: return "AnalysisFailed";
  }
  return "Unknown";
}

bool is_retriable(ErrorCode code) {
  return code == ErrorCode::BackendUnavailable || code == ErrorCode::Timeout ||
         code == ErrorCode::RateLimited;
}

}  // namespace tcfd
