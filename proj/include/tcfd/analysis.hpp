#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tcfd/error.hpp"
#include "tcfd/llm_gateway.hpp"
#include "tcfd/prompting.hpp"
#include "tcfd/retrieval.hpp"
#include "tcfd/vector_index.hpp"

namespace tcfd {

/// Retrieval query used to find the company's name, location and sector.
inline constexpr std::string_view kBasicInfoQuery = "company name headquarters sector";

enum class AnswerMode { QuestionAnswering, Summarization };

/// Order in which the eleven question tasks are executed. Results are keyed
/// by question index, so the order never shows in the output.
enum class Execution { Parallel, Serial, SerialReversed };

struct AnalysisSettings {
  RetrievalParams retrieval;
  int answer_length = kDefaultAnswerLength;
  CompletionParams completion;
  AnswerMode mode = AnswerMode::QuestionAnswering;
  Execution execution = Execution::Parallel;
  std::size_t max_parallel = 4;
};

/// Everything a pipeline run reads. All referenced objects must outlive the
/// run and are only read.
struct AnalysisDeps {
  const EmbeddingBackend* embedder = nullptr;
  const LlmBackend* llm = nullptr;
  const QuestionBank* questions = nullptr;
  GuidelineList guidelines;
  const TemplateSet* templates = &TemplateSet::builtin();
  const TokenEstimator* estimator = nullptr;  // nullptr: chars/4
  AnalysisSettings settings;
  std::function<std::string()> clock;                     // created_at; default: UTC now
  std::function<void(int question_index, bool ok)> on_progress;
};

struct QuestionError {
  int question_index = 0;  // 0 for report-level stages such as basic_info
  std::string stage;
  ErrorCode code = ErrorCode::AnalysisFailed;
  std::string message;

  bool operator==(const QuestionError&) const = default;
};

enum class AnalysisStatus { Complete, Partial, Failed };
std::string_view to_string(AnalysisStatus s);

struct ReportAnalysis {
  std::string doc_id;
  AnalysisStatus status = AnalysisStatus::Complete;
  AnswerMode mode = AnswerMode::QuestionAnswering;
  BasicInfo basic_info;
  std::map<int, ModelAnswer> answers;
  std::map<int, ConformityResult> conformity;
  std::int64_t average_cents = 0;  // mean score x100, rounded half-up
  int guideline_version = 1;
  std::string created_at;
  std::vector<QuestionError> errors;

  double average_score() const { return static_cast<double>(average_cents) / 100.0; }
};

/// Mean of `scores` in hundredths, rounded half-up. Exact integer arithmetic.
std::int64_t average_score_cents(std::span<const int> scores);

/// "61.36"
std::string format_cents(std::int64_t cents);

nlohmann::json to_json(const ReportAnalysis& a);
ReportAnalysis report_analysis_from_json(const nlohmann::json& j);
/// Stable-ordered, pretty-printed JSON.
std::string serialize(const ReportAnalysis& a);

BasicInfo fetch_basic_info(const VectorIndex& index, const AnalysisDeps& deps);

ModelAnswer summarize_tcfd(const VectorIndex& index, const TcfdQuestion& q, const BasicInfo& info,
                           const AnalysisDeps& deps);

ConformityResult assess_conformity(const VectorIndex& index, const TcfdQuestion& q,
                                   std::string_view requirements, const AnalysisDeps& deps);

/// Basic info, then answer + conformity for all eleven questions. Per-question
/// failures are recorded and yield status Partial; AnalysisFailed is thrown
/// only when no question produced a score.
ReportAnalysis analyze_report(const VectorIndex& index, const AnalysisDeps& deps);

ModelAnswer answer_custom(const VectorIndex& index, std::string_view user_question,
                          const BasicInfo& info, const AnalysisDeps& deps);

/// Pages of the cited chunks in citation order, deduplicated.
std::vector<int> cited_pages(const ModelAnswer& answer, const VectorIndex& index);

/// Current UTC time as "YYYY-MM-DDTHH:MM:SS.mmmZ".
std::string utc_timestamp();

}  // namespace tcfd
