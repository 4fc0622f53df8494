#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tcfd/ingestion.hpp"
#include "tcfd/kernels.hpp"

namespace tcfd {

using kernels::RougeVariant;

/// Fraction of candidate units found in the reference. Tokens are lowercase
/// ASCII alphanumeric runs; R1/R2 clip n-gram counts, RL uses the longest
/// common subsequence.
double rouge_precision(std::string_view candidate, std::string_view reference, RougeVariant variant);

struct EvidenceMatch {
  std::size_t source_number = 0;
  std::size_t start = 0;  // byte offsets into the chunk text
  std::size_t end = 0;
  std::string query_fragment;

  bool operator==(const EvidenceMatch&) const = default;
};

inline constexpr std::size_t kMinFragmentLength = 3;

/// Case-insensitive, whitespace-collapsed substring search over every chunk,
/// all matches in source order.
std::vector<EvidenceMatch> locate_evidence(std::string_view answer_fragment,
                                           std::span<const DocumentChunk> chunks);

struct ConcatenationWarning {
  std::size_t first_source = 0;   // chunk whose tail starts the seam
  std::size_t second_source = 0;  // chunk whose head ends it
  std::string window;             // the answer tokens spanning the seam
  std::size_t split = 0;          // tokens taken from the first chunk

  bool operator==(const ConcatenationWarning&) const = default;
};

inline constexpr std::size_t kDefaultLintWindow = 6;

/// Flags answer token windows that run from the end of one cited chunk into
/// the start of another while no single cited chunk contains the window.
std::vector<ConcatenationWarning> lint_concatenation(std::string_view answer,
                                                     std::span<const DocumentChunk> cited_chunks,
                                                     std::size_t window = kDefaultLintWindow);

// ---------------------------------------------------------------------------
// Hallucination annotation

enum class ContentLabel { Supported, Hallucinated };
enum class SourceLabel { Honest, Hallucinated, NotApplicable };

std::string_view to_string(ContentLabel l);
std::string_view to_string(SourceLabel l);

struct AnnotationRecord {
  std::string answer_id;
  std::string annotator_id;
  ContentLabel content_label = ContentLabel::Supported;
  SourceLabel source_label = SourceLabel::Honest;
  bool adjudicator = false;

  bool operator==(const AnnotationRecord&) const = default;
};

/// Throws InvalidArgument unless source_label is NotApplicable exactly when
/// the content is hallucinated.
void validate(const AnnotationRecord& r);

struct FinalLabel {
  ContentLabel content = ContentLabel::Supported;
  SourceLabel source = SourceLabel::Honest;
};

struct EvalSummary {
  std::size_t n_total = 0;
  std::size_t n_content_supported = 0;
  std::size_t n_source_honest = 0;
  std::size_t n_disputed = 0;
  double content_free_rate = 0.0;               // percent
  double source_free_rate_given_content = 0.0;  // percent
  double rouge1_p = 0.0;                        // percent
  double rouge2_p = 0.0;
  double rougeL_p = 0.0;
  double kappa_content = 0.0;
};

/// Rates over the answers named in `annotations`, using their final labels.
EvalSummary hallucination_rates(std::span<const AnnotationRecord> annotations,
                                const std::map<std::string, FinalLabel>& final_labels);

/// (p_o - p_e) / (1 - p_e); 1.0 when both raters use one shared category.
double cohens_kappa(std::span<const int> labels_a, std::span<const int> labels_b);

struct ContextChunk {
  std::size_t source_number = 0;
  int page_number = 0;
  std::string text;
};

/// One line of the answers file.
struct AnswerRecord {
  std::string answer_id;
  std::string answer_text;
  std::vector<std::size_t> cited_sources;
  std::vector<ContextChunk> context;

  std::string reference_text() const;  // context texts joined by '\n'
};

/// Final labels: agreed label of the two primary annotators, or the
/// adjudicator's when they disagree on either dimension.
std::map<std::string, FinalLabel> adjudicate(std::span<const AnnotationRecord> annotations,
                                             std::size_t* disputed = nullptr);

/// Full protocol: adjudication, rates, kappa between the two primary
/// annotators on the content dimension, ROUGE precision of each answer
/// against its own retrieved context.
EvalSummary evaluation_run(std::span<const AnswerRecord> answers,
                           std::span<const AnnotationRecord> annotations);

nlohmann::json to_json(const AnnotationRecord& r);
AnnotationRecord annotation_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AnswerRecord& r);
AnswerRecord answer_record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EvalSummary& s);
nlohmann::json to_json(const EvidenceMatch& m);

std::vector<AnnotationRecord> load_annotations_jsonl(const std::filesystem::path& path);
std::vector<AnswerRecord> load_answers_jsonl(const std::filesystem::path& path);

/// Percent with two decimals, truncated toward zero ("83.63").
std::string format_percent(double percent);

}  // namespace tcfd
