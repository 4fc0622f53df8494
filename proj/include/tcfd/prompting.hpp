#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tcfd/retrieval.hpp"

namespace tcfd {

enum class Category { Governance, Strategy, RiskManagement, MetricsTargets };
std::string_view to_string(Category c);
Category parse_category(std::string_view name);

/// One of the eleven recommendation points rewritten as a question.
struct TcfdQuestion {
  int index = 0;  // 1..11
  Category category = Category::Governance;
  std::string recommendation_text;
  std::string question_text;
  std::string specific_guideline;  // stored unnumbered; rendered after the general list
  std::string requirements;        // disclosure requirements for conformity scoring
};

/// Expected category for a question index, or nullopt outside 1..11.
std::optional<Category> category_for_index(int index);

struct GuidelineEntry {
  std::string text;
  std::string origin = "seed";  // "seed" or "feedback:<id>"

  bool operator==(const GuidelineEntry&) const = default;
};

/// Numbered answer guidelines: the general list shared by every question,
/// one specific guideline per question, and the customized-QA guideline.
struct GuidelineList {
  int version = 1;
  std::vector<GuidelineEntry> general;
  std::map<int, GuidelineEntry> specific;
  GuidelineEntry cqa;

  /// "1. ...\n2. ..." with {answer_length} substituted.
  std::string render_general(int answer_length) const;
  /// General list followed by the question's specific guideline.
  std::string render_for_question(const TcfdQuestion& q, int answer_length) const;
  /// General list followed by the customized-QA guideline.
  std::string render_for_custom(int answer_length) const;

  bool operator==(const GuidelineList&) const = default;
};

nlohmann::json to_json(const GuidelineList& g);
GuidelineList guideline_list_from_json(const nlohmann::json& j);

/// Questions + seed guidelines as shipped in data/tcfd_data.json.
struct QuestionBank {
  std::vector<TcfdQuestion> questions;
  GuidelineList seed_guidelines;

  static QuestionBank builtin();
  static QuestionBank from_json(const nlohmann::json& j);
  static QuestionBank load(const std::filesystem::path& path);

  const TcfdQuestion& question(int index) const;
};

struct BasicInfo {
  std::string company_name;
  std::string location;
  std::string sector;

  /// Three-line block bound to {basic_info}.
  std::string render() const;

  bool operator==(const BasicInfo&) const = default;
};

enum class TemplateId { Qa, Summarization, Conformity, Cqa, PromptEngineering, BasicInfo };
std::string_view to_string(TemplateId id);

/// Prompt templates with "{placeholder}" syntax.
class TemplateSet {
 public:
  static const TemplateSet& builtin();
  /// Reads <dir>/<id>.txt for every template id.
  static TemplateSet load(const std::filesystem::path& dir);

  const std::string& get(TemplateId id) const;

 private:
  std::map<TemplateId, std::string> templates_;
};

struct RenderedPrompt {
  std::string text;
  TemplateId template_id = TemplateId::Qa;
  std::vector<std::size_t> included_sources;
  std::map<std::string, std::string> variable_bindings;
};

/// Names of all "{identifier}" placeholders in a template, in order of
/// first appearance.
std::vector<std::string> template_placeholders(std::string_view tmpl);

/// Single-pass substitution; bound values are never re-scanned. Every
/// placeholder must have a non-empty binding (MissingBinding otherwise).
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& bindings);

inline constexpr int kDefaultAnswerLength = 150;

RenderedPrompt render_qa_prompt(const BasicInfo& info, const TcfdQuestion& q, const ContextWindow& ctx,
                                const GuidelineList& g, int answer_length = kDefaultAnswerLength,
                                const TemplateSet& templates = TemplateSet::builtin());

RenderedPrompt render_summarization_prompt(const BasicInfo& info, const TcfdQuestion& q,
                                           const ContextWindow& ctx, const GuidelineList& g,
                                           int answer_length = kDefaultAnswerLength,
                                           const TemplateSet& templates = TemplateSet::builtin());

RenderedPrompt render_conformity_prompt(const TcfdQuestion& q, std::string_view requirements,
                                        std::string_view disclosure,
                                        const TemplateSet& templates = TemplateSet::builtin());

RenderedPrompt render_cqa_prompt(const BasicInfo& info, std::string_view user_question,
                                 const ContextWindow& ctx, const GuidelineList& g,
                                 int answer_length = kDefaultAnswerLength,
                                 const TemplateSet& templates = TemplateSet::builtin());

RenderedPrompt render_prompt_engineering_prompt(std::string_view original_prompt, const GuidelineList& g,
                                                std::string_view old_response, std::string_view feedback,
                                                int answer_length = kDefaultAnswerLength,
                                                const TemplateSet& templates = TemplateSet::builtin());

RenderedPrompt render_basic_info_prompt(const ContextWindow& ctx,
                                        const TemplateSet& templates = TemplateSet::builtin());

/// Token cost of a prompt before any context is inserted: the template with
/// {retrieved_chunks_with_source} / {disclosure} bound to "" and every other
/// binding taken from `bindings`.
std::size_t prompt_overhead_tokens(std::string_view tmpl, std::map<std::string, std::string> bindings,
                                   const TokenEstimator& estimator);

}  // namespace tcfd
