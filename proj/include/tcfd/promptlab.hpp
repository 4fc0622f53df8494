#pragma once

#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tcfd/llm_gateway.hpp"
#include "tcfd/prompting.hpp"

namespace tcfd {

enum class FeedbackStatus { Pending, Transformed, Archived };
std::string_view to_string(FeedbackStatus s);
FeedbackStatus parse_feedback_status(std::string_view s);

struct FeedbackRecord {
  std::string feedback_id;
  std::string answer_id;
  std::string expert_id;
  std::string feedback_text;
  std::optional<int> question_index;
  std::string created_at;
  FeedbackStatus status = FeedbackStatus::Pending;
  std::optional<int> guideline_version;  // set when transformed
  // Optional context for answers the service cannot reconstruct.
  std::string original_prompt;
  std::string old_response;

  bool operator==(const FeedbackRecord&) const = default;
};

nlohmann::json to_json(const FeedbackRecord& r);
FeedbackRecord feedback_from_json(const nlohmann::json& j);

/// Append-only JSON-lines store. Every status change appends a new line for
/// the same feedback_id; reads fold lines to the latest state.
class FeedbackStore {
 public:
  /// Empty path: in-memory only.
  explicit FeedbackStore(std::filesystem::path path = {});

  /// Assigns an id and created_at when missing; status must be pending.
  FeedbackRecord record_feedback(FeedbackRecord fb);
  FeedbackRecord transition(const std::string& feedback_id, FeedbackStatus to,
                            std::optional<int> guideline_version = std::nullopt);

  std::optional<FeedbackRecord> get(const std::string& feedback_id) const;
  std::vector<FeedbackRecord> list_feedback(std::optional<FeedbackStatus> status = std::nullopt) const;

 private:
  void append_line(const FeedbackRecord& r);
  std::vector<FeedbackRecord> fold() const;

  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::vector<FeedbackRecord> memory_;  // in-memory mode log
};

struct GuidelineScope {
  std::optional<int> question_index;  // nullopt: general

  static GuidelineScope general() { return {}; }
  static GuidelineScope specific(int q) { return {q}; }
};

/// New list with version + 1. General guidelines are appended; a specific
/// guideline replaces the question's existing one.
GuidelineList append_guideline(const GuidelineList& list, std::string_view guideline,
                               GuidelineScope scope, std::string origin = "manual");

struct FeedbackContext {
  std::string original_prompt;
  std::string old_response;
  std::string company_name;  // rejected if it appears in the generated guideline
};

/// Renders the prompt-engineering prompt, calls the model and returns the
/// GUIDELINE text.
std::string feedback_to_guideline(const FeedbackRecord& fb, const GuidelineList& current,
                                  const FeedbackContext& context, const LlmBackend& llm,
                                  const CompletionParams& params = {},
                                  const TemplateSet& templates = TemplateSet::builtin());

/// Versioned guideline history. Appends create draft versions; rendering
/// uses the active (promoted) version. History is never rewritten.
///
/// File: {version, general:[...], specific:{q:...}, cqa, active_version,
///        history:[{version, status, list}]}
class GuidelineStore {
 public:
  /// Empty path: in-memory only.
  explicit GuidelineStore(GuidelineList seed, std::filesystem::path path = {});

  GuidelineList active() const;
  int active_version() const;
  int latest_version() const;
  std::optional<GuidelineList> version(int v) const;
  bool is_promoted(int v) const;

  /// Appends a draft built on the latest version; returns it.
  GuidelineList append(std::string_view guideline, GuidelineScope scope, std::string origin);
  void promote(int version);

  nlohmann::json to_json() const;

 private:
  struct Entry {
    GuidelineList list;
    bool promoted = false;
  };
  nlohmann::json to_json_locked() const;
  void save_locked() const;

  std::filesystem::path path_;
  mutable std::shared_mutex mutex_;
  std::vector<Entry> history_;
  int active_version_ = 1;
};

}  // namespace tcfd
