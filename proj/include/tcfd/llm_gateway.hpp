#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tcfd/embedding.hpp"
#include "tcfd/error.hpp"
#include "tcfd/prompting.hpp"

namespace tcfd {

struct CompletionParams {
  double temperature = 0.0;
  int max_output_tokens = 1024;
  std::string model_id = "gpt-3.5-turbo";
  std::chrono::milliseconds timeout{120000};
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
};

/// Chat-completion backend. Implementations throw tcfd::Error with
/// BackendUnavailable / Timeout / RateLimited and must tolerate concurrent
/// calls.
class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual std::string complete(std::string_view prompt, const CompletionParams& params) const = 0;
};

struct CompletionResult {
  std::string text;
  int retries = 0;
};

/// Calls the backend, retrying transient failures with exponential backoff
/// (initial_backoff * 2^attempt). Exhausted retries surface as
/// BackendUnavailable.
CompletionResult complete(const RenderedPrompt& prompt, const CompletionParams& params,
                          const LlmBackend& backend);
CompletionResult complete(std::string_view prompt_text, const CompletionParams& params,
                          const LlmBackend& backend);

/// Deterministic backend driven by a JSON script:
///
///   {
///     "responses": {"<fingerprint>": "<reply>", ...},
///     "rules": [{"contains": "<substring>", "response": "<reply>"} |
///               {"contains": "...", "error": "BackendUnavailable"}, ...],
///     "default": "<reply>"
///   }
///
/// Lookup order: exact fingerprint, then the first rule whose substring
/// occurs in the prompt, then `default`. Without a match the backend
/// synthesises a well-formed reply from the prompt (see auto_reply).
class ScriptedLlmBackend final : public LlmBackend {
 public:
  ScriptedLlmBackend() = default;
  explicit ScriptedLlmBackend(const nlohmann::json& script);
  ScriptedLlmBackend(ScriptedLlmBackend&& other) noexcept
      : responses_(std::move(other.responses_)),
        rules_(std::move(other.rules_)),
        default_(std::move(other.default_)),
        auto_reply_(other.auto_reply_),
        calls_(other.calls_.load()) {}
  static ScriptedLlmBackend load(const std::filesystem::path& path);

  void add_response(std::string_view prompt_text, std::string reply);
  void add_rule(std::string contains, std::string reply);
  void add_error_rule(std::string contains, ErrorCode code);
  void set_default(std::string reply);
  void set_auto_reply(bool enabled) { auto_reply_ = enabled; }

  std::string complete(std::string_view prompt, const CompletionParams& params) const override;

  std::size_t calls() const { return calls_.load(); }

  /// Template-aware canned reply: cites the first source in the prompt for
  /// answer/summary templates, scores 50 for conformity prompts, and so on.
  static std::string auto_reply(std::string_view prompt);

 private:
  struct Rule {
    std::string contains;
    std::string reply;
    std::optional<ErrorCode> error;
  };
  std::map<std::string, std::string> responses_;
  std::vector<Rule> rules_;
  std::optional<std::string> default_;
  bool auto_reply_ = true;
  mutable std::atomic<std::size_t> calls_{0};
};

/// OpenAI-compatible POST {base_url}/chat/completions adapter.
class HttpLlmBackend final : public LlmBackend {
 public:
  explicit HttpLlmBackend(HttpEndpoint endpoint);
  std::string complete(std::string_view prompt, const CompletionParams& params) const override;

 private:
  HttpEndpoint endpoint_;
};

// ---------------------------------------------------------------------------
// Structured outputs

enum class AnswerKind { Answer, Summary };
std::string_view to_string(AnswerKind k);

struct ModelAnswer {
  AnswerKind kind = AnswerKind::Answer;
  std::string answer_text;
  std::vector<std::size_t> cited_sources;     // deduplicated, ascending
  std::vector<std::size_t> citation_order;    // deduplicated, as cited
  std::vector<int> pages;                     // page of each cited chunk, citation order
  std::vector<std::string> warnings;          // dropped citations and the like
  std::string raw;

  bool operator==(const ModelAnswer&) const = default;
};

struct ConformityResult {
  int question_index = 0;
  std::string analysis_text;
  int score = 0;
  bool analysis_too_long = false;  // more than 150 whitespace-separated words

  bool operator==(const ConformityResult&) const = default;
};

inline constexpr std::size_t kMaxAnalysisWords = 150;

/// First JSON object in `raw`: the whole text, then with code fences
/// stripped, then the first balanced {...} span. MalformedOutput if none
/// parses.
nlohmann::json extract_json_object(std::string_view raw);

ModelAnswer parse_answer_json(std::string_view raw, const std::set<std::size_t>& valid_sources);
ConformityResult parse_conformity_json(std::string_view raw, int question_index);
std::string parse_guideline_json(std::string_view raw);
BasicInfo parse_basic_info_json(std::string_view raw);

/// The payload a well-behaved model would emit for these results.
std::string serialize_answer_payload(const ModelAnswer& answer);
std::string serialize_conformity_payload(const ConformityResult& result);

nlohmann::json to_json(const ModelAnswer& a);
ModelAnswer model_answer_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ConformityResult& c);
ConformityResult conformity_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BasicInfo& b);
BasicInfo basic_info_from_json(const nlohmann::json& j);

}  // namespace tcfd
