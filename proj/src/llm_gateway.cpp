#include "tcfd/llm_gateway.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <thread>

#include "tcfd/hashing.hpp"
#include "tcfd/text.hpp"

namespace tcfd {

// ---------------------------------------------------------------------------
// complete()

CompletionResult complete(std::string_view prompt_text, const CompletionParams& params,
                          const LlmBackend& backend) {
  CompletionResult result;
  auto backoff = params.initial_backoff;
  for (int attempt = 0;; ++attempt) {
    try {
      result.text = backend.complete(prompt_text, params);
      result.retries = attempt;
      return result;
    } catch (const Error& e) {
      if (!is_retriable(e.code())) throw;
      if (attempt >= params.max_retries) {
        throw Error(ErrorCode::BackendUnavailable, "giving up after " + std::to_string(attempt + 1) +
                                                       " attempts: " + e.what());
      }
    }
    if (backoff.count() > 0) std::this_thread::sleep_for(backoff);
    backoff *= 2;
  }
}

CompletionResult complete(const RenderedPrompt& prompt, const CompletionParams& params,
                          const LlmBackend& backend) {
  return complete(prompt.text, params, backend);
}

// ---------------------------------------------------------------------------
// Scripted mock

namespace {

ErrorCode parse_error_code(std::string_view name) {
  for (const ErrorCode c : {ErrorCode::BackendUnavailable, ErrorCode::Timeout, ErrorCode::RateLimited}) {
    if (to_string(c) == name) return c;
  }
  throw Error(ErrorCode::InvalidArgument, "mock scripts may only raise BackendUnavailable, Timeout or RateLimited");
}

// Text and source number of the first "Content: ... Source: N" block.
std::optional<std::pair<std::string, std::string>> first_source_block(std::string_view prompt) {
  const std::size_t content = prompt.find("Content: ");
  if (content == std::string_view::npos) return std::nullopt;
  const std::size_t source = prompt.find("\nSource: ", content);
  if (source == std::string_view::npos) return std::nullopt;
  std::size_t num_begin = source + 9;
  std::size_t num_end = num_begin;
  while (num_end < prompt.size() && std::isdigit(static_cast<unsigned char>(prompt[num_end]))) ++num_end;
  if (num_end == num_begin) return std::nullopt;
  std::string excerpt(prompt.substr(content + 9, source - content - 9));
  const auto offsets = text::code_point_offsets(excerpt);
  if (offsets.size() > 241) excerpt.resize(offsets[240]);
  return std::make_pair(text::trim(excerpt), std::string(prompt.substr(num_begin, num_end - num_begin)));
}

}  // namespace

ScriptedLlmBackend::ScriptedLlmBackend(const nlohmann::json& script) {
  try {
    if (script.contains("responses")) {
      for (const auto& [fp, reply] : script.at("responses").items()) responses_[fp] = reply.get<std::string>();
    }
    if (script.contains("rules")) {
      for (const auto& r : script.at("rules")) {
        Rule rule{r.at("contains").get<std::string>(), r.value("response", std::string{}), std::nullopt};
        if (r.contains("error")) rule.error = parse_error_code(r.at("error").get<std::string>());
        rules_.push_back(std::move(rule));
      }
    }
    if (script.contains("default")) default_ = script.at("default").get<std::string>();
    auto_reply_ = script.value("auto_reply", true);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("invalid mock script: ") + e.what());
  }
}

ScriptedLlmBackend ScriptedLlmBackend::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open mock script " + path.string());
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::InvalidArgument, "mock script is not valid JSON: " + path.string());
  return ScriptedLlmBackend(j);
}

void ScriptedLlmBackend::add_response(std::string_view prompt_text, std::string reply) {
  responses_[fingerprint(prompt_text)] = std::move(reply);
}

void ScriptedLlmBackend::add_rule(std::string contains, std::string reply) {
  rules_.push_back({std::move(contains), std::move(reply), std::nullopt});
}

void ScriptedLlmBackend::add_error_rule(std::string contains, ErrorCode code) {
  rules_.push_back({std::move(contains), {}, code});
}

void ScriptedLlmBackend::set_default(std::string reply) { default_ = std::move(reply); }

std::string ScriptedLlmBackend::complete(std::string_view prompt, const CompletionParams&) const {
  ++calls_;
  if (const auto it = responses_.find(fingerprint(prompt)); it != responses_.end()) return it->second;
  for (const auto& rule : rules_) {
    if (prompt.find(rule.contains) == std::string_view::npos) continue;
    if (rule.error) throw Error(*rule.error, "scripted failure for prompt containing '" + rule.contains + "'");
    return rule.reply;
  }
  if (default_) return *default_;
  if (auto_reply_) return auto_reply(prompt);
  throw Error(ErrorCode::BackendUnavailable, "mock script has no reply for prompt " + fingerprint(prompt));
}

std::string ScriptedLlmBackend::auto_reply(std::string_view prompt) {
  if (prompt.find("single key \"GUIDELINE\"") != std::string_view::npos) {
    return nlohmann::json{{"GUIDELINE", "If the report omits information the question asks for, state explicitly which information is missing."}}.dump();
  }
  if (prompt.find("COMPANY_NAME") != std::string_view::npos) {
    return nlohmann::json{{"COMPANY_NAME", "unknown"}, {"LOCATION", "unknown"}, {"SECTOR", "unknown"}}.dump();
  }
  if (prompt.find("SCORE: An integer score") != std::string_view::npos) {
    return nlohmann::json{{"ANALYSIS", "Offline mock analysis: the excerpts were not assessed by a language model."},
                          {"SCORE", 50}}.dump();
  }
  const auto block = first_source_block(prompt);
  const std::string key = prompt.find("1. SUMMARY:") != std::string_view::npos ? "SUMMARY" : "ANSWER";
  if (!block) return nlohmann::json{{key, "The report does not provide this information."}, {"SOURCES", nlohmann::json::array()}}.dump();
  nlohmann::json j;
  j[key] = block->first.empty() ? "The report does not provide this information." : block->first;
  j["SOURCES"] = nlohmann::json::array({std::stoull(block->second)});
  return j.dump();
}

// ---------------------------------------------------------------------------
// Parsers

std::string_view to_string(AnswerKind k) { return k == AnswerKind::Answer ? "answer" : "summary"; }

namespace {

// Integer value of a JSON number or numeric string ("7", " 7 ", "7.0").
std::optional<long long> coerce_integer(const nlohmann::json& v) {
  if (v.is_number_integer()) return v.get<long long>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::isfinite(d) && d == std::floor(d) && std::fabs(d) < 1e15) return static_cast<long long>(d);
    return std::nullopt;
  }
  if (v.is_string()) {
    const std::string s = text::trim(v.get<std::string>());
    if (s.empty()) return std::nullopt;
    std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
    if (i == s.size()) return std::nullopt;
    for (std::size_t k = i; k < s.size(); ++k) {
      if (!std::isdigit(static_cast<unsigned char>(s[k]))) {
        // Accept "70.0" style.
        const auto as_num = nlohmann::json::parse(s, nullptr, false);
        return as_num.is_number() ? coerce_integer(as_num) : std::nullopt;
      }
    }
    if (s.size() - i > 15) return std::nullopt;
    return std::stoll(s);
  }
  return std::nullopt;
}

// Source number in a SOURCES entry: integers, numeric strings, and
// "Source 12" / "#12" strings.
std::optional<long long> coerce_source(const nlohmann::json& v) {
  if (auto n = coerce_integer(v)) return n;
  if (!v.is_string()) return std::nullopt;
  std::string s = text::trim(v.get<std::string>());
  std::string lower = s;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower.rfind("source", 0) == 0) s = text::trim(s.substr(6));
  if (!s.empty() && (s[0] == '#' || s[0] == ':')) s = text::trim(s.substr(1));
  return coerce_integer(nlohmann::json(s));
}

const nlohmann::json& require_key(const nlohmann::json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw Error(ErrorCode::MissingKey, std::string("missing key ") + key);
  return *it;
}

}  // namespace

ModelAnswer parse_answer_json(std::string_view raw, const std::set<std::size_t>& valid_sources) {
  const nlohmann::json obj = extract_json_object(raw);
  ModelAnswer a;
  a.raw = std::string(raw);
  const nlohmann::json* text_value = nullptr;
  if (const auto it = obj.find("ANSWER"); it != obj.end()) {
    text_value = &*it;
  } else if (const auto sit = obj.find("SUMMARY"); sit != obj.end()) {
    text_value = &*sit;
    a.kind = AnswerKind::Summary;
  } else {
    throw Error(ErrorCode::MissingKey, "missing key ANSWER");
  }
  if (!text_value->is_string()) throw Error(ErrorCode::MalformedOutput, "answer text is not a string");
  a.answer_text = text_value->get<std::string>();
  if (text::trim(a.answer_text).empty()) throw Error(ErrorCode::MalformedOutput, "answer text is empty");

  const nlohmann::json& sources = require_key(obj, "SOURCES");
  nlohmann::json list = sources.is_array() ? sources : (sources.is_null() ? nlohmann::json::array() : nlohmann::json::array({sources}));
  for (const auto& entry : list) {
    const auto n = coerce_source(entry);
    if (!n || *n < 0) {
      a.warnings.push_back("unreadable citation " + entry.dump() + " dropped");
      continue;
    }
    const auto s = static_cast<std::size_t>(*n);
    if (!valid_sources.contains(s)) {
      a.warnings.push_back("cited source " + std::to_string(s) + " is not in the retrieved context; dropped");
      continue;
    }
    if (std::find(a.citation_order.begin(), a.citation_order.end(), s) == a.citation_order.end()) {
      a.citation_order.push_back(s);
    }
  }
  a.cited_sources = a.citation_order;
  std::sort(a.cited_sources.begin(), a.cited_sources.end());
  return a;
}

ConformityResult parse_conformity_json(std::string_view raw, int question_index) {
  const nlohmann::json obj = extract_json_object(raw);
  const nlohmann::json& analysis = require_key(obj, "ANALYSIS");
  const nlohmann::json& score = require_key(obj, "SCORE");
  if (!analysis.is_string()) throw Error(ErrorCode::MalformedOutput, "ANALYSIS is not a string");
  const auto value = coerce_integer(score);
  if (!value) throw Error(ErrorCode::MalformedOutput, "SCORE is not an integer: " + score.dump());
  if (*value < 0 || *value > 100) {
    throw Error(ErrorCode::ScoreOutOfRange, "SCORE " + std::to_string(*value) + " outside 0..100");
  }
  ConformityResult r;
  r.question_index = question_index;
  r.analysis_text = analysis.get<std::string>();
  r.score = static_cast<int>(*value);
  r.analysis_too_long = text::word_count(r.analysis_text) > kMaxAnalysisWords;
  return r;
}

std::string parse_guideline_json(std::string_view raw) {
  const nlohmann::json obj = extract_json_object(raw);
  const nlohmann::json& g = require_key(obj, "GUIDELINE");
  if (!g.is_string() || text::trim(g.get<std::string>()).empty()) {
    throw Error(ErrorCode::MalformedOutput, "GUIDELINE is not a non-empty string");
  }
  return text::trim(g.get<std::string>());
}

BasicInfo parse_basic_info_json(std::string_view raw) {
  const nlohmann::json obj = extract_json_object(raw);
  auto field = [&](const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end() || !it->is_string()) return std::string("unknown");
    std::string v = text::trim(it->get<std::string>());
    return v.empty() ? std::string("unknown") : v;
  };
  return {field("COMPANY_NAME"), field("LOCATION"), field("SECTOR")};
}

std::string serialize_answer_payload(const ModelAnswer& answer) {
  nlohmann::json j;
  j[answer.kind == AnswerKind::Answer ? "ANSWER" : "SUMMARY"] = answer.answer_text;
  j["SOURCES"] = answer.citation_order.empty() ? answer.cited_sources : answer.citation_order;
  return j.dump();
}

std::string serialize_conformity_payload(const ConformityResult& result) {
  return nlohmann::json{{"ANALYSIS", result.analysis_text}, {"SCORE", result.score}}.dump();
}

// ---------------------------------------------------------------------------
// JSON mirrors

nlohmann::json to_json(const ModelAnswer& a) {
  return {{"kind", to_string(a.kind)},  {"answer", a.answer_text}, {"sources", a.cited_sources},
          {"citation_order", a.citation_order}, {"pages", a.pages}, {"warnings", a.warnings},
          {"raw", a.raw}};
}

ModelAnswer model_answer_from_json(const nlohmann::json& j) {
  ModelAnswer a;
  a.kind = j.at("kind").get<std::string>() == "summary" ? AnswerKind::Summary : AnswerKind::Answer;
  a.answer_text = j.at("answer").get<std::string>();
  a.cited_sources = j.at("sources").get<std::vector<std::size_t>>();
  a.citation_order = j.value("citation_order", a.cited_sources);
  a.pages = j.value("pages", std::vector<int>{});
  a.warnings = j.value("warnings", std::vector<std::string>{});
  a.raw = j.value("raw", std::string{});
  return a;
}

nlohmann::json to_json(const ConformityResult& c) {
  return {{"question_index", c.question_index}, {"analysis", c.analysis_text}, {"score", c.score},
          {"analysis_too_long", c.analysis_too_long}};
}

ConformityResult conformity_from_json(const nlohmann::json& j) {
  ConformityResult c;
  c.question_index = j.at("question_index").get<int>();
  c.analysis_text = j.at("analysis").get<std::string>();
  c.score = j.at("score").get<int>();
  c.analysis_too_long = j.value("analysis_too_long", false);
  return c;
}

nlohmann::json to_json(const BasicInfo& b) {
  return {{"company_name", b.company_name}, {"location", b.location}, {"sector", b.sector}};
}

BasicInfo basic_info_from_json(const nlohmann::json& j) {
  return {j.at("company_name").get<std::string>(), j.at("location").get<std::string>(),
          j.at("sector").get<std::string>()};
}

}  // namespace tcfd
