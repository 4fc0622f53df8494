#include "tcfd/promptlab.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>

#include "tcfd/analysis.hpp"
#include "tcfd/persistence.hpp"
#include "tcfd/text.hpp"

namespace tcfd {

std::string_view to_string(FeedbackStatus s) {
  switch (s) {
    case FeedbackStatus::Pending: return "pending";
    case FeedbackStatus::Transformed: return "transformed";
    case FeedbackStatus::Archived: return "archived";
  }
  return "pending";
}

FeedbackStatus parse_feedback_status(std::string_view s) {
  if (s == "pending") return FeedbackStatus::Pending;
  if (s == "transformed") return FeedbackStatus::Transformed;
  if (s == "archived") return FeedbackStatus::Archived;
  throw Error(ErrorCode::InvalidArgument, "unknown feedback status " + std::string(s));
}

nlohmann::json to_json(const FeedbackRecord& r) {
  nlohmann::json j{{"feedback_id", r.feedback_id},   {"answer_id", r.answer_id},
                   {"expert_id", r.expert_id},       {"feedback_text", r.feedback_text},
                   {"created_at", r.created_at},     {"status", to_string(r.status)}};
  j["question_index"] = r.question_index ? nlohmann::json(*r.question_index) : nlohmann::json(nullptr);
  j["guideline_version"] = r.guideline_version ? nlohmann::json(*r.guideline_version) : nlohmann::json(nullptr);
  if (!r.original_prompt.empty()) j["original_prompt"] = r.original_prompt;
  if (!r.old_response.empty()) j["old_response"] = r.old_response;
  return j;
}

FeedbackRecord feedback_from_json(const nlohmann::json& j) {
  try {
    FeedbackRecord r;
    r.feedback_id = j.value("feedback_id", std::string{});
    r.answer_id = j.value("answer_id", std::string{});
    r.expert_id = j.value("expert_id", std::string{});
    r.feedback_text = j.at("feedback_text").get<std::string>();
    if (j.contains("question_index") && !j["question_index"].is_null()) r.question_index = j["question_index"].get<int>();
    r.created_at = j.value("created_at", std::string{});
    r.status = parse_feedback_status(j.value("status", std::string("pending")));
    if (j.contains("guideline_version") && !j["guideline_version"].is_null()) {
      r.guideline_version = j["guideline_version"].get<int>();
    }
    r.original_prompt = j.value("original_prompt", std::string{});
    r.old_response = j.value("old_response", std::string{});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("invalid feedback record: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// FeedbackStore

FeedbackStore::FeedbackStore(std::filesystem::path path) : path_(std::move(path)) {}

void FeedbackStore::append_line(const FeedbackRecord& r) {
  if (path_.empty()) {
    memory_.push_back(r);
    return;
  }
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  out << to_json(r).dump() << '\n';
  out.flush();
  if (!out) throw Error(ErrorCode::IoFailure, "cannot append to " + path_.string());
}

std::vector<FeedbackRecord> FeedbackStore::fold() const {
  std::vector<FeedbackRecord> log;
  if (path_.empty()) {
    log = memory_;
  } else if (std::filesystem::exists(path_)) {
    std::ifstream in(path_, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path_.string());
    std::string line;
    while (std::getline(in, line)) {
      if (text::trim(line).empty()) continue;
      const auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded()) throw Error(ErrorCode::IoFailure, "corrupt feedback log line in " + path_.string());
      log.push_back(feedback_from_json(j));
    }
  }
  std::vector<FeedbackRecord> out;
  std::map<std::string, std::size_t> slot;
  for (auto& r : log) {
    const auto it = slot.find(r.feedback_id);
    if (it == slot.end()) {
      slot[r.feedback_id] = out.size();
      out.push_back(std::move(r));
    } else {
      out[it->second] = std::move(r);
    }
  }
  return out;
}

FeedbackRecord FeedbackStore::record_feedback(FeedbackRecord fb) {
  if (text::trim(fb.feedback_text).empty()) throw Error(ErrorCode::InvalidArgument, "feedback text is empty");
  if (fb.status != FeedbackStatus::Pending) throw Error(ErrorCode::InvalidTransition, "new feedback must be pending");
  if (fb.question_index && (*fb.question_index < 1 || *fb.question_index > 11)) {
    throw Error(ErrorCode::InvalidArgument, "question_index must be within 1..11");
  }
  std::lock_guard lock(mutex_);
  const auto existing = fold();
  if (fb.feedback_id.empty()) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "fb-%06zu", existing.size() + 1);
    fb.feedback_id = buf;
  } else if (std::any_of(existing.begin(), existing.end(),
                         [&](const FeedbackRecord& r) { return r.feedback_id == fb.feedback_id; })) {
    throw Error(ErrorCode::Conflict, "feedback " + fb.feedback_id + " already exists");
  }
  if (fb.created_at.empty()) fb.created_at = utc_timestamp();
  append_line(fb);
  return fb;
}

FeedbackRecord FeedbackStore::transition(const std::string& feedback_id, FeedbackStatus to,
                                         std::optional<int> guideline_version) {
  std::lock_guard lock(mutex_);
  const auto all = fold();
  const auto it = std::find_if(all.begin(), all.end(), [&](const FeedbackRecord& r) { return r.feedback_id == feedback_id; });
  if (it == all.end()) throw Error(ErrorCode::NotFound, "no feedback " + feedback_id);
  if (it->status != FeedbackStatus::Pending || to == FeedbackStatus::Pending) {
    throw Error(ErrorCode::InvalidTransition, "cannot move feedback " + feedback_id + " from " +
                                                  std::string(to_string(it->status)) + " to " + std::string(to_string(to)));
  }
  FeedbackRecord next = *it;
  next.status = to;
  if (guideline_version) next.guideline_version = guideline_version;
  append_line(next);
  return next;
}

std::optional<FeedbackRecord> FeedbackStore::get(const std::string& feedback_id) const {
  std::lock_guard lock(mutex_);
  for (auto& r : fold()) {
    if (r.feedback_id == feedback_id) return r;
  }
  return std::nullopt;
}

std::vector<FeedbackRecord> FeedbackStore::list_feedback(std::optional<FeedbackStatus> status) const {
  std::lock_guard lock(mutex_);
  auto all = fold();
  if (status) std::erase_if(all, [&](const FeedbackRecord& r) { return r.status != *status; });
  return all;
}

// ---------------------------------------------------------------------------
// Guidelines

GuidelineList append_guideline(const GuidelineList& list, std::string_view guideline, GuidelineScope scope,
                               std::string origin) {
  const std::string text = text::trim(guideline);
  if (text.empty()) throw Error(ErrorCode::InvalidArgument, "guideline is empty");
  GuidelineList next = list;
  next.version = list.version + 1;
  if (scope.question_index) {
    if (*scope.question_index < 1 || *scope.question_index > 11) {
      throw Error(ErrorCode::InvalidArgument, "question_index must be within 1..11");
    }
    next.specific[*scope.question_index] = {text, std::move(origin)};
  } else {
    next.general.push_back({text, std::move(origin)});
  }
  return next;
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

std::string feedback_to_guideline(const FeedbackRecord& fb, const GuidelineList& current,
                                  const FeedbackContext& context, const LlmBackend& llm,
                                  const CompletionParams& params, const TemplateSet& templates) {
  if (fb.status != FeedbackStatus::Pending) {
    throw Error(ErrorCode::InvalidTransition, "feedback " + fb.feedback_id + " is not pending", "prompt_engineering");
  }
  try {
    const RenderedPrompt prompt = render_prompt_engineering_prompt(
        context.original_prompt, current, context.old_response, fb.feedback_text, kDefaultAnswerLength, templates);
    std::string guideline = parse_guideline_json(complete(prompt, params, llm).text);
    const std::string company = text::trim(context.company_name);
    if (!company.empty() && lower(company) != "unknown" &&
        lower(guideline).find(lower(company)) != std::string::npos) {
      throw Error(ErrorCode::CompanySpecificGuideline, "generated guideline mentions " + company);
    }
    return guideline;
  } catch (const Error& e) {
    throw e.with_stage("prompt_engineering");
  }
}

GuidelineStore::GuidelineStore(GuidelineList seed, std::filesystem::path path) : path_(std::move(path)) {
  if (!path_.empty() && std::filesystem::exists(path_)) {
    const auto j = nlohmann::json::parse(read_file(path_), nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::IoFailure, "guideline store is not valid JSON: " + path_.string());
    try {
      for (const auto& h : j.at("history")) {
        history_.push_back({guideline_list_from_json(h.at("list")), h.at("status").get<std::string>() == "active" ||
                                                                        h.at("status").get<std::string>() == "promoted"});
      }
      active_version_ = j.at("active_version").get<int>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::IoFailure, std::string("invalid guideline store: ") + e.what());
    }
    if (history_.empty()) throw Error(ErrorCode::IoFailure, "guideline store has no versions");
    return;
  }
  history_.push_back({std::move(seed), true});
  active_version_ = history_.front().list.version;
  save_locked();
}

GuidelineList GuidelineStore::active() const {
  std::shared_lock lock(mutex_);
  for (const auto& e : history_) {
    if (e.list.version == active_version_) return e.list;
  }
  return history_.back().list;
}

int GuidelineStore::active_version() const {
  std::shared_lock lock(mutex_);
  return active_version_;
}

int GuidelineStore::latest_version() const {
  std::shared_lock lock(mutex_);
  return history_.back().list.version;
}

std::optional<GuidelineList> GuidelineStore::version(int v) const {
  std::shared_lock lock(mutex_);
  for (const auto& e : history_) {
    if (e.list.version == v) return e.list;
  }
  return std::nullopt;
}

bool GuidelineStore::is_promoted(int v) const {
  std::shared_lock lock(mutex_);
  for (const auto& e : history_) {
    if (e.list.version == v) return e.promoted;
  }
  return false;
}

GuidelineList GuidelineStore::append(std::string_view guideline, GuidelineScope scope, std::string origin) {
  std::unique_lock lock(mutex_);
  GuidelineList next = append_guideline(history_.back().list, guideline, scope, std::move(origin));
  history_.push_back({next, false});
  save_locked();
  return next;
}

void GuidelineStore::promote(int version) {
  std::unique_lock lock(mutex_);
  const auto it = std::find_if(history_.begin(), history_.end(), [&](const Entry& e) { return e.list.version == version; });
  if (it == history_.end()) throw Error(ErrorCode::NotFound, "no guideline version " + std::to_string(version));
  it->promoted = true;
  active_version_ = version;
  save_locked();
}

nlohmann::json GuidelineStore::to_json() const {
  std::shared_lock lock(mutex_);
  return to_json_locked();
}

// Top level mirrors the active list; history keeps every version.
nlohmann::json GuidelineStore::to_json_locked() const {
  nlohmann::json j = tcfd::to_json(history_.back().list);
  for (const auto& e : history_) {
    if (e.list.version == active_version_) j = tcfd::to_json(e.list);
  }
  j["active_version"] = active_version_;
  j["latest_version"] = history_.back().list.version;
  nlohmann::json history = nlohmann::json::array();
  for (const auto& e : history_) {
    const std::string status = e.list.version == active_version_ ? "active" : (e.promoted ? "promoted" : "draft");
    history.push_back({{"version", e.list.version}, {"status", status}, {"list", tcfd::to_json(e.list)}});
  }
  j["history"] = std::move(history);
  return j;
}

void GuidelineStore::save_locked() const {
  if (path_.empty()) return;
  atomic_write(path_, to_json_locked().dump(2) + "\n");
}

}  // namespace tcfd
