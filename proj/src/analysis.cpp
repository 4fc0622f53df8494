#include "tcfd/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <mutex>
#include <set>
#include <thread>
#include <tuple>

#include "tcfd/text.hpp"

namespace tcfd {

std::string_view to_string(AnalysisStatus s) {
  switch (s) {
    case AnalysisStatus::Complete: return "complete";
    case AnalysisStatus::Partial: return "partial";
    case AnalysisStatus::Failed: return "failed";
  }
  return "failed";
}

namespace {

AnalysisStatus parse_status(std::string_view s) {
  if (s == "complete") return AnalysisStatus::Complete;
  if (s == "partial") return AnalysisStatus::Partial;
  if (s == "failed") return AnalysisStatus::Failed;
  throw Error(ErrorCode::InvalidArgument, "unknown analysis status " + std::string(s));
}

ErrorCode parse_code(std::string_view name) {
  for (int c = 0; c <= static_cast<int>(ErrorCode::AnalysisFailed); ++c) {
    if (to_string(static_cast<ErrorCode>(c)) == name) return static_cast<ErrorCode>(c);
  }
  return ErrorCode::AnalysisFailed;
}

const TokenEstimator& estimator_of(const AnalysisDeps& deps) {
  static const CharRatioEstimator fallback;
  return deps.estimator ? *deps.estimator : fallback;
}

void check_deps(const AnalysisDeps& deps) {
  if (!deps.embedder || !deps.llm || !deps.templates) {
    throw Error(ErrorCode::InvalidArgument, "analysis needs an embedder, an LLM backend and templates");
  }
}

std::set<std::size_t> source_set(const ContextWindow& ctx) {
  const auto s = ctx.sources();
  return {s.begin(), s.end()};
}

// Runs `fn`, re-throwing failures tagged with `stage` unless already tagged.
template <typename Fn>
auto staged(std::string_view stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    if (!e.stage().empty()) throw;
    throw e.with_stage(std::string(stage));
  }
}

std::string complete_text(const RenderedPrompt& prompt, const AnalysisDeps& deps) {
  return complete(prompt, deps.settings.completion, *deps.llm).text;
}

}  // namespace

std::int64_t average_score_cents(std::span<const int> scores) {
  if (scores.empty()) return 0;
  std::int64_t sum = 0;
  for (const int s : scores) sum += s;
  const auto n = static_cast<std::int64_t>(scores.size());
  // round(sum * 100 / n) half-up, for non-negative sums.
  if (sum >= 0) return (sum * 200 + n) / (2 * n);
  return -((-sum * 200 + n - 1) / (2 * n));
}

std::string format_cents(std::int64_t cents) {
  const bool negative = cents < 0;
  const std::int64_t a = negative ? -cents : cents;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%lld.%02lld", negative ? "-" : "", static_cast<long long>(a / 100),
                static_cast<long long>(a % 100));
  return buf;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json to_json(const ReportAnalysis& a) {
  nlohmann::json answers = nlohmann::json::object();
  for (const auto& [i, ans] : a.answers) answers[std::to_string(i)] = to_json(ans);
  nlohmann::json conformity = nlohmann::json::object();
  for (const auto& [i, c] : a.conformity) conformity[std::to_string(i)] = to_json(c);
  nlohmann::json errors = nlohmann::json::array();
  for (const auto& e : a.errors) {
    errors.push_back({{"question_index", e.question_index}, {"stage", e.stage}, {"code", to_string(e.code)},
                      {"message", e.message}});
  }
  return {{"doc_id", a.doc_id},
          {"status", to_string(a.status)},
          {"mode", a.mode == AnswerMode::Summarization ? "summarization" : "question_answering"},
          {"basic_info", to_json(a.basic_info)},
          {"answers", answers},
          {"conformity", conformity},
          {"average_cents", a.average_cents},
          {"average_score", format_cents(a.average_cents)},
          {"guideline_version", a.guideline_version},
          {"created_at", a.created_at},
          {"errors", errors}};
}

ReportAnalysis report_analysis_from_json(const nlohmann::json& j) {
  try {
    ReportAnalysis a;
    a.doc_id = j.at("doc_id").get<std::string>();
    a.status = parse_status(j.at("status").get<std::string>());
    a.mode = j.value("mode", std::string("question_answering")) == "summarization" ? AnswerMode::Summarization
                                                                                     : AnswerMode::QuestionAnswering;
    a.basic_info = basic_info_from_json(j.at("basic_info"));
    for (const auto& [k, v] : j.at("answers").items()) a.answers[std::stoi(k)] = model_answer_from_json(v);
    for (const auto& [k, v] : j.at("conformity").items()) a.conformity[std::stoi(k)] = conformity_from_json(v);
    a.average_cents = j.at("average_cents").get<std::int64_t>();
    a.guideline_version = j.value("guideline_version", 1);
    a.created_at = j.value("created_at", std::string{});
    for (const auto& e : j.value("errors", nlohmann::json::array())) {
      a.errors.push_back({e.at("question_index").get<int>(), e.at("stage").get<std::string>(),
                          parse_code(e.at("code").get<std::string>()), e.value("message", std::string{})});
    }
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptIndex, std::string("invalid analysis record: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw Error(ErrorCode::CorruptIndex, std::string("invalid analysis record: ") + e.what());
  }
}

std::string serialize(const ReportAnalysis& a) { return to_json(a).dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// Pipeline steps

BasicInfo fetch_basic_info(const VectorIndex& index, const AnalysisDeps& deps) {
  check_deps(deps);
  return staged("basic_info", [&] {
    const auto& est = estimator_of(deps);
    const std::size_t overhead = prompt_overhead_tokens(deps.templates->get(TemplateId::BasicInfo), {}, est);
    const ContextWindow ctx =
        build_context(index, kBasicInfoQuery, *deps.embedder, overhead, deps.settings.retrieval, est);
    const RenderedPrompt prompt = render_basic_info_prompt(ctx, *deps.templates);
    return parse_basic_info_json(complete_text(prompt, deps));
  });
}

ModelAnswer summarize_tcfd(const VectorIndex& index, const TcfdQuestion& q, const BasicInfo& info,
                           const AnalysisDeps& deps) {
  check_deps(deps);
  return staged("answer", [&] {
    const auto& est = estimator_of(deps);
    const int len = deps.settings.answer_length;
    const bool summary = deps.settings.mode == AnswerMode::Summarization;
    std::map<std::string, std::string> bindings{{"basic_info", info.render()},
                                                {"guidelines", deps.guidelines.render_for_question(q, len)}};
    if (summary) {
      bindings["A_TCFD_recommendation"] = q.recommendation_text;
    } else {
      bindings["question_regarding_a_TCFD_recommendation"] = q.question_text;
    }
    const auto& tmpl = deps.templates->get(summary ? TemplateId::Summarization : TemplateId::Qa);
    const std::size_t overhead = prompt_overhead_tokens(tmpl, bindings, est);
    const ContextWindow ctx =
        build_context(index, q.question_text, *deps.embedder, overhead, deps.settings.retrieval, est);
    const RenderedPrompt prompt =
        summary ? render_summarization_prompt(info, q, ctx, deps.guidelines, len, *deps.templates)
                : render_qa_prompt(info, q, ctx, deps.guidelines, len, *deps.templates);
    ModelAnswer a = parse_answer_json(complete_text(prompt, deps), source_set(ctx));
    a.pages = cited_pages(a, index);
    return a;
  });
}

ConformityResult assess_conformity(const VectorIndex& index, const TcfdQuestion& q,
                                   std::string_view requirements, const AnalysisDeps& deps) {
  check_deps(deps);
  return staged("conformity", [&] {
    const auto& est = estimator_of(deps);
    const std::string req = requirements.empty() ? q.requirements : std::string(requirements);
    const std::size_t overhead = prompt_overhead_tokens(
        deps.templates->get(TemplateId::Conformity),
        {{"tcfd_recommendation", q.recommendation_text}, {"requirements", req}}, est);
    const ContextWindow ctx =
        build_context(index, q.question_text, *deps.embedder, overhead, deps.settings.retrieval, est);
    const RenderedPrompt prompt = render_conformity_prompt(q, req, ctx.formatted_text, *deps.templates);
    return parse_conformity_json(complete_text(prompt, deps), q.index);
  });
}

ModelAnswer answer_custom(const VectorIndex& index, std::string_view user_question, const BasicInfo& info,
                          const AnalysisDeps& deps) {
  check_deps(deps);
  if (text::trim(user_question).empty()) throw Error(ErrorCode::InvalidArgument, "question is empty", "cqa");
  if (index.empty()) throw Error(ErrorCode::EmptyIndex, "report index is empty", "cqa");
  return staged("cqa", [&] {
    const auto& est = estimator_of(deps);
    const int len = deps.settings.answer_length;
    const std::size_t overhead = prompt_overhead_tokens(
        deps.templates->get(TemplateId::Cqa),
        {{"basic_info", info.render()},
         {"question_regarding_a_TCFD_recommendation", std::string(user_question)},
         {"guidelines", deps.guidelines.render_for_custom(len)}},
        est);
    const ContextWindow ctx =
        build_context(index, user_question, *deps.embedder, overhead, deps.settings.retrieval, est);
    const RenderedPrompt prompt =
        render_cqa_prompt(info, user_question, ctx, deps.guidelines, len, *deps.templates);
    ModelAnswer a = parse_answer_json(complete_text(prompt, deps), source_set(ctx));
    a.pages = cited_pages(a, index);
    return a;
  });
}

std::vector<int> cited_pages(const ModelAnswer& answer, const VectorIndex& index) {
  const auto& order = answer.citation_order.empty() ? answer.cited_sources : answer.citation_order;
  std::vector<int> pages;
  for (const std::size_t s : order) {
    const DocumentChunk* c = index.find(s);
    if (!c) continue;
    if (std::find(pages.begin(), pages.end(), c->page_number) == pages.end()) pages.push_back(c->page_number);
  }
  return pages;
}

// ---------------------------------------------------------------------------
// Orchestration

namespace {

QuestionError error_record(int question_index, std::string_view fallback_stage, const std::exception& e) {
  if (const auto* te = dynamic_cast<const Error*>(&e)) {
    return {question_index, te->stage().empty() ? std::string(fallback_stage) : te->stage(), te->code(),
            te->what()};
  }
  return {question_index, std::string(fallback_stage), ErrorCode::AnalysisFailed, e.what()};
}

}  // namespace

ReportAnalysis analyze_report(const VectorIndex& index, const AnalysisDeps& deps) {
  check_deps(deps);
  if (!deps.questions) throw Error(ErrorCode::InvalidArgument, "analysis needs the question bank");
  if (index.empty()) throw Error(ErrorCode::EmptyIndex, "report index is empty", "analysis");

  ReportAnalysis out;
  out.doc_id = index.doc_id();
  out.mode = deps.settings.mode;
  out.guideline_version = deps.guidelines.version;
  out.created_at = deps.clock ? deps.clock() : utc_timestamp();

  try {
    out.basic_info = fetch_basic_info(index, deps);
  } catch (const std::exception& e) {
    out.basic_info = {"unknown", "unknown", "unknown"};
    out.errors.push_back(error_record(0, "basic_info", e));
  }

  std::vector<int> order;
  for (const auto& q : deps.questions->questions) order.push_back(q.index);
  std::sort(order.begin(), order.end());
  if (deps.settings.execution == Execution::SerialReversed) std::reverse(order.begin(), order.end());

  std::mutex mu;
  std::vector<QuestionError> errors;
  auto run_question = [&](int qi) {
    const TcfdQuestion& q = deps.questions->question(qi);
    std::optional<ModelAnswer> answer;
    std::optional<ConformityResult> score;
    std::vector<QuestionError> local_errors;
    try {
      answer = summarize_tcfd(index, q, out.basic_info, deps);
    } catch (const std::exception& e) {
      local_errors.push_back(error_record(qi, "answer", e));
    }
    try {
      score = assess_conformity(index, q, q.requirements, deps);
    } catch (const std::exception& e) {
      local_errors.push_back(error_record(qi, "conformity", e));
    }
    {
      std::lock_guard lock(mu);
      if (answer) out.answers[qi] = std::move(*answer);
      if (score) out.conformity[qi] = std::move(*score);
      errors.insert(errors.end(), local_errors.begin(), local_errors.end());
    }
    if (deps.on_progress) deps.on_progress(qi, local_errors.empty());
  };

  if (deps.settings.execution == Execution::Parallel && deps.settings.max_parallel > 1) {
    std::atomic<std::size_t> next{0};
    const std::size_t workers = std::min(deps.settings.max_parallel, order.size());
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (std::size_t i = next++; i < order.size(); i = next++) run_question(order[i]);
        });
      }
    }
  } else {
    for (const int qi : order) run_question(qi);
  }

  std::sort(errors.begin(), errors.end(), [](const QuestionError& a, const QuestionError& b) {
    return std::tie(a.question_index, a.stage) < std::tie(b.question_index, b.stage);
  });
  out.errors.insert(out.errors.end(), errors.begin(), errors.end());

  std::vector<int> scores;
  for (const auto& [qi, c] : out.conformity) scores.push_back(c.score);
  if (scores.empty()) {
    std::string detail = out.errors.empty() ? std::string("no questions") : out.errors.back().message;
    throw Error(ErrorCode::AnalysisFailed, "no question produced a conformity score: " + detail, "analysis");
  }
  out.average_cents = average_score_cents(scores);
  const bool complete_run = out.errors.empty() && out.answers.size() == order.size() &&
                            out.conformity.size() == order.size();
  out.status = complete_run ? AnalysisStatus::Complete : AnalysisStatus::Partial;
  return out;
}

}  // namespace tcfd
