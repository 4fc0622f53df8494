#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <regex>

#include "tcfd/analysis.hpp"
#include "tcfd/service.hpp"
#include "tcfd/text.hpp"
#include "tcfd/traceability.hpp"

namespace tcfd::service {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound: return 404;
    case ErrorCode::Conflict:
    case ErrorCode::InvalidTransition:
    case ErrorCode::EmptyIndex: return 409;
    case ErrorCode::BackendUnavailable:
    case ErrorCode::Timeout:
    case ErrorCode::RateLimited:
    case ErrorCode::MalformedOutput:
    case ErrorCode::MissingKey:
    case ErrorCode::ScoreOutOfRange:
    case ErrorCode::CompanySpecificGuideline:
    case ErrorCode::AnalysisFailed: return 502;
    case ErrorCode::IoFailure:
    case ErrorCode::CorruptIndex: return 500;
    default: return 400;
  }
}

nlohmann::json error_body(const Error& e) {
  return {{"code", to_string(e.code())}, {"message", e.what()}, {"stage", e.stage()}};
}

namespace {

ApiResponse json_response(int status, const nlohmann::json& body) { return {status, body.dump() + "\n"}; }

ApiResponse error_response(const Error& e) {
  const int status = e.stage() == "busy" ? 503 : http_status(e.code());
  return json_response(status, error_body(e));
}

nlohmann::json parse_body(const ApiRequest& r) {
  if (r.content_type.find("application/json") == std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, "expected Content-Type application/json", "request");
  }
  auto j = nlohmann::json::parse(r.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::InvalidArgument, "request body is not a JSON object", "request");
  return j;
}

std::vector<std::string> split_path(std::string_view path) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    std::size_t j = i;
    while (j < path.size() && path[j] != '/') ++j;
    if (j > i) out.emplace_back(path.substr(i, j - i));
    i = j;
  }
  return out;
}

// "abcd#q7" -> ("abcd", 7)
std::optional<std::pair<std::string, int>> parse_answer_id(const std::string& id) {
  static const std::regex re(R"(^([A-Za-z0-9_-]+)#q([0-9]{1,2})$)");
  std::smatch m;
  if (!std::regex_match(id, m, re)) return std::nullopt;
  const int q = std::stoi(m[2].str());
  if (q < 1 || q > 11) return std::nullopt;
  return std::make_pair(m[1].str(), q);
}

}  // namespace

Service::Service(Runtime& runtime, Workspace& workspace, ServiceOptions options)
    : rt_(runtime),
      ws_(workspace),
      options_(std::move(options)),
      feedback_(workspace.feedback_path()),
      guidelines_(runtime.questions.seed_guidelines, workspace.guidelines_path()),
      jobs_(options_.max_active_jobs) {}

Service::~Service() = default;

ApiResponse Service::dispatch(const ApiRequest& request) {
  const auto t0 = std::chrono::steady_clock::now();
  ApiResponse resp;
  if (!rt_.config.service_api_key.empty() && request.path != "/health") {
    const auto it = request.headers.find("x-api-key");
    if (it == request.headers.end() || it->second != rt_.config.service_api_key) {
      resp = json_response(401, {{"code", "Unauthorized"}, {"message", "missing or wrong X-API-Key"}, {"stage", "request"}});
    }
  }
  if (resp.body.empty()) {
    try {
      resp = route(request);
    } catch (const Error& e) {
      resp = error_response(e);
    } catch (const std::exception& e) {
      resp = json_response(500, {{"code", "Internal"}, {"message", e.what()}, {"stage", ""}});
    }
  }
  if (options_.log) {
    const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    const nlohmann::json line{{"ts", utc_timestamp()}, {"method", request.method}, {"path", request.path},
                              {"status", resp.status}, {"ms", std::round(ms * 10) / 10}};
    static std::mutex log_mutex;
    std::lock_guard lock(log_mutex);
    *options_.log << line.dump() << '\n';
  }
  return resp;
}

ApiResponse Service::route(const ApiRequest& r) {
  const auto seg = split_path(r.path);
  const auto& m = r.method;
  const std::size_t n = seg.size();
  if (m == "GET" && n == 1 && seg[0] == "health") return json_response(200, {{"status", "ok"}});
  if (n >= 1 && seg[0] == "reports") {
    if (n == 1 && m == "POST") return post_report(r);
    if (n == 1 && m == "GET") return list_reports();
    if (n == 3 && seg[2] == "analysis" && m == "GET") return get_analysis(seg[1]);
    if (n == 3 && seg[2] == "analyze" && m == "POST") return start_analysis(seg[1]);
    if (n == 3 && seg[2] == "questions" && m == "POST") return ask(seg[1], r);
    if (n == 3 && seg[2] == "evidence" && m == "GET") return evidence(seg[1], r);
  }
  if (n == 2 && seg[0] == "jobs" && m == "GET") return get_job(seg[1]);
  if (n == 1 && seg[0] == "feedback") {
    if (m == "POST") return post_feedback(r);
    if (m == "GET") return list_feedback(r);
  }
  if (n >= 1 && seg[0] == "guidelines") {
    if (n == 1 && m == "GET") return json_response(200, guidelines_.to_json());
    if (n == 3 && seg[1] == "transform" && m == "POST") return transform(seg[2], r);
    if (n == 3 && seg[1] == "promote" && m == "POST") return promote(seg[2]);
  }
  throw Error(ErrorCode::NotFound, "no route for " + m + " " + r.path, "request");
}

// ---------------------------------------------------------------------------
// Helpers

AnalysisDeps Service::deps(const GuidelineList& guidelines) const {
  AnalysisDeps d;
  d.embedder = rt_.embedder.get();
  d.llm = rt_.llm.get();
  d.questions = &rt_.questions;
  d.guidelines = guidelines;
  d.templates = &rt_.templates;
  d.settings = rt_.analysis_settings();
  d.clock = options_.clock;
  return d;
}

void Service::require_document(const std::string& doc_id) const {
  if (!ws_.has_document(doc_id)) throw Error(ErrorCode::NotFound, "no document " + doc_id, "request");
}

VectorIndex Service::require_index(const std::string& doc_id) const {
  require_document(doc_id);
  if (!ws_.has_index(doc_id)) {
    throw Error(ErrorCode::Conflict, "document " + doc_id + " is still being indexed", "request");
  }
  return ws_.get_index(doc_id);
}

BasicInfo Service::basic_info_for(const std::string& doc_id, const VectorIndex& index) {
  {
    std::lock_guard lock(info_mutex_);
    if (const auto it = info_cache_.find(doc_id); it != info_cache_.end()) return it->second;
  }
  BasicInfo info;
  if (!ws_.history(doc_id).empty()) {
    info = ws_.get_latest_analysis(doc_id).basic_info;
  } else {
    info = fetch_basic_info(index, deps(guidelines_.active()));
  }
  std::lock_guard lock(info_mutex_);
  info_cache_[doc_id] = info;
  return info;
}

// ---------------------------------------------------------------------------
// Reports

ApiResponse Service::post_report(const ApiRequest& r) {
  std::string raw = r.body;
  InputFormat format = InputFormat::PageDelimitedText;
  LoadOptions opts;
  const auto& ct = r.content_type;
  if (ct.find("application/json") != std::string::npos) {
    const auto j = parse_body(r);
    if (j.contains("pages")) {
      raw.clear();
      const auto& pages = j.at("pages");
      for (std::size_t i = 0; i < pages.size(); ++i) {
        if (i) raw += '\f';
        raw += pages[i].get<std::string>();
      }
    } else {
      raw = j.value("text", std::string{});
    }
    if (j.contains("title")) opts.metadata["title"] = j.at("title").get<std::string>();
  } else if (ct.find("application/pdf") != std::string::npos) {
    format = InputFormat::Pdf;
  } else if (!ct.empty() && ct.find("text/plain") == std::string::npos) {
    throw Error(ErrorCode::UnsupportedFormat, "unsupported Content-Type " + ct, "ingestion");
  }
  if (const auto it = r.query.find("title"); it != r.query.end()) opts.metadata["title"] = it->second;
  if (const auto it = r.query.find("filename"); it != r.query.end()) opts.metadata["filename"] = it->second;

  const PdftotextExtractor pdf;
  if (format == InputFormat::Pdf) opts.extractor = &pdf;
  Document doc = [&] {
    try {
      return load_document(raw, format, opts);
    } catch (const Error& e) {
      throw e.with_stage("ingestion");
    }
  }();
  const std::string doc_id = ws_.put_document(std::move(doc));

  const std::size_t size = rt_.config.chunk_size;
  const std::size_t overlap = rt_.config.chunk_overlap;
  const JobHandle job = jobs_.start(JobKind::Ingest, doc_id, 1, [this, doc_id, size, overlap](const JobContext& ctx) {
    if (!ws_.has_index(doc_id) || ws_.get_index(doc_id).embedder_id() != rt_.embedder->id()) {
      const Document d = ws_.get_document(doc_id);
      ws_.put_index(doc_id, VectorIndex::build(doc_id, chunk_document(d, size, overlap), *rt_.embedder));
    }
    ctx.advance(1);
    return JobState::Complete;
  });
  return json_response(202, {{"doc_id", doc_id}, {"job_id", job.job_id}});
}

ApiResponse Service::list_reports() {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : ws_.list_documents()) {
    out.push_back({{"doc_id", e.doc_id}, {"title", e.title}, {"created_at", e.created_at},
                   {"has_index", e.has_index}, {"analyses", e.analyses}});
  }
  return json_response(200, {{"reports", out}});
}

ApiResponse Service::get_analysis(const std::string& doc_id) {
  require_document(doc_id);
  return {200, ws_.get_latest_analysis_bytes(doc_id)};
}

ApiResponse Service::start_analysis(const std::string& doc_id) {
  require_document(doc_id);
  if (auto running = jobs_.active(doc_id, JobKind::Analyze)) return json_response(202, to_json(*running));
  if (!ws_.has_index(doc_id)) {
    throw Error(ErrorCode::Conflict, "document " + doc_id + " is still being indexed", "analysis");
  }
  const GuidelineList snapshot = guidelines_.active();
  const int total = static_cast<int>(rt_.questions.questions.size());
  const JobHandle job = jobs_.start(JobKind::Analyze, doc_id, total, [this, doc_id, snapshot](const JobContext& ctx) {
    const VectorIndex index = ws_.get_index(doc_id);
    AnalysisDeps d = deps(snapshot);
    auto done = std::make_shared<std::atomic<int>>(0);
    d.on_progress = [done, &ctx](int, bool) { ctx.advance(++*done); };
    const ReportAnalysis a = analyze_report(index, d);
    ws_.put_analysis(a);
    {
      std::lock_guard lock(info_mutex_);
      info_cache_[doc_id] = a.basic_info;
    }
    return a.status == AnalysisStatus::Complete ? JobState::Complete : JobState::Partial;
  });
  return json_response(202, to_json(job));
}

ApiResponse Service::get_job(const std::string& job_id) {
  const auto h = jobs_.get(job_id);
  if (!h) throw Error(ErrorCode::NotFound, "no job " + job_id, "request");
  return json_response(200, to_json(*h));
}

ApiResponse Service::ask(const std::string& doc_id, const ApiRequest& r) {
  const auto body = parse_body(r);
  const std::string question = text::trim(body.value("question", std::string{}));
  if (question.empty()) throw Error(ErrorCode::InvalidArgument, "question is empty", "request");
  const VectorIndex index = require_index(doc_id);
  const BasicInfo info = basic_info_for(doc_id, index);
  const ModelAnswer a = answer_custom(index, question, info, deps(guidelines_.active()));
  nlohmann::json j = to_json(a);
  j["question"] = question;
  return json_response(200, j);
}

ApiResponse Service::evidence(const std::string& doc_id, const ApiRequest& r) {
  const auto it = r.query.find("fragment");
  if (it == r.query.end()) throw Error(ErrorCode::InvalidArgument, "missing fragment parameter", "request");
  require_document(doc_id);
  std::vector<DocumentChunk> chunks;
  if (ws_.has_index(doc_id)) {
    chunks = ws_.get_index(doc_id).chunks();
  } else {
    chunks = chunk_document(ws_.get_document(doc_id), rt_.config.chunk_size, rt_.config.chunk_overlap);
  }
  nlohmann::json out = nlohmann::json::array();
  for (const auto& m : locate_evidence(it->second, chunks)) {
    nlohmann::json j = to_json(m);
    const auto ch = std::find_if(chunks.begin(), chunks.end(),
                                 [&](const DocumentChunk& c) { return c.source_number == m.source_number; });
    if (ch != chunks.end()) j["page"] = ch->page_number;
    out.push_back(j);
  }
  return json_response(200, {{"matches", out}});
}

// ---------------------------------------------------------------------------
// Feedback and guidelines

ApiResponse Service::post_feedback(const ApiRequest& r) {
  const auto body = parse_body(r);
  FeedbackRecord fb;
  fb.answer_id = body.value("answer_id", std::string{});
  fb.expert_id = body.value("expert_id", std::string("anonymous"));
  fb.feedback_text = body.contains("text") ? body.value("text", std::string{}) : body.value("feedback_text", std::string{});
  if (body.contains("question_index") && !body["question_index"].is_null()) {
    fb.question_index = body["question_index"].get<int>();
  } else if (const auto parsed = parse_answer_id(fb.answer_id)) {
    fb.question_index = parsed->second;
  }
  fb.original_prompt = body.value("original_prompt", std::string{});
  fb.old_response = body.value("old_response", std::string{});
  if (fb.answer_id.empty()) throw Error(ErrorCode::InvalidArgument, "answer_id is required", "request");
  return json_response(201, to_json(feedback_.record_feedback(std::move(fb))));
}

ApiResponse Service::list_feedback(const ApiRequest& r) {
  std::optional<FeedbackStatus> status;
  if (const auto it = r.query.find("status"); it != r.query.end()) status = parse_feedback_status(it->second);
  nlohmann::json out = nlohmann::json::array();
  for (const auto& f : feedback_.list_feedback(status)) out.push_back(to_json(f));
  return json_response(200, {{"feedback", out}});
}

ApiResponse Service::transform(const std::string& feedback_id, const ApiRequest& r) {
  const auto fb = feedback_.get(feedback_id);
  if (!fb) throw Error(ErrorCode::NotFound, "no feedback " + feedback_id, "request");
  if (fb->status != FeedbackStatus::Pending) {
    throw Error(ErrorCode::InvalidTransition, "feedback " + feedback_id + " is already " + std::string(to_string(fb->status)),
                "prompt_engineering");
  }
  FeedbackContext context{fb->original_prompt, fb->old_response, {}};
  if (const auto target = parse_answer_id(fb->answer_id)) {
    const auto& [doc_id, qi] = *target;
    if (ws_.has_document(doc_id) && !ws_.history(doc_id).empty()) {
      const ReportAnalysis analysis = ws_.get_latest_analysis(doc_id);
      context.company_name = analysis.basic_info.company_name;
      const auto answer = analysis.answers.find(qi);
      if (context.old_response.empty() && answer != analysis.answers.end()) {
        context.old_response = serialize_answer_payload(answer->second);
      }
      if (context.original_prompt.empty() && ws_.has_index(doc_id)) {
        // Rebuild the prompt the answer was generated from.
        const auto used = guidelines_.version(analysis.guideline_version);
        const AnalysisDeps d = deps(used ? *used : guidelines_.active());
        const VectorIndex index = ws_.get_index(doc_id);
        const TcfdQuestion& q = rt_.questions.question(qi);
        const CharRatioEstimator est;
        const std::map<std::string, std::string> bindings{
            {"basic_info", analysis.basic_info.render()},
            {"question_regarding_a_TCFD_recommendation", q.question_text},
            {"guidelines", d.guidelines.render_for_question(q, d.settings.answer_length)}};
        const std::size_t overhead = prompt_overhead_tokens(rt_.templates.get(TemplateId::Qa), bindings, est);
        const ContextWindow ctx = build_context(index, q.question_text, *rt_.embedder, overhead, d.settings.retrieval, est);
        context.original_prompt =
            render_qa_prompt(analysis.basic_info, q, ctx, d.guidelines, d.settings.answer_length, rt_.templates).text;
      }
    }
  }
  if (context.original_prompt.empty() || context.old_response.empty()) {
    throw Error(ErrorCode::Conflict,
                "cannot reconstruct the prompt and answer for " + fb->answer_id +
                    "; submit feedback with original_prompt and old_response",
                "prompt_engineering");
  }
  GuidelineScope scope = GuidelineScope::general();
  if (!r.body.empty()) {
    const auto body = parse_body(r);
    if (body.value("scope", std::string("general")) == "specific") {
      if (!fb->question_index) throw Error(ErrorCode::InvalidArgument, "specific scope needs a question index", "request");
      scope = GuidelineScope::specific(*fb->question_index);
    }
  }
  const GuidelineList current = guidelines_.active();
  CompletionParams params = rt_.analysis_settings().completion;
  const std::string guideline = feedback_to_guideline(*fb, current, context, *rt_.llm, params, rt_.templates);
  const GuidelineList draft = guidelines_.append(guideline, scope, "feedback:" + fb->feedback_id);
  const FeedbackRecord updated = feedback_.transition(fb->feedback_id, FeedbackStatus::Transformed, draft.version);
  return json_response(200, {{"guideline", guideline},
                             {"version", draft.version},
                             {"active_version", guidelines_.active_version()},
                             {"feedback", to_json(updated)}});
}

ApiResponse Service::promote(const std::string& version) {
  int v = 0;
  try {
    std::size_t used = 0;
    v = std::stoi(version, &used);
    if (used != version.size()) throw std::invalid_argument(version);
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, "version must be an integer", "request");
  }
  guidelines_.promote(v);
  return json_response(200, guidelines_.to_json());
}

// ---------------------------------------------------------------------------
// HTTP transport

void Service::mount(httplib::Server& server) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    ApiRequest r;
    r.method = req.method;
    r.path = req.path;
    r.content_type = req.get_header_value("Content-Type");
    r.body = req.body;
    for (const auto& [k, v] : req.params) r.query[k] = v;
    for (const auto& [k, v] : req.headers) {
      std::string key = k;
      std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
      r.headers[key] = v;
    }
    if (req.is_multipart_form_data()) {
      if (!req.has_file("file")) {
        res.status = 400;
        res.set_content(error_body(Error(ErrorCode::InvalidArgument, "multipart upload needs a 'file' part", "request")).dump(),
                        "application/json");
        return;
      }
      const auto file = req.get_file_value("file");
      r.body = file.content;
      r.content_type = file.content_type.empty() ? "text/plain" : file.content_type;
      if (!file.filename.empty()) r.query.emplace("filename", file.filename);
    }
    const ApiResponse out = dispatch(r);
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };
  const std::string any = R"(/.*)";
  server.Get(any, handler);
  server.Post(any, handler);
  server.Put(any, handler);
  server.Delete(any, handler);
}

HttpServer::HttpServer(Service& service) : server_(std::make_unique<httplib::Server>()) {
  service.mount(*server_);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return server_->bind_to_any_port(host);
  if (!server_->bind_to_port(host, port)) {
    throw Error(ErrorCode::IoFailure, "cannot listen on " + host + ":" + std::to_string(port), "service");
  }
  return port;
}

void HttpServer::listen() { server_->listen_after_bind(); }

void HttpServer::stop() {
  if (server_) server_->stop();
}

}  // namespace tcfd::service
