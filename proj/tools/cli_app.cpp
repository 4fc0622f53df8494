#include "cli_app.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "tcfd/analysis.hpp"
#include "tcfd/config.hpp"
#include "tcfd/persistence.hpp"
#include "tcfd/promptlab.hpp"
#include "tcfd/service.hpp"
#include "tcfd/text.hpp"
#include "tcfd/traceability.hpp"

namespace tcfd::cli {

namespace {

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotFound: return kNotFound;
    case ErrorCode::BackendUnavailable:
    case ErrorCode::Timeout:
    case ErrorCode::RateLimited: return kBackend;
    case ErrorCode::MalformedOutput:
    case ErrorCode::MissingKey:
    case ErrorCode::ScoreOutOfRange:
    case ErrorCode::CompanySpecificGuideline:
    case ErrorCode::AnalysisFailed: return kModelOutput;
    case ErrorCode::IoFailure:
    case ErrorCode::CorruptIndex: return kStorage;
    case ErrorCode::Conflict:
    case ErrorCode::InvalidTransition:
    case ErrorCode::EmptyIndex: return kConflict;
    default: return kUsage;
  }
}

struct Options {
  std::string workspace;
  std::string config_file;
  std::string backend;
  std::string mock_script;
  bool json = false;
};

std::unique_ptr<Runtime> make_runtime(const Options& o) {
  Config c = Config::load(o.config_file.empty() ? std::nullopt : std::optional<std::filesystem::path>(o.config_file));
  if (!o.workspace.empty()) c.workspace = o.workspace;
  if (!o.backend.empty()) c.backend = o.backend;
  if (!o.mock_script.empty()) {
    c.mock_script = o.mock_script;
    if (o.backend.empty()) c.backend = "mock";
  }
  return Runtime::create(std::move(c));
}

AnalysisDeps make_deps(const Runtime& rt, const GuidelineList& guidelines) {
  AnalysisDeps d;
  d.embedder = rt.embedder.get();
  d.llm = rt.llm.get();
  d.questions = &rt.questions;
  d.guidelines = guidelines;
  d.templates = &rt.templates;
  d.settings = rt.analysis_settings();
  return d;
}

std::string read_input(const std::string& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::NotFound, "no such file: " + path);
  return read_file(path);
}

// The stored index, rebuilt when missing or made by another embedder.
VectorIndex index_for(Workspace& ws, const Runtime& rt, const std::string& doc_id) {
  if (!ws.has_document(doc_id)) throw Error(ErrorCode::NotFound, "no document " + doc_id + " in " + ws.root().string());
  if (ws.has_index(doc_id)) {
    VectorIndex index = ws.get_index(doc_id);
    if (index.embedder_id() == rt.embedder->id()) return index;
  }
  VectorIndex index = VectorIndex::build(
      doc_id, chunk_document(ws.get_document(doc_id), rt.config.chunk_size, rt.config.chunk_overlap), *rt.embedder);
  ws.put_index(doc_id, index);
  return index;
}

std::string join_numbers(const auto& values) {
  std::string out = "[";
  bool first = true;
  for (const auto v : values) {
    if (!first) out += ", ";
    out += std::to_string(v);
    first = false;
  }
  return out + "]";
}

std::string category_label(Category c) {
  switch (c) {
    case Category::Governance: return "Governance";
    case Category::Strategy: return "Strategy";
    case Category::RiskManagement: return "Risk Management";
    case Category::MetricsTargets: return "Metrics & Targets";
  }
  return "";
}

// ---------------------------------------------------------------------------
// Commands

int cmd_ingest(const Options& o, const std::string& path, const std::string& format_name, const std::string& title,
               std::ostream& out) {
  auto rt = make_runtime(o);
  Workspace ws(rt->config.workspace);
  InputFormat format = InputFormat::PageDelimitedText;
  if (!format_name.empty()) {
    format = parse_input_format(format_name);
  } else if (std::filesystem::path(path).extension() == ".pdf") {
    format = InputFormat::Pdf;
  }
  LoadOptions opts;
  opts.metadata["filename"] = std::filesystem::path(path).filename().string();
  if (!title.empty()) opts.metadata["title"] = title;
  const PdftotextExtractor pdf;
  if (format == InputFormat::Pdf) opts.extractor = &pdf;
  const Document doc = load_document(read_input(path), format, opts);
  const std::string doc_id = ws.put_document(doc);
  const VectorIndex index = index_for(ws, *rt, doc_id);
  if (o.json) {
    out << nlohmann::json{{"doc_id", doc_id}, {"pages", doc.pages.size()}, {"chunks", index.size()},
                          {"embedder", index.embedder_id()}}
               .dump(2)
        << '\n';
  } else {
    out << doc_id << '\n';
  }
  return kOk;
}

int cmd_analyze(const Options& o, const std::string& doc_id, const std::string& out_file, bool serial,
                std::ostream& out, std::ostream& err) {
  auto rt = make_runtime(o);
  Workspace ws(rt->config.workspace);
  const VectorIndex index = index_for(ws, *rt, doc_id);
  GuidelineStore guidelines(rt->questions.seed_guidelines, ws.guidelines_path());
  AnalysisDeps deps = make_deps(*rt, guidelines.active());
  if (serial) deps.settings.execution = Execution::Serial;
  const ReportAnalysis a = analyze_report(index, deps);
  const std::string name = ws.put_analysis(a);
  const std::string bytes = serialize(a);
  if (!out_file.empty()) atomic_write(out_file, bytes);

  if (o.json) {
    out << bytes;
  } else {
    out << "Company: " << a.basic_info.company_name << " (" << a.basic_info.sector << ", " << a.basic_info.location
        << ")\n";
    out << std::left << std::setw(5) << "Q" << std::setw(20) << "Category" << std::setw(7) << "Score"
        << "Sources\n";
    for (const auto& q : rt->questions.questions) {
      const auto c = a.conformity.find(q.index);
      const auto ans = a.answers.find(q.index);
      out << std::left << std::setw(5) << ("Q" + std::to_string(q.index)) << std::setw(20) << category_label(q.category)
          << std::setw(7) << (c != a.conformity.end() ? std::to_string(c->second.score) : "-")
          << (ans != a.answers.end() ? join_numbers(ans->second.citation_order) : "-") << '\n';
    }
    out << "Average: " << format_cents(a.average_cents) << '\n';
    out << "Status: " << to_string(a.status) << " (analysis " << name << ")\n";
  }
  for (const auto& e : a.errors) {
    err << "warning: question " << e.question_index << " " << e.stage << ": " << to_string(e.code) << ": "
        << e.message << '\n';
  }
  return kOk;
}

int cmd_ask(const Options& o, const std::string& doc_id, const std::string& question, std::ostream& out,
            std::ostream& err) {
  if (text::trim(question).empty()) {
    err << "error: the question must not be empty\n";
    return kUsage;
  }
  auto rt = make_runtime(o);
  Workspace ws(rt->config.workspace);
  const VectorIndex index = index_for(ws, *rt, doc_id);
  GuidelineStore guidelines(rt->questions.seed_guidelines, ws.guidelines_path());
  const AnalysisDeps deps = make_deps(*rt, guidelines.active());
  const BasicInfo info = ws.history(doc_id).empty() ? fetch_basic_info(index, deps)
                                                    : ws.get_latest_analysis(doc_id).basic_info;
  const ModelAnswer a = answer_custom(index, question, info, deps);
  if (o.json) {
    nlohmann::json j = to_json(a);
    j["question"] = question;
    out << j.dump(2) << '\n';
  } else {
    out << "Answer: " << a.answer_text << '\n';
    out << "Sources: " << join_numbers(a.citation_order) << '\n';
    out << "Pages: " << join_numbers(a.pages) << '\n';
  }
  for (const auto& w : a.warnings) err << "warning: " << w << '\n';
  return kOk;
}

int cmd_evaluate(const Options& o, const std::string& answers_path, const std::string& annotations_path,
                 std::ostream& out) {
  if (!std::filesystem::exists(answers_path)) throw Error(ErrorCode::NotFound, "no such file: " + answers_path);
  if (!std::filesystem::exists(annotations_path)) throw Error(ErrorCode::NotFound, "no such file: " + annotations_path);
  const auto answers = load_answers_jsonl(answers_path);
  const auto annotations = load_annotations_jsonl(annotations_path);
  const EvalSummary s = evaluation_run(answers, annotations);
  if (o.json) {
    out << to_json(s).dump(2) << '\n';
    return kOk;
  }
  char kappa[32];
  std::snprintf(kappa, sizeof kappa, "%.2f", s.kappa_content);
  out << "Answers: " << s.n_total << " (content supported " << s.n_content_supported << ", source honest "
      << s.n_source_honest << ", disputed " << s.n_disputed << ")\n";
  out << "Content: " << format_percent(s.content_free_rate) << "% Source: "
      << format_percent(s.source_free_rate_given_content) << "%\n";
  out << "ROUGE-1: " << format_percent(s.rouge1_p) << " ROUGE-2: " << format_percent(s.rouge2_p)
      << " ROUGE-L: " << format_percent(s.rougeL_p) << '\n';
  out << "Kappa: " << kappa << '\n';
  return kOk;
}

int cmd_evidence(const Options& o, const std::string& doc_id, const std::string& fragment, std::ostream& out) {
  auto rt = make_runtime(o);
  Workspace ws(rt->config.workspace);
  const VectorIndex index = index_for(ws, *rt, doc_id);
  const auto matches = locate_evidence(fragment, index.chunks());
  if (o.json) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& m : matches) j.push_back(to_json(m));
    out << j.dump(2) << '\n';
    return kOk;
  }
  for (const auto& m : matches) {
    const DocumentChunk* c = index.find(m.source_number);
    out << "Source " << m.source_number << " (page " << (c ? c->page_number : 0) << "): "
        << (c ? c->text.substr(m.start, m.end - m.start) : std::string{}) << '\n';
  }
  if (matches.empty()) out << "No matches\n";
  return kOk;
}

int cmd_check(const Options& o, std::ostream& out) {
  auto rt = make_runtime(o);
  Workspace ws(rt->config.workspace);
  const auto issues = ws.check();
  for (const auto& i : issues) out << i.kind << ' ' << i.path << '\n';
  if (issues.empty()) out << "ok\n";
  return issues.empty() ? kOk : kStorage;
}

service::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(const Options& o, const std::string& addr, std::ostream& out) {
  auto rt = make_runtime(o);
  std::string host = rt->config.listen_host;
  int port = rt->config.listen_port;
  if (!addr.empty()) {
    const auto colon = addr.rfind(':');
    if (colon == std::string::npos) throw Error(ErrorCode::InvalidArgument, "--addr must be host:port");
    host = addr.substr(0, colon);
    try {
      port = std::stoi(addr.substr(colon + 1));
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "--addr must be host:port");
    }
  }
  Workspace ws(rt->config.workspace);
  service::ServiceOptions opts;
  opts.log = &std::cerr;
  service::Service svc(*rt, ws, opts);
  service::HttpServer server(svc);
  const int bound = server.bind(host, port);
  out << "Listening on http://" << host << ':' << bound << " (workspace " << ws.root().string() << ", "
      << (rt->config.use_mock() ? "mock" : "http") << " backend)" << std::endl;
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.listen();
  g_server = nullptr;
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Analyze climate disclosure reports against the eleven TCFD recommendations."};
  app.name("tcfdlens");
  app.require_subcommand(1);
  app.fallthrough();  // global flags also accepted after the subcommand
  app.footer(
      "Environment: TCFD_WORKSPACE, TCFD_BACKEND (auto|mock|http), TCFD_MOCK_SCRIPT, TCFD_LLM_URL, TCFD_LLM_MODEL,\n"
      "TCFD_EMBED_URL, TCFD_EMBED_MODEL, TCFD_TOKEN_ENV, TCFD_SERVICE_KEY, TCFD_CHUNK_SIZE, TCFD_CHUNK_OVERLAP,\n"
      "TCFD_TOP_K, TCFD_TOKEN_BUDGET, TCFD_ANSWER_LENGTH. Without an API token the mock backend is used.\n"
      "Exit codes: 0 ok, 1 internal error, 2 usage or invalid input, 3 not found, 4 backend unavailable,\n"
      "5 unusable model output, 6 storage failure, 7 state conflict.");

  Options o;
  app.add_option("-w,--workspace", o.workspace, "Workspace directory (default: $TCFD_WORKSPACE or ./tcfd-workspace)");
  app.add_option("-c,--config", o.config_file, "JSON config file");
  app.add_option("--backend", o.backend, "auto, mock or http")->check(CLI::IsMember({"auto", "mock", "http"}));
  app.add_option("--mock-script", o.mock_script, "Scripted replies for the mock LLM backend (implies --backend mock)");
  app.add_flag("--json", o.json, "Machine-readable output");

  std::string path, format, title;
  auto* ingest = app.add_subcommand("ingest", "Load a report, store it and build its index; prints the doc_id");
  ingest->add_option("path", path, "Report file (text, page-delimited text with form feeds, or PDF)")->required();
  ingest->add_option("--format", format, "text, pages or pdf (default: from the file extension)");
  ingest->add_option("--title", title, "Display title");

  std::string doc_id, out_file;
  bool serial = false;
  auto* analyze = app.add_subcommand("analyze", "Answer and score all eleven questions; prints the average score");
  analyze->add_option("doc_id", doc_id, "Document id")->required();
  analyze->add_option("--out", out_file, "Also write the analysis JSON here");
  analyze->add_flag("--serial", serial, "Run the questions one after another");

  std::string question;
  auto* ask = app.add_subcommand("ask", "Ask a custom question about a report");
  ask->add_option("doc_id", doc_id, "Document id")->required();
  ask->add_option("question", question, "The question")->required();

  std::string answers, annotations;
  auto* evaluate = app.add_subcommand("evaluate", "Hallucination rates, ROUGE precision and kappa for annotated answers");
  evaluate->add_option("answers", answers, "answers.jsonl")->required();
  evaluate->add_option("annotations", annotations, "annotations.jsonl")->required();

  std::string fragment;
  auto* evidence = app.add_subcommand("evidence", "Find an answer fragment in the report's chunks");
  evidence->add_option("doc_id", doc_id, "Document id")->required();
  evidence->add_option("fragment", fragment, "Text to search for")->required();

  auto* check = app.add_subcommand("check", "Report workspace inconsistencies");

  std::string addr;
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--addr", addr, "host:port (default 127.0.0.1:8080)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*ingest) return cmd_ingest(o, path, format, title, out);
    if (*analyze) return cmd_analyze(o, doc_id, out_file, serial, out, err);
    if (*ask) return cmd_ask(o, doc_id, question, out, err);
    if (*evaluate) return cmd_evaluate(o, answers, annotations, out);
    if (*evidence) return cmd_evidence(o, doc_id, fragment, out);
    if (*check) return cmd_check(o, out);
    if (*serve) return cmd_serve(o, addr, out);
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what();
    if (!e.stage().empty()) err << " [" << e.stage() << "]";
    err << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace tcfd::cli
