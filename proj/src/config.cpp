#include "tcfd/config.hpp"

#include <cstdlib>
#include <fstream>

#include "tcfd/error.hpp"

namespace tcfd {

namespace {

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

std::size_t env_size(const char* name, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long n = std::stoll(value, &used);
    if (used != value.size() || n < 0) throw std::invalid_argument(name);
    return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, std::string(name) + " must be a non-negative integer, got '" + value + "'");
  }
}

void apply_endpoint(HttpEndpoint& e, const nlohmann::json& j) {
  e.base_url = j.value("url", e.base_url);
  e.model = j.value("model", e.model);
  e.token_env = j.value("token_env", e.token_env);
  if (j.contains("timeout_ms")) e.timeout = std::chrono::milliseconds(j.at("timeout_ms").get<long long>());
}

}  // namespace

Config Config::load(const std::optional<std::filesystem::path>& file) {
  Config c;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open config " + file->string());
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::InvalidArgument, "config is not a JSON object: " + file->string());
    c.apply_json(j);
  }
  c.apply_env();
  return c;
}

void Config::apply_json(const nlohmann::json& j) {
  try {
    if (j.contains("workspace")) workspace = j.at("workspace").get<std::string>();
    backend = j.value("backend", backend);
    if (j.contains("mock_script")) mock_script = j.at("mock_script").get<std::string>();
    if (j.contains("llm")) apply_endpoint(llm, j.at("llm"));
    if (j.contains("embedding")) apply_endpoint(embedding, j.at("embedding"));
    http_embedding_dim = j.value("http_embedding_dim", http_embedding_dim);
    mock_embedding_dim = j.value("mock_embedding_dim", mock_embedding_dim);
    chunk_size = j.value("chunk_size", chunk_size);
    chunk_overlap = j.value("chunk_overlap", chunk_overlap);
    top_k = j.value("top_k", top_k);
    budget_tokens = j.value("budget_tokens", budget_tokens);
    answer_length = j.value("answer_length", answer_length);
    max_output_tokens = j.value("max_output_tokens", max_output_tokens);
    max_retries = j.value("max_retries", max_retries);
    max_parallel = j.value("max_parallel", max_parallel);
    listen_host = j.value("listen_host", listen_host);
    listen_port = j.value("listen_port", listen_port);
    service_api_key = j.value("service_api_key", service_api_key);
    if (j.contains("templates_dir")) templates_dir = j.at("templates_dir").get<std::string>();
    if (j.contains("questions_file")) questions_file = j.at("questions_file").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("invalid config: ") + e.what());
  }
}

void Config::apply_env() {
  if (auto v = env("TCFD_WORKSPACE")) workspace = *v;
  if (auto v = env("TCFD_BACKEND")) backend = *v;
  if (auto v = env("TCFD_MOCK_SCRIPT")) mock_script = *v;
  if (auto v = env("TCFD_LLM_URL")) llm.base_url = *v;
  if (auto v = env("TCFD_LLM_MODEL")) llm.model = *v;
  if (auto v = env("TCFD_EMBED_URL")) embedding.base_url = *v;
  if (auto v = env("TCFD_EMBED_MODEL")) embedding.model = *v;
  if (auto v = env("TCFD_TOKEN_ENV")) llm.token_env = embedding.token_env = *v;
  if (auto v = env("TCFD_SERVICE_KEY")) service_api_key = *v;
  if (auto v = env("TCFD_CHUNK_SIZE")) chunk_size = env_size("TCFD_CHUNK_SIZE", *v);
  if (auto v = env("TCFD_CHUNK_OVERLAP")) chunk_overlap = env_size("TCFD_CHUNK_OVERLAP", *v);
  if (auto v = env("TCFD_TOP_K")) top_k = env_size("TCFD_TOP_K", *v);
  if (auto v = env("TCFD_TOKEN_BUDGET")) budget_tokens = env_size("TCFD_TOKEN_BUDGET", *v);
  if (auto v = env("TCFD_ANSWER_LENGTH")) answer_length = static_cast<int>(env_size("TCFD_ANSWER_LENGTH", *v));
}

bool Config::use_mock() const {
  if (backend == "mock") return true;
  if (backend == "http") return false;
  if (backend != "auto") throw Error(ErrorCode::InvalidArgument, "backend must be auto, mock or http, got '" + backend + "'");
  return !env(llm.token_env.c_str()).has_value();
}

std::unique_ptr<Runtime> Runtime::create(Config config) {
  auto rt = std::make_unique<Runtime>();
  rt->config = std::move(config);
  const Config& c = rt->config;
  if (c.use_mock()) {
    rt->embedder = std::make_unique<HashEmbeddingBackend>(c.mock_embedding_dim);
    rt->llm = c.mock_script.empty() ? std::make_unique<ScriptedLlmBackend>()
                                    : std::make_unique<ScriptedLlmBackend>(ScriptedLlmBackend::load(c.mock_script));
  } else {
    rt->embedder = std::make_unique<HttpEmbeddingBackend>(c.embedding, c.http_embedding_dim);
    rt->llm = std::make_unique<HttpLlmBackend>(c.llm);
  }
  rt->questions = c.questions_file.empty() ? QuestionBank::builtin() : QuestionBank::load(c.questions_file);
  rt->templates = c.templates_dir.empty() ? TemplateSet::builtin() : TemplateSet::load(c.templates_dir);
  return rt;
}

AnalysisSettings Runtime::analysis_settings() const {
  AnalysisSettings s;
  s.retrieval.k = config.top_k;
  s.retrieval.budget_tokens = config.budget_tokens;
  s.answer_length = config.answer_length;
  s.completion.model_id = config.llm.model;
  s.completion.max_output_tokens = config.max_output_tokens;
  s.completion.max_retries = config.max_retries;
  s.completion.timeout = config.llm.timeout;
  s.max_parallel = config.max_parallel;
  return s;
}

}  // namespace tcfd
