#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "tcfd/analysis.hpp"
#include "tcfd/embedding.hpp"
#include "tcfd/llm_gateway.hpp"
#include "tcfd/prompting.hpp"

namespace tcfd {

/// Settings from an optional JSON file, overridden by environment variables:
///
///   TCFD_WORKSPACE, TCFD_BACKEND (auto|mock|http), TCFD_MOCK_SCRIPT,
///   TCFD_LLM_URL, TCFD_LLM_MODEL, TCFD_EMBED_URL, TCFD_EMBED_MODEL,
///   TCFD_TOKEN_ENV (name of the variable holding the API token; default
///   OPENAI_API_KEY), TCFD_SERVICE_KEY, TCFD_CHUNK_SIZE, TCFD_CHUNK_OVERLAP,
///   TCFD_TOP_K, TCFD_TOKEN_BUDGET, TCFD_ANSWER_LENGTH
struct Config {
  std::filesystem::path workspace = "tcfd-workspace";
  std::string backend = "auto";
  std::filesystem::path mock_script;
  HttpEndpoint llm{"https://api.openai.com/v1", "gpt-3.5-turbo", "OPENAI_API_KEY"};
  HttpEndpoint embedding{"https://api.openai.com/v1", "text-embedding-ada-002", "OPENAI_API_KEY"};
  std::size_t http_embedding_dim = 1536;
  std::size_t mock_embedding_dim = 256;

  std::size_t chunk_size = 500;
  std::size_t chunk_overlap = 20;
  std::size_t top_k = 20;
  std::size_t budget_tokens = 4000;
  int answer_length = kDefaultAnswerLength;
  int max_output_tokens = 1024;
  int max_retries = 3;
  std::size_t max_parallel = 4;

  std::string listen_host = "127.0.0.1";
  int listen_port = 8080;
  std::string service_api_key;  // empty: no authentication

  std::filesystem::path templates_dir;   // empty: built-in templates
  std::filesystem::path questions_file;  // empty: built-in questions

  static Config load(const std::optional<std::filesystem::path>& file);
  void apply_json(const nlohmann::json& j);
  void apply_env();

  /// Mock backends when asked for, or in auto mode without an API token.
  bool use_mock() const;
};

/// Backends and data assembled from a Config.
struct Runtime {
  Config config;
  std::unique_ptr<EmbeddingBackend> embedder;
  std::unique_ptr<LlmBackend> llm;
  QuestionBank questions;
  TemplateSet templates;

  static std::unique_ptr<Runtime> create(Config config);
  AnalysisSettings analysis_settings() const;
};

}  // namespace tcfd
