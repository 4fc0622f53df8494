#include <cstdlib>

#include <httplib.h>

#include "http_util.hpp"
#include "tcfd/error.hpp"
#include "tcfd/llm_gateway.hpp"

namespace tcfd {

namespace detail {

SplitUrl split_url(const std::string& url) {
  const std::size_t scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, "URL without scheme: " + url);
  }
  const std::size_t path_start = url.find('/', scheme_end + 3);
  SplitUrl out;
  if (path_start == std::string::npos) {
    out.origin = url;
  } else {
    out.origin = url.substr(0, path_start);
    out.path_prefix = url.substr(path_start);
    while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  }
  return out;
}

nlohmann::json post_json(const HttpEndpoint& endpoint, const std::string& path,
                         const nlohmann::json& body, std::chrono::milliseconds timeout) {
  const SplitUrl url = split_url(endpoint.base_url);
  httplib::Client client(url.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers headers;
  if (!endpoint.token_env.empty()) {
    if (const char* token = std::getenv(endpoint.token_env.c_str()); token && *token) {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }
  const auto res = client.Post(url.path_prefix + path, headers, body.dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    const ErrorCode code = (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout)
                               ? ErrorCode::Timeout
                               : ErrorCode::BackendUnavailable;
    throw Error(code, "request to " + url.origin + url.path_prefix + path +
                          " failed: " + httplib::to_string(err));
  }
  if (res->status == 429) throw Error(ErrorCode::RateLimited, "rate limited by " + url.origin);
  if (res->status == 408 || res->status == 504) {
    throw Error(ErrorCode::Timeout, "upstream timeout (" + std::to_string(res->status) + ")");
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorCode::BackendUnavailable,
                "HTTP " + std::to_string(res->status) + " from " + url.origin + ": " + res->body.substr(0, 200));
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BackendUnavailable, std::string("unparseable backend reply: ") + e.what());
  }
}

}  // namespace detail

HttpEmbeddingBackend::HttpEmbeddingBackend(HttpEndpoint endpoint, std::size_t dim, std::size_t max_batch)
    : endpoint_(std::move(endpoint)), dim_(dim), max_batch_(max_batch == 0 ? 1 : max_batch) {}

std::string HttpEmbeddingBackend::id() const { return "http/" + endpoint_.model + "/" + std::to_string(dim_); }

std::vector<EmbeddingVector> HttpEmbeddingBackend::embed(const std::vector<std::string>& batch) const {
  std::vector<EmbeddingVector> out;
  out.reserve(batch.size());
  for (std::size_t begin = 0; begin < batch.size(); begin += max_batch_) {
    const std::size_t end = std::min(batch.size(), begin + max_batch_);
    nlohmann::json input = nlohmann::json::array();
    for (std::size_t i = begin; i < end; ++i) input.push_back(batch[i]);
    const nlohmann::json reply = detail::post_json(
        endpoint_, "/embeddings", {{"model", endpoint_.model}, {"input", std::move(input)}}, endpoint_.timeout);
    try {
      std::vector<EmbeddingVector> part(end - begin);
      for (const auto& item : reply.at("data")) {
        const auto idx = item.value("index", std::size_t{0});
        if (idx >= part.size()) throw Error(ErrorCode::BackendUnavailable, "embedding index out of range");
        part[idx] = item.at("embedding").get<EmbeddingVector>();
      }
      for (auto& v : part) {
        if (v.size() != dim_) {
          throw Error(ErrorCode::DimensionMismatch, "embedding of dimension " + std::to_string(v.size()) +
                                                        ", expected " + std::to_string(dim_));
        }
        out.push_back(std::move(v));
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::BackendUnavailable, std::string("unexpected embeddings reply: ") + e.what());
    }
  }
  return out;
}

HttpLlmBackend::HttpLlmBackend(HttpEndpoint endpoint) : endpoint_(std::move(endpoint)) {}

std::string HttpLlmBackend::complete(std::string_view prompt, const CompletionParams& params) const {
  const std::string model = params.model_id.empty() ? endpoint_.model : params.model_id;
  nlohmann::json body = {
      {"model", model},
      {"temperature", params.temperature},
      {"max_tokens", params.max_output_tokens},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", std::string(prompt)}}})},
  };
  const nlohmann::json reply = detail::post_json(endpoint_, "/chat/completions", body, params.timeout);
  try {
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::BackendUnavailable, std::string("unexpected completion reply: ") + e.what());
  }
}

}  // namespace tcfd
