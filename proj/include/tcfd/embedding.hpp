#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace tcfd {

using EmbeddingVector = std::vector<float>;

/// Turns a batch of strings into equal-dimension vectors. Implementations
/// must be safe to call concurrently.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& batch) const = 0;
  virtual std::size_t dim() const = 0;
  /// Recorded in index files so queries use the same embedding space.
  virtual std::string id() const = 0;
};

/// Deterministic offline embedder: signed feature hashing of lowercase
/// alphanumeric unigrams and bigrams, L2-normalised. Sentinel strings map
/// to caller-chosen vectors, which tests use to pin exact geometry.
class HashEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit HashEmbeddingBackend(std::size_t dim = 256);

  void set_sentinel(std::string text, EmbeddingVector vector);

  std::vector<EmbeddingVector> embed(const std::vector<std::string>& batch) const override;
  std::size_t dim() const override { return dim_; }
  std::string id() const override;

 private:
  std::size_t dim_;
  std::map<std::string, EmbeddingVector, std::less<>> sentinels_;
};

struct HttpEndpoint {
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::string model;
  std::string token_env = "OPENAI_API_KEY";
  std::chrono::milliseconds timeout{60000};
};

/// OpenAI-compatible POST {base_url}/embeddings adapter.
class HttpEmbeddingBackend final : public EmbeddingBackend {
 public:
  HttpEmbeddingBackend(HttpEndpoint endpoint, std::size_t dim, std::size_t max_batch = 256);

  std::vector<EmbeddingVector> embed(const std::vector<std::string>& batch) const override;
  std::size_t dim() const override { return dim_; }
  std::string id() const override;

 private:
  HttpEndpoint endpoint_;
  std::size_t dim_;
  std::size_t max_batch_;
};

/// Validating front door: rejects empty batches, checks count and dimension
/// of what the backend returned, and rejects non-finite values.
std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts,
                                         const EmbeddingBackend& backend);

}  // namespace tcfd
