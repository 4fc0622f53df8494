#include "tcfd/embedding.hpp"

#include <cmath>

#include "tcfd/error.hpp"
#include "tcfd/kernels.hpp"

namespace tcfd {

HashEmbeddingBackend::HashEmbeddingBackend(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw Error(ErrorCode::InvalidArgument, "embedding dimension must be positive");
}

void HashEmbeddingBackend::set_sentinel(std::string text, EmbeddingVector vector) {
  if (vector.size() != dim_) {
    throw Error(ErrorCode::DimensionMismatch, "sentinel vector has dimension " +
                                                  std::to_string(vector.size()) + ", expected " +
                                                  std::to_string(dim_));
  }
  sentinels_[std::move(text)] = std::move(vector);
}

std::vector<EmbeddingVector> HashEmbeddingBackend::embed(const std::vector<std::string>& batch) const {
  std::vector<EmbeddingVector> out = kernels::hash_embed(batch, dim_);
  if (!sentinels_.empty()) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (const auto it = sentinels_.find(batch[i]); it != sentinels_.end()) out[i] = it->second;
    }
  }
  return out;
}

std::string HashEmbeddingBackend::id() const { return "hash-v1/" + std::to_string(dim_); }

std::vector<EmbeddingVector> embed_texts(const std::vector<std::string>& texts,
                                         const EmbeddingBackend& backend) {
  if (texts.empty()) throw Error(ErrorCode::EmptyBatch, "no texts to embed");
  std::vector<EmbeddingVector> vectors = backend.embed(texts);
  if (vectors.size() != texts.size()) {
    throw Error(ErrorCode::BackendUnavailable, "embedding backend returned " +
                                                   std::to_string(vectors.size()) + " vectors for " +
                                                   std::to_string(texts.size()) + " texts");
  }
  const std::size_t dim = backend.dim();
  for (const auto& v : vectors) {
    if (v.size() != dim) {
      throw Error(ErrorCode::DimensionMismatch, "embedding of dimension " + std::to_string(v.size()) +
                                                    ", expected " + std::to_string(dim));
    }
    for (const float x : v) {
      if (!std::isfinite(x)) throw Error(ErrorCode::InvalidArgument, "embedding contains non-finite values");
    }
  }
  return vectors;
}

}  // namespace tcfd
