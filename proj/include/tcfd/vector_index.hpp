#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tcfd/embedding.hpp"
#include "tcfd/ingestion.hpp"

namespace tcfd {

/// dot(a,b) / (|a||b|), accumulated in double.
double cosine_similarity(std::span<const float> a, std::span<const float> b);

struct ScoredChunk {
  DocumentChunk chunk;
  double score = 0.0;

  bool operator==(const ScoredChunk&) const = default;
};

/// Flat, exhaustively scanned per-report index. Rows are stored contiguously
/// in ascending source-number order; immutable once built.
class VectorIndex {
 public:
  VectorIndex() = default;
  VectorIndex(std::string doc_id, std::size_t dim, std::string embedder_id = {});

  /// Builds an index by embedding every chunk's text.
  static VectorIndex build(std::string doc_id, std::vector<DocumentChunk> chunks,
                           const EmbeddingBackend& backend);

  void add(DocumentChunk chunk, EmbeddingVector vector);

  const std::string& doc_id() const { return doc_id_; }
  const std::string& embedder_id() const { return embedder_id_; }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return chunks_.size(); }
  bool empty() const { return chunks_.empty(); }

  const std::vector<DocumentChunk>& chunks() const { return chunks_; }
  std::span<const float> vector(std::size_t row) const;
  std::span<const float> matrix() const { return data_; }
  std::span<const double> norms() const { return norms_; }

  /// nullptr when the source number is unknown.
  const DocumentChunk* find(std::size_t source_number) const;

  bool operator==(const VectorIndex& other) const;

 private:
  std::string doc_id_;
  std::string embedder_id_;
  std::size_t dim_ = 0;
  std::vector<DocumentChunk> chunks_;
  std::vector<float> data_;
  std::vector<double> norms_;
};

/// Best `k` chunks by cosine similarity, descending, ties by ascending
/// source number. Scoring runs on the OpenMP kernel.
std::vector<ScoredChunk> top_k(const VectorIndex& index, std::span<const float> query,
                               std::size_t k);

/// Binary layout, little-endian:
///   "TCFDIDX1" | u32 format version | u32 dim | u64 count
///   | count * dim float32 rows
///   | u64 json length | json {doc_id, embedder, chunks:[...]}
///   | 32-byte SHA-256 of everything before it
void save_index(const VectorIndex& index, const std::filesystem::path& path);
VectorIndex load_index(const std::filesystem::path& path);

std::string serialize_index(const VectorIndex& index);
VectorIndex deserialize_index(std::string_view bytes);

}  // namespace tcfd
