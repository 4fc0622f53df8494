#pragma once

// Data-parallel inner loops. Each kernel has an OpenMP implementation used
// by the library and a serial reference kept for tests and the benchmark.
// Both produce bit-identical results: every output element is computed by
// the same scalar code, only the iteration is distributed.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tcfd::kernels {

/// Row norms of a row-major matrix with `dim` columns.
std::vector<double> row_norms(std::span<const float> matrix, std::size_t dim);

/// Cosine of `query` against every row. Rows with zero norm score 0.
std::vector<double> cosine_scores(std::span<const float> matrix, std::span<const double> norms,
                                  std::size_t dim, std::span<const float> query);

/// Signed feature-hashing embedding of each text into `dim` buckets,
/// L2-normalised.
std::vector<std::vector<float>> hash_embed(const std::vector<std::string>& texts, std::size_t dim);

enum class RougeVariant { R1, R2, RL };

struct RougePair {
  std::string candidate;
  std::string reference;
};

/// ROUGE precision of each pair; throws EmptyCandidate like rouge_precision.
std::vector<double> rouge_precision_batch(const std::vector<RougePair>& pairs, RougeVariant variant);

namespace serial {
std::vector<double> row_norms(std::span<const float> matrix, std::size_t dim);
std::vector<double> cosine_scores(std::span<const float> matrix, std::span<const double> norms,
                                  std::size_t dim, std::span<const float> query);
std::vector<std::vector<float>> hash_embed(const std::vector<std::string>& texts, std::size_t dim);
std::vector<double> rouge_precision_batch(const std::vector<RougePair>& pairs, RougeVariant variant);
}  // namespace serial

// Scalar building blocks shared by both variants.
double dot_norm_cosine(const float* row, double row_norm, const float* query, double query_norm,
                       std::size_t dim);
void hash_embed_one(const std::string& text, std::size_t dim, float* out);
double rouge_precision_one(std::string_view candidate, std::string_view reference, RougeVariant variant);

}  // namespace tcfd::kernels
