#include <algorithm>
#include <cmath>

#include "tcfd/hashing.hpp"
#include "tcfd/kernels.hpp"
#include "tcfd/text.hpp"

namespace tcfd::kernels {

namespace {

void add_feature(std::string_view feature, float weight, std::size_t dim, float* out) {
  const std::uint64_t h = fnv1a64(feature);
  const std::size_t bucket = static_cast<std::size_t>(h % dim);
  const float sign = ((h >> 63) & 1U) ? -1.0F : 1.0F;
  out[bucket] += sign * weight;
}

}  // namespace

void hash_embed_one(const std::string& text, std::size_t dim, float* out) {
  std::fill(out, out + dim, 0.0F);
  const auto tokens = text::alnum_tokens(text);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    add_feature(tokens[i], 1.0F, dim, out);
    if (i + 1 < tokens.size()) add_feature(tokens[i] + ' ' + tokens[i + 1], 0.5F, dim, out);
  }
  double norm = 0.0;
  for (std::size_t j = 0; j < dim; ++j) norm += static_cast<double>(out[j]) * out[j];
  if (norm == 0.0) {
    // No tokens (or cancelling features): a fixed non-zero direction keeps
    // every text embeddable.
    out[static_cast<std::size_t>(fnv1a64(text) % dim)] = 1.0F;
    return;
  }
  const double inv = 1.0 / std::sqrt(norm);
  for (std::size_t j = 0; j < dim; ++j) out[j] = static_cast<float>(out[j] * inv);
}

std::vector<std::vector<float>> hash_embed(const std::vector<std::string>& texts, std::size_t dim) {
  std::vector<std::vector<float>> out(texts.size(), std::vector<float>(dim));
  const auto n = static_cast<long>(texts.size());
#pragma omp parallel for schedule(dynamic, 8)
  for (long i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(i);
    hash_embed_one(texts[r], dim, out[r].data());
  }
  return out;
}

namespace serial {

std::vector<std::vector<float>> hash_embed(const std::vector<std::string>& texts, std::size_t dim) {
  std::vector<std::vector<float>> out(texts.size(), std::vector<float>(dim));
  for (std::size_t r = 0; r < texts.size(); ++r) hash_embed_one(texts[r], dim, out[r].data());
  return out;
}

}  // namespace serial

}  // namespace tcfd::kernels
