#include <algorithm>
#include <cmath>

#include "tcfd/kernels.hpp"

namespace tcfd::kernels {

namespace {

double norm_of(const float* row, std::size_t dim) {
  double s = 0.0;
  for (std::size_t j = 0; j < dim; ++j) s += static_cast<double>(row[j]) * row[j];
  return std::sqrt(s);
}

}  // namespace

double dot_norm_cosine(const float* row, double row_norm, const float* query, double query_norm,
                       std::size_t dim) {
  if (row_norm == 0.0 || query_norm == 0.0) return 0.0;
  double dot = 0.0;
  for (std::size_t j = 0; j < dim; ++j) dot += static_cast<double>(row[j]) * query[j];
  const double c = dot / (row_norm * query_norm);
  return std::clamp(c, -1.0, 1.0);
}

std::vector<double> row_norms(std::span<const float> matrix, std::size_t dim) {
  const auto rows = static_cast<long>(dim == 0 ? 0 : matrix.size() / dim);
  std::vector<double> out(static_cast<std::size_t>(rows));
#pragma omp parallel for schedule(static)
  for (long i = 0; i < rows; ++i) {
    out[static_cast<std::size_t>(i)] = norm_of(matrix.data() + static_cast<std::size_t>(i) * dim, dim);
  }
  return out;
}

std::vector<double> cosine_scores(std::span<const float> matrix, std::span<const double> norms,
                                  std::size_t dim, std::span<const float> query) {
  const double qn = norm_of(query.data(), dim);
  const auto rows = static_cast<long>(norms.size());
  std::vector<double> out(norms.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    out[r] = dot_norm_cosine(matrix.data() + r * dim, norms[r], query.data(), qn, dim);
  }
  return out;
}

namespace serial {

std::vector<double> row_norms(std::span<const float> matrix, std::size_t dim) {
  const std::size_t rows = dim == 0 ? 0 : matrix.size() / dim;
  std::vector<double> out(rows);
  for (std::size_t i = 0; i < rows; ++i) out[i] = norm_of(matrix.data() + i * dim, dim);
  return out;
}

std::vector<double> cosine_scores(std::span<const float> matrix, std::span<const double> norms,
                                  std::size_t dim, std::span<const float> query) {
  const double qn = norm_of(query.data(), dim);
  std::vector<double> out(norms.size());
  for (std::size_t r = 0; r < norms.size(); ++r) {
    out[r] = dot_norm_cosine(matrix.data() + r * dim, norms[r], query.data(), qn, dim);
  }
  return out;
}

}  // namespace serial

}  // namespace tcfd::kernels
