#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <map>

#include "tcfd/error.hpp"
#include "tcfd/kernels.hpp"
#include "tcfd/text.hpp"

namespace tcfd::kernels {

namespace {

using Tokens = std::vector<std::string>;

std::map<std::vector<std::string_view>, std::size_t> ngram_counts(const Tokens& t, std::size_t n) {
  std::map<std::vector<std::string_view>, std::size_t> counts;
  for (std::size_t i = 0; i + n <= t.size(); ++i) {
    ++counts[std::vector<std::string_view>(t.begin() + static_cast<long>(i),
                                           t.begin() + static_cast<long>(i + n))];
  }
  return counts;
}

double clipped_precision(const Tokens& cand, const Tokens& ref, std::size_t n) {
  if (cand.size() < n) n = 1;  // too short for n-grams: fall back to unigrams
  const auto c = ngram_counts(cand, n);
  const auto r = ngram_counts(ref, n);
  std::size_t overlap = 0;
  for (const auto& [gram, count] : c) {
    const auto it = r.find(gram);
    if (it != r.end()) overlap += std::min(count, it->second);
  }
  return static_cast<double>(overlap) / static_cast<double>(cand.size() - n + 1);
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

double rouge_precision_one(std::string_view candidate, std::string_view reference, RougeVariant variant) {
  const Tokens cand = text::alnum_tokens(candidate);
  if (cand.empty()) throw Error(ErrorCode::EmptyCandidate, "candidate has no tokens");
  const Tokens ref = text::alnum_tokens(reference);
  switch (variant) {
    case RougeVariant::R1: return clipped_precision(cand, ref, 1);
    case RougeVariant::R2: return clipped_precision(cand, ref, 2);
    case RougeVariant::RL:
      return static_cast<double>(lcs_length(cand, ref)) / static_cast<double>(cand.size());
  }
  return 0.0;
}

std::vector<double> rouge_precision_batch(const std::vector<RougePair>& pairs, RougeVariant variant) {
  std::vector<double> out(pairs.size(), std::numeric_limits<double>::quiet_NaN());
  std::exception_ptr first_error;
  const auto n = static_cast<long>(pairs.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(i);
    try {
      out[r] = rouge_precision_one(pairs[r].candidate, pairs[r].reference, variant);
    } catch (...) {
#pragma omp critical(tcfd_rouge_error)
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

namespace serial {

std::vector<double> rouge_precision_batch(const std::vector<RougePair>& pairs, RougeVariant variant) {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(rouge_precision_one(p.candidate, p.reference, variant));
  return out;
}

}  // namespace serial

}  // namespace tcfd::kernels
