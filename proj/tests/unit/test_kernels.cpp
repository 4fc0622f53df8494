#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"
#include "tcfd/error.hpp"
#include "tcfd/kernels.hpp"
#include "tcfd/traceability.hpp"

using namespace tcfd;

// The OpenMP and serial variants must agree bit for bit.

TEST(Kernels, CosineMatchesSerial) {
  std::mt19937 rng(5);
  std::normal_distribution<float> nd;
  for (const std::size_t dim : {1u, 7u, 64u}) {
    const std::size_t rows = 257;
    std::vector<float> m(rows * dim);
    for (auto& x : m) x = nd(rng);
    std::fill(m.begin(), m.begin() + dim, 0.0f);  // zero row scores 0
    std::vector<float> q(dim);
    for (auto& x : q) x = nd(rng);
    const auto norms = kernels::row_norms(m, dim);
    EXPECT_EQ(norms, kernels::serial::row_norms(m, dim));
    const auto par = kernels::cosine_scores(m, norms, dim, q);
    EXPECT_EQ(par, kernels::serial::cosine_scores(m, norms, dim, q));
    EXPECT_EQ(par[0], 0.0);
    for (const double s : par) {
      EXPECT_LE(s, 1.0 + 1e-12);
      EXPECT_GE(s, -1.0 - 1e-12);
    }
  }
}

TEST(Kernels, HashEmbedMatchesSerial) {
  std::mt19937 rng(6);
  std::vector<std::string> texts;
  for (int i = 0; i < 100; ++i) texts.push_back(tt::random_words(rng, 0, 40));
  const auto par = kernels::hash_embed(texts, 128);
  EXPECT_EQ(par, kernels::serial::hash_embed(texts, 128));
  for (std::size_t i = 0; i < texts.size(); ++i) {
    double n = 0;
    for (const float x : par[i]) n += static_cast<double>(x) * x;
    if (!texts[i].empty()) EXPECT_NEAR(n, 1.0, 1e-5) << i;
  }
}

TEST(Kernels, RougeBatchMatchesSerialAndScalar) {
  std::mt19937 rng(7);
  std::vector<kernels::RougePair> pairs;
  for (int i = 0; i < 120; ++i) pairs.push_back({tt::random_words(rng, 1, 25), tt::random_words(rng, 1, 60)});
  for (const auto v : {RougeVariant::R1, RougeVariant::R2, RougeVariant::RL}) {
    const auto par = kernels::rouge_precision_batch(pairs, v);
    EXPECT_EQ(par, kernels::serial::rouge_precision_batch(pairs, v));
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      EXPECT_EQ(par[i], rouge_precision(pairs[i].candidate, pairs[i].reference, v));
    }
  }
}

TEST(Kernels, RougeBatchPropagatesEmptyCandidate) {
  std::vector<kernels::RougePair> pairs(40, {"a b", "a"});
  pairs[17].candidate = "";
  EXPECT_THROW(kernels::rouge_precision_batch(pairs, RougeVariant::R1), Error);
  EXPECT_THROW(kernels::serial::rouge_precision_batch(pairs, RougeVariant::R1), Error);
}
