#include <gtest/gtest.h>

#include "test_support.hpp"
#include "tcfd/error.hpp"
#include "tcfd/retrieval.hpp"

using namespace tcfd;

namespace {

ScoredChunk scored(std::size_t source, std::string text, double score) {
  ScoredChunk s;
  s.chunk.source_number = source;
  s.chunk.text = std::move(text);
  s.score = score;
  return s;
}

// Blocks of "Content: " + 11 chars + "\nSource: N\n" are 31 chars; with the
// joining newline each further block adds 32 chars, i.e. exactly 8 tokens.
std::vector<ScoredChunk> ranked(std::size_t n) {
  std::vector<ScoredChunk> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(scored(i, "eleven char", 1.0 - 0.1 * double(i)));
  return out;
}

}  // namespace

TEST(FormatSources, SingleEntry) {
  EXPECT_EQ(format_sources({scored(7, "abc", 1)}), "Content: abc\nSource: 7\n");
}

TEST(FormatSources, RankOrderWithBlankLine) {
  EXPECT_EQ(format_sources({scored(3, "x", 0.9), scored(1, "y", 0.5)}),
            "Content: x\nSource: 3\n\nContent: y\nSource: 1\n");
}

TEST(FormatSources, ThreeChunkSnapshot) {
  const std::string expected =
      "Content: The board meets quarterly.\nSource: 12\n"
      "\n"
      "Content: Scope 1 fell 12%.\nSource: 40\n"
      "\n"
      "Content: Net zero by 2040.\nSource: 2\n";
  EXPECT_EQ(format_sources({scored(12, "The board meets quarterly.", 0.9), scored(40, "Scope 1 fell 12%.", 0.8),
                            scored(2, "Net zero by 2040.", 0.7)}),
            expected);
}

TEST(EstimateTokens, CharsOverFourRoundedUp) {
  EXPECT_EQ(estimate_tokens(""), 0u);
  EXPECT_EQ(estimate_tokens("12345678"), 2u);
  EXPECT_EQ(estimate_tokens("123456789"), 3u);
  EXPECT_EQ(estimate_tokens("\xC3\xA9\xC3\xA9\xC3\xA9\xC3\xA9"), 1u);  // code points, not bytes
}

TEST(TrimToBudget, HugeBudgetKeepsAll) {
  const auto ctx = trim_to_budget(ranked(5), 100, 100000, CharRatioEstimator{});
  EXPECT_EQ(ctx.entries.size(), 5u);
  EXPECT_EQ(ctx.retrieved, 5u);
  EXPECT_FALSE(ctx.budget_exceeded);
  EXPECT_EQ(ctx.estimated_tokens, 100u + estimate_tokens(ctx.formatted_text));
}

TEST(TrimToBudget, OverByOneChunkDropsLowest) {
  // Five blocks: 31 + 4*32 = 159 chars = 40 tokens; four: 127 chars = 32.
  ASSERT_EQ(estimate_tokens(format_sources(ranked(5))), 40u);
  ASSERT_EQ(estimate_tokens(format_sources(ranked(4))), 32u);
  const auto ctx = trim_to_budget(ranked(5), 10, 10 + 39, CharRatioEstimator{});
  ASSERT_EQ(ctx.entries.size(), 4u);
  EXPECT_EQ(ctx.sources(), (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_FALSE(ctx.budget_exceeded);
}

TEST(TrimToBudget, FloorOfOneChunk) {
  const auto ctx = trim_to_budget(ranked(5), 10, 3, CharRatioEstimator{});
  ASSERT_EQ(ctx.entries.size(), 1u);
  EXPECT_EQ(ctx.entries[0].chunk.source_number, 0u);
  EXPECT_TRUE(ctx.budget_exceeded);
}

TEST(TrimToBudget, EmptyRanking) {
  const auto ctx = trim_to_budget({}, 10, 100, CharRatioEstimator{});
  EXPECT_TRUE(ctx.entries.empty());
  EXPECT_EQ(ctx.formatted_text, "");
}

TEST(BuildContext, RetrievesAndTrims) {
  HashEmbeddingBackend e(64);
  const Document doc = tt::sample_report();
  const VectorIndex idx = tt::build_index(doc, e);
  const auto all = build_context(idx, "board oversight", e, 50, {20, 100000});
  EXPECT_EQ(all.entries.size(), idx.size());
  const auto small = build_context(idx, "board oversight", e, 50, {20, 200});
  EXPECT_EQ(small.entries.size(), 1u);
  EXPECT_EQ(small.entries[0].chunk.source_number, all.entries[0].chunk.source_number);
}

TEST(BuildContext, Errors) {
  HashEmbeddingBackend e(64);
  VectorIndex empty("d", 64, e.id());
  try {
    build_context(empty, "q", e, 0);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::EmptyIndex);
  }
  const VectorIndex idx = tt::build_index(tt::sample_report(), e);
  try {
    build_context(idx, "q", HashEmbeddingBackend(32), 0);
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), ErrorCode::DimensionMismatch);
  }
}
