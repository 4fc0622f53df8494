#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "tcfd/embedding.hpp"
#include "tcfd/vector_index.hpp"

namespace tcfd {

class TokenEstimator {
 public:
  virtual ~TokenEstimator() = default;
  virtual std::size_t count(std::string_view text) const = 0;
};

/// ceil(code points / 4).
class CharRatioEstimator final : public TokenEstimator {
 public:
  std::size_t count(std::string_view text) const override;
};

std::size_t estimate_tokens(std::string_view text);
std::size_t estimate_tokens(std::string_view text, const TokenEstimator& estimator);

/// "Content: {text}\nSource: {n}\n" per entry, blank line between entries.
std::string format_sources(const std::vector<ScoredChunk>& entries);

struct ContextWindow {
  std::vector<ScoredChunk> entries;  // retrieval-rank order
  std::string formatted_text;
  std::size_t estimated_tokens = 0;  // prompt overhead + formatted context
  std::size_t retrieved = 0;         // entries before trimming
  bool budget_exceeded = false;      // one chunk left and still over budget

  std::vector<std::size_t> sources() const;
};

struct RetrievalParams {
  std::size_t k = 20;
  std::size_t budget_tokens = 4000;
};

/// Drops the lowest-ranked entries of `ranked` until overhead + context fits
/// the budget or one entry remains.
ContextWindow trim_to_budget(std::vector<ScoredChunk> ranked, std::size_t prompt_overhead_tokens,
                             std::size_t budget_tokens, const TokenEstimator& estimator);

ContextWindow build_context(const VectorIndex& index, std::string_view query_text,
                            const EmbeddingBackend& backend, std::size_t prompt_overhead_tokens,
                            const RetrievalParams& params = {},
                            const TokenEstimator& estimator = CharRatioEstimator{});

}  // namespace tcfd
