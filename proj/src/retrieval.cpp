#include "tcfd/retrieval.hpp"

#include "tcfd/error.hpp"
#include "tcfd/text.hpp"

namespace tcfd {

std::size_t CharRatioEstimator::count(std::string_view text) const {
  return (text::code_point_count(text) + 3) / 4;
}

std::size_t estimate_tokens(std::string_view text) { return CharRatioEstimator{}.count(text); }

std::size_t estimate_tokens(std::string_view text, const TokenEstimator& estimator) {
  return estimator.count(text);
}

std::string format_sources(const std::vector<ScoredChunk>& entries) {
  std::string out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (i > 0) out.push_back('\n');
    out += "Content: ";
    out += entries[i].chunk.text;
    out += "\nSource: ";
    out += std::to_string(entries[i].chunk.source_number);
    out.push_back('\n');
  }
  return out;
}

std::vector<std::size_t> ContextWindow::sources() const {
  std::vector<std::size_t> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.chunk.source_number);
  return out;
}

ContextWindow trim_to_budget(std::vector<ScoredChunk> ranked, std::size_t prompt_overhead_tokens,
                             std::size_t budget_tokens, const TokenEstimator& estimator) {
  ContextWindow ctx;
  ctx.retrieved = ranked.size();
  ctx.entries = std::move(ranked);
  ctx.formatted_text = format_sources(ctx.entries);
  ctx.estimated_tokens = prompt_overhead_tokens + estimator.count(ctx.formatted_text);
  // Ranked order is score descending with ascending source ties, so the
  // back is always the lowest score / highest source number.
  while (ctx.estimated_tokens > budget_tokens && ctx.entries.size() > 1) {
    ctx.entries.pop_back();
    ctx.formatted_text = format_sources(ctx.entries);
    ctx.estimated_tokens = prompt_overhead_tokens + estimator.count(ctx.formatted_text);
  }
  ctx.budget_exceeded = ctx.estimated_tokens > budget_tokens;
  return ctx;
}

ContextWindow build_context(const VectorIndex& index, std::string_view query_text,
                            const EmbeddingBackend& backend, std::size_t prompt_overhead_tokens,
                            const RetrievalParams& params, const TokenEstimator& estimator) {
  if (index.empty()) throw Error(ErrorCode::EmptyIndex, "no indexed chunks to retrieve from");
  if (!index.embedder_id().empty() && index.embedder_id() != backend.id()) {
    throw Error(ErrorCode::DimensionMismatch, "index was built with embedder '" + index.embedder_id() +
                                                  "' but queries use '" + backend.id() + "'");
  }
  const auto query = embed_texts({std::string(query_text)}, backend);
  return trim_to_budget(top_k(index, query.front(), params.k), prompt_overhead_tokens,
                        params.budget_tokens, estimator);
}

}  // namespace tcfd
