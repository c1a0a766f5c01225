#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cfq/embedding.hpp"
#include "cfq/enhancer.hpp"
#include "cfq/similarity.hpp"
#include "cfq/types.hpp"

namespace cfq {

struct RetrievalConfig {
  std::size_t n_initial = 1000;  // initial candidate pool size
  std::size_t k1 = 15;           // stage-1 per-sentence keep count
  std::size_t k_final = 10;      // final result size
  RetrievalMode mode = RetrievalMode::baseline;
};

/// Throws a config error unless 1 <= k1 <= n_initial and k_final >= 1.
void check_config(const RetrievalConfig& config);

/// Evaluation image pool with embeddings computed once per run.
struct ImageIndex {
  std::vector<std::string> ids;
  std::vector<EmbeddingVector> vectors;

  std::size_t size() const { return ids.size(); }
};

ImageIndex build_image_index(EmbeddingProvider& provider,
                             std::vector<std::string> image_ids);

/// Stage-1 survivors: unique image ids in first-selection order plus, for
/// each id, the (batch, sentence) pairs that selected it (both 0-based).
struct CandidateSet {
  std::vector<std::string> ids;
  std::map<std::string, std::vector<std::pair<int, int>>> provenance;

  std::size_t size() const { return ids.size(); }
};

/// Per-image vote statistics over the pooled sentences: vote count, maximum
/// and mean similarity of the image's column.
struct VoteStats {
  int votes = 0;
  float max_sim = 0.0f;
  double mean_sim = 0.0;
};

using VoteTally = std::map<std::string, VoteStats>;

/// Per batch b, computes the batch-texts x pool cosine matrix, keeps each
/// sentence row's Top@k1 image ids, and unions everything across batches with
/// dedup. m <= B * n * k1.
CandidateSet stage1_filter(const EnhancedQuery& enhanced,
                           const ImageIndex& index,
                           EmbeddingProvider& provider,
                           const RetrievalConfig& config);

/// Tallies sentence-wise votes over a pooled-sentences x candidates matrix:
/// each row votes for its top-min(k_final, m) columns.
VoteTally tally_votes(const SimilarityMatrix& m_final, std::size_t k_final);

/// Ranks a tally by (votes desc, max_sim desc, mean_sim desc, id asc) and
/// keeps the first k_final entries.
std::vector<RankedEntry> rank_tally(const VoteTally& tally,
                                    std::size_t k_final);

/// Ranks candidates by (max_sim desc, mean_sim desc, id asc) — the no-vote
/// fusion used by enhanced_maxsim.
std::vector<RankedEntry> rank_by_max(const SimilarityMatrix& m_final,
                                     std::size_t k_final);

/// Re-scores the pooled sentences against the stage-1 candidates and applies
/// sentence-wise voting.
RetrievalResult stage2_rank(const EnhancedQuery& enhanced,
                            const CandidateSet& candidates,
                            const ImageIndex& index,
                            EmbeddingProvider& provider,
                            const RetrievalConfig& config);

/// Callable producing an EnhancedQuery for a query text; lets the pipeline
/// run against the real enhancer, a stub, or passthrough.
using EnhanceFn = std::function<EnhancedQuery(const std::string&)>;

/// Full per-query pipeline. baseline: plain top-k_final over the pool.
/// enhanced_maxsim: stage-1 filter, then max-similarity fusion.
/// enhanced_vote: stage-1 filter, then sentence-wise voting. Enhancement
/// failure in enhanced modes falls back to baseline and flags the result.
RetrievalResult retrieve(const QueryRecord& query, const ImageIndex& index,
                         EmbeddingProvider& provider,
                         const RetrievalConfig& config,
                         const EnhanceFn& enhancer);

}  // namespace cfq
