#include "cfq/retrieval.hpp"

#include <algorithm>

#include "cfq/error.hpp"

namespace cfq {
namespace {

SimilarityMatrix score_texts(std::span<const std::string> texts,
                             const ImageIndex& index,
                             EmbeddingProvider& provider) {
  auto text_vecs = provider.embed_texts(texts);
  return cosine_similarity(text_vecs,
                           std::vector<std::string>(texts.begin(), texts.end()),
                           index.vectors, index.ids);
}

ImageIndex subset_index(const ImageIndex& index,
                        const std::vector<std::string>& ids) {
  // Candidates always come from the pool, so a linear id map is enough here.
  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < index.ids.size(); ++i) {
    position.emplace(index.ids[i], i);
  }
  ImageIndex out;
  out.ids = ids;
  out.vectors.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = position.find(id);
    if (it == position.end()) {
      throw CfqError(ErrorKind::lookup, "candidate '" + id + "' not in pool");
    }
    out.vectors.push_back(index.vectors[it->second]);
  }
  return out;
}

}  // namespace

void check_config(const RetrievalConfig& config) {
  if (config.k1 < 1 || config.k1 > config.n_initial) {
    throw CfqError(ErrorKind::config, "k1 must satisfy 1 <= k1 <= n_initial");
  }
  if (config.k_final < 1) {
    throw CfqError(ErrorKind::config, "k_final must be >= 1");
  }
}

ImageIndex build_image_index(EmbeddingProvider& provider,
                             std::vector<std::string> image_ids) {
  ImageIndex index;
  index.vectors = provider.embed_images(image_ids);
  index.ids = std::move(image_ids);
  return index;
}

CandidateSet stage1_filter(const EnhancedQuery& enhanced,
                           const ImageIndex& index,
                           EmbeddingProvider& provider,
                           const RetrievalConfig& config) {
  check_config(config);
  if (enhanced.batches.empty()) {
    throw CfqError(ErrorKind::contract, "enhanced query has no batches");
  }
  if (index.size() == 0) {
    throw CfqError(ErrorKind::contract, "image pool is empty");
  }

  CandidateSet out;
  for (std::size_t b = 0; b < enhanced.batches.size(); ++b) {
    const auto& batch = enhanced.batches[b];
    auto matrix = score_texts(batch, index, provider);
    auto tops = top_k_per_row(matrix, config.k1);
    for (std::size_t s = 0; s < tops.size(); ++s) {
      for (std::size_t col : tops[s]) {
        const auto& id = matrix.col_ids[col];
        auto [it, inserted] = out.provenance.try_emplace(id);
        if (inserted) out.ids.push_back(id);
        it->second.emplace_back(static_cast<int>(b), static_cast<int>(s));
      }
    }
  }
  return out;
}

VoteTally tally_votes(const SimilarityMatrix& m_final, std::size_t k_final) {
  VoteTally tally;
  for (std::size_t c = 0; c < m_final.cols(); ++c) {
    VoteStats stats;
    double sum = 0.0;
    float max_value = m_final.at(0, c);
    for (std::size_t r = 0; r < m_final.rows(); ++r) {
      float value = m_final.at(r, c);
      sum += value;
      if (value > max_value) max_value = value;
    }
    stats.max_sim = max_value;
    stats.mean_sim = sum / static_cast<double>(m_final.rows());
    tally.emplace(m_final.col_ids[c], stats);
  }
  auto tops = top_k_per_row(m_final, std::min(k_final, m_final.cols()));
  for (const auto& row : tops) {
    for (std::size_t col : row) {
      ++tally[m_final.col_ids[col]].votes;
    }
  }
  return tally;
}

std::vector<RankedEntry> rank_tally(const VoteTally& tally,
                                    std::size_t k_final) {
  std::vector<std::pair<std::string, VoteStats>> order(tally.begin(),
                                                       tally.end());
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.second.votes != b.second.votes) return a.second.votes > b.second.votes;
    if (a.second.max_sim != b.second.max_sim) {
      return a.second.max_sim > b.second.max_sim;
    }
    if (a.second.mean_sim != b.second.mean_sim) {
      return a.second.mean_sim > b.second.mean_sim;
    }
    return a.first < b.first;
  });
  std::vector<RankedEntry> out;
  out.reserve(std::min(k_final, order.size()));
  for (const auto& [id, stats] : order) {
    if (out.size() == k_final) break;
    out.push_back({id, stats.max_sim, stats.votes});
  }
  return out;
}

std::vector<RankedEntry> rank_by_max(const SimilarityMatrix& m_final,
                                     std::size_t k_final) {
  auto tally = tally_votes(m_final, k_final);
  std::vector<std::pair<std::string, VoteStats>> order(tally.begin(),
                                                       tally.end());
  std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
    if (a.second.max_sim != b.second.max_sim) {
      return a.second.max_sim > b.second.max_sim;
    }
    if (a.second.mean_sim != b.second.mean_sim) {
      return a.second.mean_sim > b.second.mean_sim;
    }
    return a.first < b.first;
  });
  std::vector<RankedEntry> out;
  out.reserve(std::min(k_final, order.size()));
  for (const auto& [id, stats] : order) {
    if (out.size() == k_final) break;
    out.push_back({id, stats.max_sim, std::nullopt});
  }
  return out;
}

RetrievalResult stage2_rank(const EnhancedQuery& enhanced,
                            const CandidateSet& candidates,
                            const ImageIndex& index,
                            EmbeddingProvider& provider,
                            const RetrievalConfig& config) {
  check_config(config);
  if (candidates.size() == 0) {
    throw CfqError(ErrorKind::contract, "candidate set is empty");
  }
  auto candidate_index = subset_index(index, candidates.ids);
  auto m_final = score_texts(enhanced.pooled, candidate_index, provider);

  RetrievalResult result;
  result.mode = RetrievalMode::enhanced_vote;
  result.candidate_set_size = candidates.size();
  result.ranked = rank_tally(tally_votes(m_final, config.k_final),
                             config.k_final);
  return result;
}

RetrievalResult retrieve(const QueryRecord& query, const ImageIndex& index,
                         EmbeddingProvider& provider,
                         const RetrievalConfig& config,
                         const EnhanceFn& enhancer) {
  check_config(config);
  if (index.size() == 0) {
    throw CfqError(ErrorKind::contract, "image pool is empty");
  }

  auto run_baseline = [&]() {
    std::vector<std::string> texts = {query.text};
    auto matrix = score_texts(texts, index, provider);
    auto tops = top_k_per_row(matrix, std::min(config.k_final, index.size()));
    RetrievalResult result;
    result.query_id = query.id;
    result.mode = RetrievalMode::baseline;
    result.candidate_set_size = index.size();
    for (std::size_t col : tops[0]) {
      result.ranked.push_back({matrix.col_ids[col], matrix.at(0, col),
                               std::nullopt});
    }
    return result;
  };

  if (config.mode == RetrievalMode::baseline) {
    return run_baseline();
  }

  EnhancedQuery enhanced;
  try {
    enhanced = enhancer(query.text);
  } catch (const CfqError& error) {
    // Exhausted generation (nothing usable after retries) degrades to the
    // baseline arm; infrastructure errors (cache miss offline, transport,
    // capability) are not enhancement failures and propagate.
    if (error.kind() != ErrorKind::empty_generation) throw;
    auto result = run_baseline();
    result.mode = config.mode;
    result.fell_back = true;
    return result;
  }

  auto candidates = stage1_filter(enhanced, index, provider, config);
  RetrievalResult result;
  if (config.mode == RetrievalMode::enhanced_vote) {
    result = stage2_rank(enhanced, candidates, index, provider, config);
  } else {
    auto candidate_index = subset_index(index, candidates.ids);
    auto m_final = score_texts(enhanced.pooled, candidate_index, provider);
    result.mode = RetrievalMode::enhanced_maxsim;
    result.candidate_set_size = candidates.size();
    result.ranked = rank_by_max(m_final, config.k_final);
  }
  result.query_id = query.id;
  return result;
}

}  // namespace cfq
