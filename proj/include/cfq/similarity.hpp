#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cfq/embedding.hpp"

namespace cfq {

/// texts x images cosine scores. Row-major; row/col key lists carry identity.
struct SimilarityMatrix {
  std::vector<std::string> row_keys;  // text keys
  std::vector<std::string> col_ids;   // image ids
  std::vector<float> values;          // row_keys.size() * col_ids.size()

  std::size_t rows() const { return row_keys.size(); }
  std::size_t cols() const { return col_ids.size(); }
  float at(std::size_t r, std::size_t c) const {
    return values[r * col_ids.size() + c];
  }
  std::span<const float> row(std::size_t r) const {
    return std::span<const float>(values.data() + r * col_ids.size(),
                                  col_ids.size());
  }
};

/// Entry (t, i) = dot(t, i) / (|t||i|); for pre-normalized inputs this is the
/// plain dot product. Zero vectors are a domain error. Pure; results do not
/// depend on scheduling.
SimilarityMatrix cosine_similarity(std::span<const EmbeddingVector> text_vecs,
                                   std::vector<std::string> row_keys,
                                   std::span<const EmbeddingVector> image_vecs,
                                   std::vector<std::string> col_ids);

/// Per-row Top@K selection. Each row yields min(k, cols) column indices
/// ordered by descending value, ties broken by ascending image id. Must match
/// a full descending sort with the same tie-break exactly.
std::vector<std::vector<std::size_t>> top_k_per_row(
    const SimilarityMatrix& matrix, std::size_t k);

/// Selection comparator used everywhere a row is ranked: value descending,
/// then image id ascending.
bool score_before(float score_a, const std::string& id_a, float score_b,
                  const std::string& id_b);

}  // namespace cfq
