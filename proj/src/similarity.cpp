#include "cfq/similarity.hpp"

#include <algorithm>
#include <cmath>

#include "cfq/error.hpp"

namespace cfq {

bool score_before(float score_a, const std::string& id_a, float score_b,
                  const std::string& id_b) {
  if (score_a != score_b) return score_a > score_b;
  return id_a < id_b;
}

SimilarityMatrix cosine_similarity(std::span<const EmbeddingVector> text_vecs,
                                   std::vector<std::string> row_keys,
                                   std::span<const EmbeddingVector> image_vecs,
                                   std::vector<std::string> col_ids) {
  if (text_vecs.size() != row_keys.size() ||
      image_vecs.size() != col_ids.size()) {
    throw CfqError(ErrorKind::contract, "key list does not match vector list");
  }
  std::size_t dim = 0;
  bool all_normalized = true;
  auto inspect = [&](const EmbeddingVector& vec) {
    if (dim == 0) dim = vec.dimension();
    if (vec.dimension() != dim) {
      throw CfqError(ErrorKind::config, "mixed vector dimensions");
    }
    all_normalized = all_normalized && vec.normalized;
  };
  for (const auto& vec : text_vecs) inspect(vec);
  for (const auto& vec : image_vecs) inspect(vec);

  std::vector<double> text_norms(text_vecs.size(), 1.0);
  std::vector<double> image_norms(image_vecs.size(), 1.0);
  if (!all_normalized) {
    auto norms_of = [](std::span<const EmbeddingVector> vecs,
                       std::vector<double>& out) {
      for (std::size_t i = 0; i < vecs.size(); ++i) {
        double norm = vecs[i].l2_norm();
        if (!(norm > 0.0)) {
          throw CfqError(ErrorKind::domain, "cosine undefined for zero vector");
        }
        out[i] = norm;
      }
    };
    norms_of(text_vecs, text_norms);
    norms_of(image_vecs, image_norms);
  }

  SimilarityMatrix matrix;
  matrix.row_keys = std::move(row_keys);
  matrix.col_ids = std::move(col_ids);
  matrix.values.resize(text_vecs.size() * image_vecs.size());

  for (std::size_t t = 0; t < text_vecs.size(); ++t) {
    const float* a = text_vecs[t].values.data();
    float* out_row = matrix.values.data() + t * image_vecs.size();
    for (std::size_t i = 0; i < image_vecs.size(); ++i) {
      const float* b = image_vecs[i].values.data();
      double acc = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        acc += static_cast<double>(a[d]) * static_cast<double>(b[d]);
      }
      if (!all_normalized) acc /= text_norms[t] * image_norms[i];
      out_row[i] = static_cast<float>(acc);
    }
  }
  return matrix;
}

std::vector<std::vector<std::size_t>> top_k_per_row(
    const SimilarityMatrix& matrix, std::size_t k) {
  if (k < 1) {
    throw CfqError(ErrorKind::contract, "top-k requires k >= 1");
  }
  std::size_t keep = std::min(k, matrix.cols());
  std::vector<std::vector<std::size_t>> out(matrix.rows());
  std::vector<std::size_t> order(matrix.cols());
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    auto row = matrix.row(r);
    for (std::size_t c = 0; c < order.size(); ++c) order[c] = c;
    auto cmp = [&](std::size_t a, std::size_t b) {
      return score_before(row[a], matrix.col_ids[a], row[b], matrix.col_ids[b]);
    };
    std::partial_sort(order.begin(),
                      order.begin() + static_cast<std::ptrdiff_t>(keep),
                      order.end(), cmp);
    out[r].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep));
  }
  return out;
}

}  // namespace cfq
