#include "cfq/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <cstring>

#include "cfq/error.hpp"
#include "cfq/rng.hpp"

namespace cfq {

double EmbeddingVector::l2_norm() const {
  double sum = 0.0;
  for (float v : values) sum += static_cast<double>(v) * v;
  return std::sqrt(sum);
}

void check_vector(const EmbeddingVector& vec) {
  for (float v : vec.values) {
    if (!std::isfinite(v)) {
      throw CfqError(ErrorKind::domain, "vector has a non-finite component");
    }
  }
  if (vec.normalized) {
    double norm = vec.l2_norm();
    if (norm < 1.0 - 1e-5 || norm > 1.0 + 1e-5) {
      throw CfqError(ErrorKind::domain,
                     "vector flagged normalized has norm " + std::to_string(norm));
    }
  }
}

EmbeddingVector normalized(EmbeddingVector vec) {
  double norm = vec.l2_norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw CfqError(ErrorKind::domain,
                   "cannot normalize a zero or non-finite vector");
  }
  for (float& v : vec.values) {
    v = static_cast<float>(static_cast<double>(v) / norm);
  }
  vec.normalized = true;
  return vec;
}

bool EmbeddingStore::contains(const std::string& id) const {
  return index_.contains(id);
}

EmbeddingVector EmbeddingStore::lookup(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) {
    throw CfqError(ErrorKind::lookup, "id '" + id + "' not in store");
  }
  auto r = row(it->second);
  EmbeddingVector vec;
  vec.values.assign(r.begin(), r.end());
  vec.normalized = true;
  return vec;
}

std::span<const float> EmbeddingStore::row(std::size_t index) const {
  return std::span<const float>(data_.data() + index * dimension_, dimension_);
}

bool EmbeddingStore::same_contents(const EmbeddingStore& other) const {
  return dimension_ == other.dimension_ && ids_ == other.ids_ &&
         data_.size() == other.data_.size() &&
         std::memcmp(data_.data(), other.data_.data(),
                     data_.size() * sizeof(float)) == 0;
}

EmbeddingStore build_store(
    const std::vector<std::pair<std::string, EmbeddingVector>>& records,
    const std::string& encoder_name) {
  EmbeddingStore store;
  store.encoder_name_ = encoder_name;

  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return records[a].first < records[b].first;
  });

  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const auto& [id, vec] = records[order[pos]];
    if (pos > 0 && id == records[order[pos - 1]].first) {
      throw CfqError(ErrorKind::duplicate, "id '" + id + "' given twice");
    }
    if (store.ids_.empty()) {
      if (vec.values.empty()) {
        throw CfqError(ErrorKind::domain, "empty vector for id '" + id + "'");
      }
      store.dimension_ = static_cast<std::uint32_t>(vec.dimension());
    } else if (vec.dimension() != store.dimension_) {
      throw CfqError(ErrorKind::mismatch,
                     "vector for id '" + id + "' has dimension " +
                         std::to_string(vec.dimension()) + ", store has " +
                         std::to_string(store.dimension_));
    }
    check_vector(vec);
    store.index_.emplace(id, store.ids_.size());
    store.ids_.push_back(id);
    store.data_.insert(store.data_.end(), vec.values.begin(), vec.values.end());
  }
  return store;
}

SyntheticProvider::SyntheticProvider(std::uint64_t seed, std::uint32_t dimension)
    : seed_(seed), dimension_(dimension) {
  if (dimension == 0) {
    throw CfqError(ErrorKind::config, "synthetic dimension must be positive");
  }
}

EmbeddingVector SyntheticProvider::embed_one(const std::string& text) const {
  // Keyed PRF: the stream is seeded by (seed, fnv1a(text)), so equal inputs
  // give bit-equal vectors in any process.
  SplitMix64 rng(seed_ ^ (fnv1a64(text) * 0x9e3779b97f4a7c15ULL));
  std::vector<double> raw(dimension_);
  double sum_sq = 0.0;
  for (std::uint32_t i = 0; i < dimension_; ++i) {
    raw[i] = rng.next_double() * 2.0 - 1.0;
    sum_sq += raw[i] * raw[i];
  }
  if (sum_sq <= 0.0) {
    raw[0] = 1.0;
    sum_sq = 1.0;
  }
  double inv = 1.0 / std::sqrt(sum_sq);
  EmbeddingVector vec;
  vec.values.resize(dimension_);
  for (std::uint32_t i = 0; i < dimension_; ++i) {
    vec.values[i] = static_cast<float>(raw[i] * inv);
  }
  vec.normalized = true;
  return vec;
}

std::vector<EmbeddingVector> SyntheticProvider::embed_texts(
    std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& text : texts) out.push_back(embed_one(text));
  return out;
}

std::vector<EmbeddingVector> SyntheticProvider::embed_images(
    std::span<const std::string> keys) {
  return embed_texts(keys);
}

std::string SyntheticProvider::name() const {
  return "synthetic(seed=" + std::to_string(seed_) +
         ",dim=" + std::to_string(dimension_) + ")";
}

StoreProvider::StoreProvider(EmbeddingStore store) : store_(std::move(store)) {}

std::vector<EmbeddingVector> StoreProvider::lookup_all(
    std::span<const std::string> keys) {
  std::vector<EmbeddingVector> out;
  out.reserve(keys.size());
  for (const auto& key : keys) out.push_back(store_.lookup(key));
  return out;
}

std::vector<EmbeddingVector> StoreProvider::embed_texts(
    std::span<const std::string> texts) {
  return lookup_all(texts);
}

std::vector<EmbeddingVector> StoreProvider::embed_images(
    std::span<const std::string> keys) {
  return lookup_all(keys);
}

std::string StoreProvider::name() const {
  return store_.encoder_name().empty() ? "store" : store_.encoder_name();
}

std::unique_ptr<EmbeddingProvider> make_provider(const std::string& spec) {
  if (spec.starts_with("synthetic:")) {
    std::uint64_t seed = 0;
    std::uint32_t dim = 0;
    std::string rest = spec.substr(10);
    for (std::size_t start = 0; start < rest.size();) {
      auto end = rest.find(',', start);
      if (end == std::string::npos) end = rest.size();
      std::string_view part(rest.data() + start, end - start);
      auto eq = part.find('=');
      if (eq != std::string_view::npos) {
        auto key = part.substr(0, eq);
        auto value = part.substr(eq + 1);
        auto parse_into = [&](auto& target) {
          auto [ptr, ec] =
              std::from_chars(value.data(), value.data() + value.size(), target);
          if (ec != std::errc() || ptr != value.data() + value.size()) {
            throw CfqError(ErrorKind::config,
                           "bad provider spec value '" + std::string(part) + "'");
          }
        };
        if (key == "seed") parse_into(seed);
        else if (key == "dim") parse_into(dim);
        else
          throw CfqError(ErrorKind::config,
                         "unknown provider spec key '" + std::string(key) + "'");
      }
      start = end + 1;
    }
    if (dim == 0) {
      throw CfqError(ErrorKind::config,
                     "synthetic provider spec needs dim=<positive>");
    }
    return std::make_unique<SyntheticProvider>(seed, dim);
  }
  std::string path = spec.starts_with("file:") ? spec.substr(5) : spec;
  return std::make_unique<StoreProvider>(load_store(path));
}

}  // namespace cfq
