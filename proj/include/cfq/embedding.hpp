#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace cfq {

/// Fixed-dimension 32-bit real vector. `normalized` records that the L2 norm
/// is 1 within 1e-5; all similarity kernels require it.
struct EmbeddingVector {
  std::vector<float> values;
  bool normalized = false;

  std::size_t dimension() const { return values.size(); }
  double l2_norm() const;

  bool operator==(const EmbeddingVector&) const = default;
};

/// Validates no NaN/Inf components and the norm flag; throws on violation.
void check_vector(const EmbeddingVector& vec);

/// Scales to unit L2 norm. Zero vectors are rejected (domain error) rather
/// than patched.
EmbeddingVector normalized(EmbeddingVector vec);

/// Immutable id -> vector index with one shared dimension. Ids are unique and
/// kept in ascending (byte-wise) order; vector storage is one contiguous
/// row-major block in id order. Provenance metadata is build-time information
/// and is not persisted in the binary file format.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;

  std::uint32_t dimension() const { return dimension_; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::string& encoder_name() const { return encoder_name_; }

  bool contains(const std::string& id) const;

  /// Returns the stored vector; lookup error naming the id when absent.
  EmbeddingVector lookup(const std::string& id) const;

  /// Raw row access for kernels; id order.
  std::span<const float> row(std::size_t index) const;
  const std::vector<float>& data() const { return data_; }

  bool same_contents(const EmbeddingStore& other) const;

  friend EmbeddingStore build_store(
      const std::vector<std::pair<std::string, EmbeddingVector>>& records,
      const std::string& encoder_name);
  friend EmbeddingStore load_store(const std::filesystem::path& path);

 private:
  std::uint32_t dimension_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> data_;  // size() * dimension_, id order
  std::unordered_map<std::string, std::size_t> index_;
  std::string encoder_name_;
};

/// Builds a store from id/vector pairs. Errors: duplicate id, inconsistent
/// dimension, zero or non-finite vectors.
EmbeddingStore build_store(
    const std::vector<std::pair<std::string, EmbeddingVector>>& records,
    const std::string& encoder_name = "");

/// Binary store file: magic "CFQE", u16 LE version, u32 LE dimension,
/// u64 LE count, id table (u32 LE length + UTF-8 bytes, ascending id order),
/// then count*dimension IEEE-754 LE floats in id-table order.
void save_store(const EmbeddingStore& store, const std::filesystem::path& path);
EmbeddingStore load_store(const std::filesystem::path& path);

/// Uniform interface over the three embedding sources. Texts and images are
/// both embedded from strings: texts by their content, images by id (file
/// store) or uri (remote encoder). Implementations are thread-safe.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::vector<EmbeddingVector> embed_texts(
      std::span<const std::string> texts) = 0;
  virtual std::vector<EmbeddingVector> embed_images(
      std::span<const std::string> keys) = 0;

  virtual std::uint32_t dimension() const = 0;
  virtual std::string name() const = 0;
};

/// Deterministic test encoder: components come from a keyed pseudo-random
/// function of (seed, input string), then unit normalization. Same (seed,
/// text) gives the same vector in any process.
class SyntheticProvider : public EmbeddingProvider {
 public:
  SyntheticProvider(std::uint64_t seed, std::uint32_t dimension);

  std::vector<EmbeddingVector> embed_texts(
      std::span<const std::string> texts) override;
  std::vector<EmbeddingVector> embed_images(
      std::span<const std::string> keys) override;

  std::uint32_t dimension() const override { return dimension_; }
  std::string name() const override;

  EmbeddingVector embed_one(const std::string& text) const;

 private:
  std::uint64_t seed_;
  std::uint32_t dimension_;
};

/// File-backed provider: looks each string up as an id in the store.
class StoreProvider : public EmbeddingProvider {
 public:
  explicit StoreProvider(EmbeddingStore store);

  std::vector<EmbeddingVector> embed_texts(
      std::span<const std::string> texts) override;
  std::vector<EmbeddingVector> embed_images(
      std::span<const std::string> keys) override;

  std::uint32_t dimension() const override { return store_.dimension(); }
  std::string name() const override;

  const EmbeddingStore& store() const { return store_; }

 private:
  std::vector<EmbeddingVector> lookup_all(std::span<const std::string> keys);
  EmbeddingStore store_;
};

struct RemoteEncoderConfig {
  std::string endpoint;        // e.g. http://host:port/embed
  std::string api_key;         // sent as Authorization: Bearer when non-empty
  std::uint32_t dimension = 0; // expected dimension; 0 = accept first response
  int timeout_seconds = 30;
  int max_retries = 2;
  std::size_t batch_size = 64;
};

/// HTTP encoder client. POSTs {"texts": [...]} or {"image_uris": [...]} and
/// expects {"vectors": [[...], ...]}. Retries transport failures up to
/// max_retries with backoff; a dimension mismatch against the configured
/// dimension is a configuration error.
class RemoteProvider : public EmbeddingProvider {
 public:
  explicit RemoteProvider(RemoteEncoderConfig config);

  std::vector<EmbeddingVector> embed_texts(
      std::span<const std::string> texts) override;
  std::vector<EmbeddingVector> embed_images(
      std::span<const std::string> keys) override;

  std::uint32_t dimension() const override { return config_.dimension; }
  std::string name() const override { return "remote"; }

 private:
  std::vector<EmbeddingVector> request(std::span<const std::string> items,
                                       const char* field);
  RemoteEncoderConfig config_;
};

/// Parses a provider spec string: "synthetic:seed=S,dim=D" or a path to a
/// store file (optionally prefixed "file:").
std::unique_ptr<EmbeddingProvider> make_provider(const std::string& spec);

}  // namespace cfq
