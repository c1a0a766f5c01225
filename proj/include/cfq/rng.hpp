#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace cfq {

/// Minimal deterministic PRNG. Unlike <random> distributions, every draw is
/// fully specified here, so seeded outputs are identical across platforms,
/// compilers, and standard libraries.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, bound). Plain modulo; bias is irrelevant next to the
  /// determinism requirement.
  std::uint64_t bounded(std::uint64_t bound) { return next() % bound; }

  /// Uniform double in [0, 1).
  double next_double() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t state_;
};

/// FNV-1a 64-bit hash of a byte string.
inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

/// Seeded uniform draw of `count` items without replacement. Input order
/// defines the index space; callers pass ids sorted lexicographically to make
/// the draw reproducible. Selected items are returned in draw order.
template <typename T>
std::vector<T> sample_without_replacement(std::vector<T> items,
                                          std::size_t count,
                                          std::uint64_t seed) {
  SplitMix64 rng(seed);
  if (count > items.size()) count = items.size();
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.bounded(items.size() - i));
    std::swap(items[i], items[j]);
  }
  items.resize(count);
  return items;
}

}  // namespace cfq
