#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cfq {

/// The five query granularities, from global to local. Unknown labels in
/// input files are rejected at parse time.
enum class GranularityLevel {
  caption,
  imagery_tag,
  phrase,
  triple,
  fragment,
};

/// Canonical report ordering of the granularities.
inline constexpr std::array<GranularityLevel, 5> kGranularityOrder = {
    GranularityLevel::caption,   GranularityLevel::imagery_tag,
    GranularityLevel::phrase,    GranularityLevel::triple,
    GranularityLevel::fragment,
};

std::string_view to_string(GranularityLevel level);
GranularityLevel granularity_from_string(std::string_view label);

/// Position in kGranularityOrder; report sort key.
inline std::size_t granularity_rank(GranularityLevel level) {
  return static_cast<std::size_t>(level);
}

enum class RetrievalMode {
  baseline,
  enhanced_maxsim,
  enhanced_vote,
};

inline constexpr std::array<RetrievalMode, 3> kModeOrder = {
    RetrievalMode::baseline,
    RetrievalMode::enhanced_maxsim,
    RetrievalMode::enhanced_vote,
};

std::string_view to_string(RetrievalMode mode);
RetrievalMode mode_from_string(std::string_view label);

/// Position in kModeOrder; report sort key.
inline std::size_t mode_rank(RetrievalMode mode) {
  return static_cast<std::size_t>(mode);
}

/// Catalog entry for an image. The engine never decodes pixels; the uri is an
/// opaque locator handed to external encoders.
struct ImageRecord {
  std::string id;
  std::string uri;
  std::optional<std::string> embedding_id;

  bool operator==(const ImageRecord&) const = default;
};

/// A granularity-labeled query with a one-to-many ground-truth image set.
/// true_image_ids is kept sorted and unique (set semantics).
struct QueryRecord {
  std::string id;
  std::string text;
  GranularityLevel granularity = GranularityLevel::caption;
  std::vector<std::string> true_image_ids;

  bool operator==(const QueryRecord&) const = default;
};

struct DatasetManifest {
  std::vector<ImageRecord> images;
  std::vector<QueryRecord> queries;
  std::map<std::string, std::string> metadata;

  bool operator==(const DatasetManifest&) const = default;
};

/// One failed manifest invariant. record_id names the offending record and
/// rule the violated invariant.
struct Violation {
  std::string record_id;
  std::string rule;
  std::string message;

  bool operator==(const Violation&) const = default;
};

/// Checks referential integrity and per-record invariants. Returns an empty
/// list iff the manifest is valid. Output is deterministic: sorted by record
/// id, then rule name.
std::vector<Violation> validate_manifest(const DatasetManifest& manifest);

/// One entry of a ranked retrieval list. votes is only set in vote mode.
struct RankedEntry {
  std::string image_id;
  float score = 0.0f;
  std::optional<int> votes;

  bool operator==(const RankedEntry&) const = default;
};

/// Final output of a retrieval run for one query. candidate_set_size is the
/// stage-1 survivor count m (the pool size in baseline mode). fell_back is
/// set when an enhanced mode degraded to baseline after an enhancement
/// failure.
struct RetrievalResult {
  std::string query_id;
  RetrievalMode mode = RetrievalMode::baseline;
  std::vector<RankedEntry> ranked;
  std::size_t candidate_set_size = 0;
  bool fell_back = false;
};

/// Trims ASCII whitespace from both ends.
std::string trim(std::string_view text);

}  // namespace cfq
