#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cfq/types.hpp"

namespace cfq {

/// One scored query: the final ranked ids, the truth set, and both metric
/// values at the run's K.
struct EvalRecord {
  std::string query_id;
  std::string encoder;
  RetrievalMode mode = RetrievalMode::baseline;
  GranularityLevel granularity = GranularityLevel::caption;
  double multi_recall_at_k = 0.0;
  int recall_at_k = 0;
  std::size_t k = 0;
  std::vector<std::string> predicted_ids;
  std::vector<std::string> true_ids;
  bool fell_back = false;
};

/// One-to-many retrieval score: c / max(K, |P|) where c = |P intersect T|.
/// The denominator is taken verbatim, so with |T| < K a perfect retrieval
/// still scores |T| / K, never 1 (see docs/metric-notes in the README).
double multi_recall_at_k(std::span<const std::string> predicted,
                         const std::vector<std::string>& truth, int k);

/// Classic any-hit rule: 1 iff one of the first min(K, |P|) predictions is a
/// true image.
int recall_at_k(std::span<const std::string> predicted,
                const std::vector<std::string>& truth, int k);

/// Mean of both metrics over one (encoder, mode, granularity) group, as
/// percentages rounded half-up to 2 decimals.
struct MetricGroup {
  std::string encoder;
  RetrievalMode mode = RetrievalMode::baseline;
  GranularityLevel granularity = GranularityLevel::caption;
  std::size_t query_count = 0;
  double multi_recall_percent = 0.0;
  double recall_percent = 0.0;
};

/// fraction in [0,1] -> percent with 2 decimals, half rounded up.
double to_percent(double fraction);

/// Groups records by (encoder, mode, granularity) and averages each group.
/// Output order: encoder ascending, then granularity in canonical order
/// (caption, imagery_tag, phrase, triple, fragment), then mode in canonical
/// order (baseline, enhanced_maxsim, enhanced_vote).
std::vector<MetricGroup> aggregate(std::span<const EvalRecord> records);

/// Builds the record for one retrieval result.
EvalRecord evaluate(const QueryRecord& query, const RetrievalResult& result,
                    const std::string& encoder, int k);

}  // namespace cfq
