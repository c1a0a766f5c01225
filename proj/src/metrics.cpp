#include "cfq/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <tuple>
#include <unordered_set>

#include "cfq/error.hpp"

namespace cfq {
namespace {

bool contains(const std::vector<std::string>& sorted_truth,
              const std::string& id) {
  return std::binary_search(sorted_truth.begin(), sorted_truth.end(), id);
}

std::vector<std::string> sorted_copy(const std::vector<std::string>& ids) {
  std::vector<std::string> out(ids);
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

double multi_recall_at_k(std::span<const std::string> predicted,
                         const std::vector<std::string>& truth, int k) {
  if (k < 1) {
    throw CfqError(ErrorKind::contract, "metric requires K >= 1");
  }
  std::unordered_set<std::string> seen;
  for (const auto& id : predicted) {
    if (!seen.insert(id).second) {
      throw CfqError(ErrorKind::contract,
                     "predicted list repeats id '" + id + "'");
    }
  }
  auto truth_sorted = sorted_copy(truth);
  std::size_t hits = 0;
  for (const auto& id : predicted) {
    if (contains(truth_sorted, id)) ++hits;
  }
  std::size_t denominator =
      std::max<std::size_t>(static_cast<std::size_t>(k), predicted.size());
  return static_cast<double>(hits) / static_cast<double>(denominator);
}

int recall_at_k(std::span<const std::string> predicted,
                const std::vector<std::string>& truth, int k) {
  if (k < 1) {
    throw CfqError(ErrorKind::contract, "metric requires K >= 1");
  }
  auto truth_sorted = sorted_copy(truth);
  std::size_t limit =
      std::min<std::size_t>(static_cast<std::size_t>(k), predicted.size());
  for (std::size_t i = 0; i < limit; ++i) {
    if (contains(truth_sorted, predicted[i])) return 1;
  }
  return 0;
}

double to_percent(double fraction) {
  return static_cast<double>(std::llround(fraction * 10000.0)) / 100.0;
}

std::vector<MetricGroup> aggregate(std::span<const EvalRecord> records) {
  using Key = std::tuple<std::string, std::size_t, std::size_t>;
  struct Sums {
    double multi = 0.0;
    double recall = 0.0;
    std::size_t count = 0;
  };
  std::map<Key, Sums> groups;
  for (const auto& record : records) {
    Key key{record.encoder, granularity_rank(record.granularity),
            mode_rank(record.mode)};
    auto& sums = groups[key];
    sums.multi += record.multi_recall_at_k;
    sums.recall += static_cast<double>(record.recall_at_k);
    ++sums.count;
  }
  std::vector<MetricGroup> out;
  out.reserve(groups.size());
  for (const auto& [key, sums] : groups) {
    MetricGroup group;
    group.encoder = std::get<0>(key);
    group.granularity = kGranularityOrder[std::get<1>(key)];
    group.mode = kModeOrder[std::get<2>(key)];
    group.query_count = sums.count;
    double n = static_cast<double>(sums.count);
    group.multi_recall_percent = to_percent(sums.multi / n);
    group.recall_percent = to_percent(sums.recall / n);
    out.push_back(std::move(group));
  }
  return out;
}

EvalRecord evaluate(const QueryRecord& query, const RetrievalResult& result,
                    const std::string& encoder, int k) {
  EvalRecord record;
  record.query_id = query.id;
  record.encoder = encoder;
  record.mode = result.mode;
  record.granularity = query.granularity;
  record.k = static_cast<std::size_t>(k);
  record.predicted_ids.reserve(result.ranked.size());
  for (const auto& entry : result.ranked) {
    record.predicted_ids.push_back(entry.image_id);
  }
  record.true_ids = query.true_image_ids;
  record.fell_back = result.fell_back;
  record.multi_recall_at_k =
      multi_recall_at_k(record.predicted_ids, record.true_ids, k);
  record.recall_at_k = recall_at_k(record.predicted_ids, record.true_ids, k);
  return record;
}

}  // namespace cfq
