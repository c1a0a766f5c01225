#include <doctest.h>

#include <algorithm>
#include <vector>

#include "cfq/error.hpp"
#include "cfq/metrics.hpp"
#include "cfq/rng.hpp"

using namespace cfq;

namespace {

std::vector<std::string> ids(std::initializer_list<const char*> list) {
  return {list.begin(), list.end()};
}

}  // namespace

TEST_CASE("multi recall divides hits by max(K, list length)") {
  // 2 of 3 predictions are true, K = 10 -> 2 / 10.
  CHECK(multi_recall_at_k(ids({"a", "b", "c"}), ids({"a", "c"}), 10) == 0.2);
  // 12 predictions with 6 hits, K = 10 -> 6 / 12.
  auto twelve = ids({"t1", "x1", "t2", "x2", "t3", "x3", "t4", "x4", "t5",
                     "x5", "t6", "x6"});
  auto truth = ids({"t1", "t2", "t3", "t4", "t5", "t6"});
  CHECK(multi_recall_at_k(twelve, truth, 10) == 0.5);
  // Exact division: both cases are plain integer ratios.
  CHECK(multi_recall_at_k(ids({"a"}), ids({"a"}), 1) == 1.0);
}

TEST_CASE("a single-truth hit under K = 10 scores one tenth") {
  auto predicted = ids({"t", "x1", "x2", "x3", "x4", "x5", "x6", "x7", "x8",
                        "x9"});
  CHECK(multi_recall_at_k(predicted, ids({"t"}), 10) == 0.1);
  CHECK(recall_at_k(predicted, ids({"t"}), 10) == 1);
}

TEST_CASE("multi recall never exceeds plain recall when truth fits in K") {
  SplitMix64 rng(404);
  for (int trial = 0; trial < 300; ++trial) {
    int k = 1 + static_cast<int>(rng.bounded(12));
    std::vector<std::string> universe;
    for (int i = 0; i < 20; ++i) universe.push_back("u" + std::to_string(i));
    // Pipeline-shaped predictions: at most K entries. With |P| > K a hit
    // past rank K would count for the multi metric but not plain recall,
    // and the inequality genuinely does not hold there.
    std::vector<std::string> predicted;
    for (const auto& u : universe) {
      if (rng.bounded(2) == 0 &&
          predicted.size() < static_cast<std::size_t>(k)) {
        predicted.push_back(u);
      }
    }
    std::vector<std::string> truth;
    for (const auto& u : universe) {
      if (rng.bounded(4) == 0) truth.push_back(u);
    }
    if (truth.empty() || truth.size() > static_cast<std::size_t>(k)) continue;
    double multi = multi_recall_at_k(predicted, truth, k);
    int plain = recall_at_k(predicted, truth, k);
    CHECK(multi <= static_cast<double>(plain));
    CHECK(multi >= 0.0);
    CHECK(multi <= 1.0);
  }
}

TEST_CASE("prediction order does not change either metric when the list fits") {
  auto predicted = ids({"c", "a", "b"});
  auto truth = ids({"b", "c"});
  auto reversed = predicted;
  std::reverse(reversed.begin(), reversed.end());
  CHECK(multi_recall_at_k(predicted, truth, 5) ==
        multi_recall_at_k(reversed, truth, 5));
  CHECK(recall_at_k(predicted, truth, 5) == recall_at_k(reversed, truth, 5));
}

TEST_CASE("plain recall looks only at the first min(K, length) entries") {
  auto predicted = ids({"x1", "x2", "x3", "t"});
  CHECK(recall_at_k(predicted, ids({"t"}), 3) == 0);
  CHECK(recall_at_k(predicted, ids({"t"}), 4) == 1);
  CHECK(recall_at_k(ids({}), ids({"t"}), 4) == 0);
}

TEST_CASE("empty predictions score zero") {
  CHECK(multi_recall_at_k(ids({}), ids({"t"}), 10) == 0.0);
}

TEST_CASE("duplicate predictions and non-positive K are contract errors") {
  CHECK_THROWS_AS(multi_recall_at_k(ids({"a", "a"}), ids({"a"}), 5),
                  CfqError);
  CHECK_THROWS_AS(multi_recall_at_k(ids({"a"}), ids({"a"}), 0), CfqError);
  CHECK_THROWS_AS(recall_at_k(ids({"a"}), ids({"a"}), 0), CfqError);
}

TEST_CASE("fractions become half-up percentages with 2 decimals") {
  CHECK(to_percent(0.5) == 50.0);
  CHECK(to_percent(0.0) == 0.0);
  CHECK(to_percent(1.0) == 100.0);
  CHECK(to_percent(1.0 / 3.0) == 33.33);
  CHECK(to_percent(2.0 / 3.0) == 66.67);
  CHECK(to_percent(0.61765) == 61.77);  // the half rounds up
  CHECK(to_percent(0.124449) == 12.44);
}

namespace {

EvalRecord record_of(const std::string& encoder, RetrievalMode mode,
                     GranularityLevel granularity, double multi, int plain) {
  EvalRecord record;
  record.query_id = "q";
  record.encoder = encoder;
  record.mode = mode;
  record.granularity = granularity;
  record.multi_recall_at_k = multi;
  record.recall_at_k = plain;
  record.k = 10;
  return record;
}

}  // namespace

TEST_CASE("aggregate averages per cell and orders cells canonically") {
  std::vector<EvalRecord> records = {
      // Deliberately shuffled input order.
      record_of("zeta", RetrievalMode::enhanced_vote,
                GranularityLevel::caption, 1.0, 1),
      record_of("alpha", RetrievalMode::baseline, GranularityLevel::triple,
                0.5, 1),
      record_of("alpha", RetrievalMode::baseline, GranularityLevel::caption,
                1.0, 1),
      record_of("alpha", RetrievalMode::baseline, GranularityLevel::caption,
                0.5, 0),
      record_of("alpha", RetrievalMode::enhanced_maxsim,
                GranularityLevel::caption, 0.25, 1),
  };
  auto groups = aggregate(records);
  REQUIRE(groups.size() == 4);

  CHECK(groups[0].encoder == "alpha");
  CHECK(groups[0].granularity == GranularityLevel::caption);
  CHECK(groups[0].mode == RetrievalMode::baseline);
  CHECK(groups[0].query_count == 2);
  CHECK(groups[0].multi_recall_percent == 75.0);  // mean(1.0, 0.5) -> 75.00
  CHECK(groups[0].recall_percent == 50.0);

  CHECK(groups[1].encoder == "alpha");
  CHECK(groups[1].granularity == GranularityLevel::caption);
  CHECK(groups[1].mode == RetrievalMode::enhanced_maxsim);

  CHECK(groups[2].encoder == "alpha");
  CHECK(groups[2].granularity == GranularityLevel::triple);

  CHECK(groups[3].encoder == "zeta");
  CHECK(groups[3].mode == RetrievalMode::enhanced_vote);
}

TEST_CASE("aggregating one third lands on the half-up grid") {
  std::vector<EvalRecord> records;
  for (int i = 0; i < 3; ++i) {
    records.push_back(record_of("e", RetrievalMode::baseline,
                                GranularityLevel::caption, i == 0 ? 1.0 : 0.0,
                                i == 0 ? 1 : 0));
  }
  auto groups = aggregate(records);
  REQUIRE(groups.size() == 1);
  CHECK(groups[0].multi_recall_percent == 33.33);
  CHECK(groups[0].recall_percent == 33.33);
}

TEST_CASE("aggregate of nothing is nothing") {
  CHECK(aggregate({}).empty());
}

TEST_CASE("evaluate carries the result into a scored record") {
  QueryRecord query;
  query.id = "q7";
  query.text = "text";
  query.granularity = GranularityLevel::fragment;
  query.true_image_ids = {"img_1", "img_9"};

  RetrievalResult result;
  result.query_id = "q7";
  result.mode = RetrievalMode::enhanced_vote;
  result.ranked = {{"img_9", 0.9f, 2}, {"img_4", 0.5f, 1}};
  result.fell_back = true;

  auto record = evaluate(query, result, "clip-like", 10);
  CHECK(record.query_id == "q7");
  CHECK(record.encoder == "clip-like");
  CHECK(record.mode == RetrievalMode::enhanced_vote);
  CHECK(record.granularity == GranularityLevel::fragment);
  CHECK(record.k == 10);
  CHECK(record.predicted_ids == std::vector<std::string>{"img_9", "img_4"});
  CHECK(record.true_ids == query.true_image_ids);
  CHECK(record.fell_back);
  CHECK(record.multi_recall_at_k == 0.1);  // 1 hit / max(10, 2)
  CHECK(record.recall_at_k == 1);
}
