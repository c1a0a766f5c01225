#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cfq/metrics.hpp"
#include "cfq/types.hpp"

namespace cfq {

/// One aggregate value: a (encoder, mode, granularity, metric) cell with its
/// percent score and, for enhanced modes, the signed gap to the matching
/// baseline cell.
struct ReportCell {
  std::string encoder;
  RetrievalMode mode = RetrievalMode::baseline;
  GranularityLevel granularity = GranularityLevel::caption;
  std::string metric;  // e.g. "multi_recall@10"
  double value = 0.0;  // percent, 2 decimals
  std::optional<double> delta_vs_baseline;
  std::size_t query_count = 0;
};

/// Expands metric groups into cells (two metrics per group) and fills
/// delta_vs_baseline from the matching baseline cell where one exists.
/// Cell order: encoder asc, granularity canonical, mode canonical, metric
/// (multi_recall first).
std::vector<ReportCell> build_report(std::span<const MetricGroup> groups,
                                     int k);

/// encoder,mode,granularity,metric,value,delta_vs_baseline,queries — values
/// with 2 decimals, delta signed, empty when absent.
std::string render_report_csv(std::span<const ReportCell> cells);
std::vector<ReportCell> parse_report_csv(const std::string& content);

/// Human-readable table: one block per (encoder, metric), modes as rows,
/// granularities as columns, enhanced cells annotated with their delta.
std::string render_report_text(std::span<const ReportCell> cells);

/// One compared cell across two runs; delta = b - a on the 2-decimal grid,
/// direction in {"up", "down", "same"}.
struct CellDelta {
  std::string encoder;
  RetrievalMode mode = RetrievalMode::baseline;
  GranularityLevel granularity = GranularityLevel::caption;
  std::string metric;
  double value_a = 0.0;
  double value_b = 0.0;
  double delta = 0.0;
  std::string direction;
};

/// Pairs cells by (encoder, mode, granularity, metric). A key present on one
/// side only is a mismatch error naming the cell.
std::vector<CellDelta> compare_runs(std::span<const ReportCell> report_a,
                                    std::span<const ReportCell> report_b);

std::string render_compare_csv(std::span<const CellDelta> deltas);

}  // namespace cfq
