#include "cfq/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "cfq/error.hpp"

namespace cfq {
namespace {

std::string format_value(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.2f", value);
  return buffer;
}

std::string format_delta(double delta) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%+.2f", delta);
  return buffer;
}

long long centis(double percent) { return std::llround(percent * 100.0); }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(field);
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  fields.push_back(field);
  return fields;
}

std::string cell_label(const std::string& encoder, RetrievalMode mode,
                       GranularityLevel granularity,
                       const std::string& metric) {
  return encoder + "/" + std::string(to_string(mode)) + "/" +
         std::string(to_string(granularity)) + "/" + metric;
}

}  // namespace

std::vector<ReportCell> build_report(std::span<const MetricGroup> groups,
                                     int k) {
  std::string suffix = "@" + std::to_string(k);
  // Baseline values per (encoder, granularity, metric name) feed the deltas.
  std::map<std::tuple<std::string, std::size_t, std::string>, double> baseline;
  for (const auto& group : groups) {
    if (group.mode != RetrievalMode::baseline) continue;
    auto key = std::make_tuple(group.encoder,
                               granularity_rank(group.granularity),
                               std::string());
    std::get<2>(key) = "multi_recall" + suffix;
    baseline[key] = group.multi_recall_percent;
    std::get<2>(key) = "recall" + suffix;
    baseline[key] = group.recall_percent;
  }

  std::vector<const MetricGroup*> order;
  order.reserve(groups.size());
  for (const auto& group : groups) order.push_back(&group);
  std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) {
    if (a->encoder != b->encoder) return a->encoder < b->encoder;
    auto ga = granularity_rank(a->granularity);
    auto gb = granularity_rank(b->granularity);
    if (ga != gb) return ga < gb;
    return mode_rank(a->mode) < mode_rank(b->mode);
  });

  std::vector<ReportCell> cells;
  cells.reserve(order.size() * 2);
  for (const auto* group : order) {
    auto push = [&](const std::string& metric, double value) {
      ReportCell cell;
      cell.encoder = group->encoder;
      cell.mode = group->mode;
      cell.granularity = group->granularity;
      cell.metric = metric;
      cell.value = value;
      cell.query_count = group->query_count;
      if (group->mode != RetrievalMode::baseline) {
        auto it = baseline.find(std::make_tuple(
            group->encoder, granularity_rank(group->granularity), metric));
        if (it != baseline.end()) {
          cell.delta_vs_baseline =
              static_cast<double>(centis(value) - centis(it->second)) / 100.0;
        }
      }
      cells.push_back(std::move(cell));
    };
    push("multi_recall" + suffix, group->multi_recall_percent);
    push("recall" + suffix, group->recall_percent);
  }
  return cells;
}

std::string render_report_csv(std::span<const ReportCell> cells) {
  std::string out =
      "encoder,mode,granularity,metric,value,delta_vs_baseline,queries\n";
  for (const auto& cell : cells) {
    out += cell.encoder;
    out += ',';
    out += to_string(cell.mode);
    out += ',';
    out += to_string(cell.granularity);
    out += ',';
    out += cell.metric;
    out += ',';
    out += format_value(cell.value);
    out += ',';
    if (cell.delta_vs_baseline) out += format_delta(*cell.delta_vs_baseline);
    out += ',';
    out += std::to_string(cell.query_count);
    out += '\n';
  }
  return out;
}

std::vector<ReportCell> parse_report_csv(const std::string& content) {
  std::istringstream in(content);
  std::string line;
  std::vector<ReportCell> cells;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line.rfind("encoder,", 0) != 0) {
        throw CfqError(ErrorKind::parse, "report has no header row");
      }
      continue;
    }
    auto fields = split_csv_line(line);
    if (fields.size() != 7) {
      throw CfqError(ErrorKind::parse, "report line " +
                                           std::to_string(line_no) +
                                           ": expected 7 fields");
    }
    ReportCell cell;
    cell.encoder = fields[0];
    cell.mode = mode_from_string(fields[1]);
    cell.granularity = granularity_from_string(fields[2]);
    cell.metric = fields[3];
    cell.value = std::stod(fields[4]);
    if (!fields[5].empty()) cell.delta_vs_baseline = std::stod(fields[5]);
    cell.query_count = static_cast<std::size_t>(std::stoull(fields[6]));
    cells.push_back(std::move(cell));
  }
  return cells;
}

std::string render_report_text(std::span<const ReportCell> cells) {
  // Group rows under (encoder, metric) headings; granularities as columns.
  std::map<std::pair<std::string, std::string>,
           std::map<std::size_t, std::map<std::size_t, const ReportCell*>>>
      blocks;
  for (const auto& cell : cells) {
    blocks[{cell.encoder, cell.metric}][mode_rank(cell.mode)]
          [granularity_rank(cell.granularity)] = &cell;
  }

  std::string out;
  constexpr int kLabelWidth = 16;
  constexpr int kColWidth = 18;
  for (const auto& [key, rows] : blocks) {
    const auto& [encoder, metric] = key;
    out += "encoder: " + encoder + "    metric: " + metric + "\n";

    std::set<std::size_t> present_cols;
    for (const auto& [mode, cols] : rows) {
      for (const auto& [g, cell] : cols) present_cols.insert(g);
    }

    char buffer[64];
    std::snprintf(buffer, sizeof(buffer), "%-*s", kLabelWidth, "mode");
    out += buffer;
    for (auto g : present_cols) {
      std::snprintf(buffer, sizeof(buffer), "%*s", kColWidth,
                    std::string(to_string(kGranularityOrder[g])).c_str());
      out += buffer;
    }
    out += '\n';

    for (const auto& [mode, cols] : rows) {
      std::snprintf(buffer, sizeof(buffer), "%-*s", kLabelWidth,
                    std::string(to_string(kModeOrder[mode])).c_str());
      out += buffer;
      for (auto g : present_cols) {
        auto it = cols.find(g);
        std::string text = "-";
        if (it != cols.end()) {
          text = format_value(it->second->value);
          if (it->second->delta_vs_baseline) {
            text += " (" + format_delta(*it->second->delta_vs_baseline) + ")";
          }
        }
        std::snprintf(buffer, sizeof(buffer), "%*s", kColWidth, text.c_str());
        out += buffer;
      }
      out += '\n';
    }
    out += '\n';
  }
  return out;
}

std::vector<CellDelta> compare_runs(std::span<const ReportCell> report_a,
                                    std::span<const ReportCell> report_b) {
  using Key = std::tuple<std::string, std::size_t, std::size_t, std::string>;
  auto key_of = [](const ReportCell& cell) {
    return Key{cell.encoder, granularity_rank(cell.granularity),
               mode_rank(cell.mode), cell.metric};
  };
  std::map<Key, const ReportCell*> lookup_b;
  for (const auto& cell : report_b) lookup_b.emplace(key_of(cell), &cell);

  std::map<Key, CellDelta> out;
  for (const auto& cell : report_a) {
    auto it = lookup_b.find(key_of(cell));
    if (it == lookup_b.end()) {
      throw CfqError(ErrorKind::mismatch,
                     "cell " + cell_label(cell.encoder, cell.mode,
                                          cell.granularity, cell.metric) +
                         " is missing from the second report");
    }
    CellDelta delta;
    delta.encoder = cell.encoder;
    delta.mode = cell.mode;
    delta.granularity = cell.granularity;
    delta.metric = cell.metric;
    delta.value_a = cell.value;
    delta.value_b = it->second->value;
    long long diff = centis(delta.value_b) - centis(delta.value_a);
    delta.delta = static_cast<double>(diff) / 100.0;
    delta.direction = diff > 0 ? "up" : diff < 0 ? "down" : "same";
    out.emplace(key_of(cell), std::move(delta));
  }
  for (const auto& cell : report_b) {
    if (!out.count(key_of(cell))) {
      throw CfqError(ErrorKind::mismatch,
                     "cell " + cell_label(cell.encoder, cell.mode,
                                          cell.granularity, cell.metric) +
                         " is missing from the first report");
    }
  }
  std::vector<CellDelta> sorted;
  sorted.reserve(out.size());
  for (auto& [key, delta] : out) sorted.push_back(std::move(delta));
  return sorted;
}

std::string render_compare_csv(std::span<const CellDelta> deltas) {
  std::string out =
      "encoder,mode,granularity,metric,value_a,value_b,delta,direction\n";
  for (const auto& delta : deltas) {
    out += delta.encoder;
    out += ',';
    out += to_string(delta.mode);
    out += ',';
    out += to_string(delta.granularity);
    out += ',';
    out += delta.metric;
    out += ',';
    out += format_value(delta.value_a);
    out += ',';
    out += format_value(delta.value_b);
    out += ',';
    out += format_delta(delta.delta);
    out += ',';
    out += delta.direction;
    out += '\n';
  }
  return out;
}

}  // namespace cfq
