#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cfq/enhancer.hpp"
#include "cfq/genclient.hpp"
#include "cfq/metrics.hpp"
#include "cfq/report.hpp"
#include "cfq/retrieval.hpp"
#include "cfq/types.hpp"

namespace cfq {

/// Seeded query subsample: `count` draws without replacement from the
/// lexicographically sorted query ids of each granularity.
struct SampleSpec {
  std::size_t count = 0;
  std::uint64_t seed = 0;
};

/// Everything one benchmark run needs. Encoders are (name, provider spec)
/// pairs; the spec string is either "synthetic:seed=S,dim=D" or a store file
/// path. pool_size = 0 evaluates over the whole image catalog, otherwise the
/// pool is the union of the sampled queries' true images plus seeded-random
/// distractors up to pool_size.
struct RunSpec {
  std::filesystem::path images_path;
  std::filesystem::path queries_path;
  std::vector<std::pair<std::string, std::string>> encoders;
  std::vector<RetrievalMode> modes = {RetrievalMode::baseline};
  std::vector<GranularityLevel> granularities;  // empty = all present
  RetrievalConfig retrieval;
  EnhanceOptions enhance;
  std::filesystem::path template_path;  // expansion prompt (enhanced modes)
  std::optional<ChatEndpointConfig> chat;
  std::filesystem::path cache_dir;  // generation cache (enhanced modes)
  std::optional<SampleSpec> sample;
  std::size_t pool_size = 0;
  std::uint64_t pool_seed = 17;
  std::filesystem::path output_dir;
  std::size_t jobs = 1;
};

/// Throws config errors for missing files, empty encoder/mode lists, an
/// absent template or cache dir when an enhanced mode is requested, a zero
/// sample count, or jobs < 1.
void check_spec(const RunSpec& spec);

struct CellKey {
  std::string encoder;
  GranularityLevel granularity = GranularityLevel::caption;
  RetrievalMode mode = RetrievalMode::baseline;
};

struct CellFailure {
  CellKey key;
  std::string message;
};

/// In-memory result of run_benchmark; the same data lands in output_dir as
/// records.jsonl, report.csv, report.txt, and run_config.json.
struct RunOutcome {
  std::vector<EvalRecord> records;
  std::vector<ReportCell> cells;
  std::vector<CellFailure> failures;
  std::vector<std::string> pool_ids;
  std::vector<std::string> sampled_query_ids;
  std::size_t effective_n_initial = 0;
  std::size_t effective_k1 = 0;
  GenStats gen_stats;

  int exit_code() const { return failures.empty() ? 0 : 1; }
};

/// Runs every (encoder x granularity x mode) cell over the sampled queries.
/// A failing cell is recorded and skipped; the remaining cells still report.
/// Outputs are byte-deterministic for a fixed spec with warm caches,
/// independent of the jobs count.
RunOutcome run_benchmark(const RunSpec& spec);

/// Similarity matrix behind a per-query heatmap: row 0 is the original
/// query, rows 1.. are the pooled enhanced texts (minus any exact duplicate
/// of the original), columns are the pool images. CSV with 6-decimal values.
std::string render_heatmap_csv(const std::string& query_text,
                               const EnhancedQuery& enhanced,
                               const ImageIndex& index,
                               EmbeddingProvider& provider);

}  // namespace cfq
