#include "cfq/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <json.hpp>
#include <map>
#include <memory>
#include <set>
#include <thread>

#include "cfq/error.hpp"
#include "cfq/manifest_io.hpp"
#include "cfq/rng.hpp"
#include "cfq/similarity.hpp"

namespace cfq {
namespace {

using ordered_json = nlohmann::ordered_json;

std::string csv_quote(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

struct EncoderContext {
  std::string name;
  std::string provider_spec;
  std::unique_ptr<EmbeddingProvider> provider;
  ImageIndex index;
  std::string build_error;  // non-empty when the index could not be built
};

struct Cell {
  std::size_t encoder_index = 0;
  GranularityLevel granularity = GranularityLevel::caption;
  RetrievalMode mode = RetrievalMode::baseline;
};

struct CellOutput {
  std::vector<EvalRecord> records;
  std::string error;  // non-empty = cell failed
  bool empty = false;
};

std::string record_line(const EvalRecord& record) {
  ordered_json obj;
  obj["query_id"] = record.query_id;
  obj["encoder"] = record.encoder;
  obj["mode"] = to_string(record.mode);
  obj["granularity"] = to_string(record.granularity);
  obj["k"] = record.k;
  obj["multi_recall_at_k"] = record.multi_recall_at_k;
  obj["recall_at_k"] = record.recall_at_k;
  obj["predicted_ids"] = record.predicted_ids;
  obj["true_ids"] = record.true_ids;
  obj["fell_back"] = record.fell_back;
  return obj.dump();
}

}  // namespace

void check_spec(const RunSpec& spec) {
  namespace fs = std::filesystem;
  if (spec.encoders.empty()) {
    throw CfqError(ErrorKind::config, "no encoders configured");
  }
  std::set<std::string> names;
  for (const auto& [name, provider_spec] : spec.encoders) {
    if (name.empty() || provider_spec.empty()) {
      throw CfqError(ErrorKind::config, "encoder entries need name and spec");
    }
    if (!names.insert(name).second) {
      throw CfqError(ErrorKind::config, "duplicate encoder name '" + name + "'");
    }
  }
  if (spec.modes.empty()) {
    throw CfqError(ErrorKind::config, "no retrieval modes configured");
  }
  if (!fs::exists(spec.images_path)) {
    throw CfqError(ErrorKind::config,
                   "images file '" + spec.images_path.string() + "' not found");
  }
  if (!fs::exists(spec.queries_path)) {
    throw CfqError(ErrorKind::config, "queries file '" +
                                          spec.queries_path.string() +
                                          "' not found");
  }
  if (spec.sample && spec.sample->count < 1) {
    throw CfqError(ErrorKind::config, "sample count must be >= 1");
  }
  if (spec.jobs < 1) {
    throw CfqError(ErrorKind::config, "jobs must be >= 1");
  }
  bool enhanced = std::any_of(
      spec.modes.begin(), spec.modes.end(),
      [](RetrievalMode mode) { return mode != RetrievalMode::baseline; });
  if (enhanced) {
    if (spec.template_path.empty()) {
      throw CfqError(ErrorKind::config,
                     "enhanced modes need an expansion template");
    }
    if (!fs::exists(spec.template_path)) {
      throw CfqError(ErrorKind::config, "template '" +
                                            spec.template_path.string() +
                                            "' not found");
    }
    if (spec.cache_dir.empty()) {
      throw CfqError(ErrorKind::config,
                     "enhanced modes need a generation cache directory");
    }
  }
  if (spec.output_dir.empty()) {
    throw CfqError(ErrorKind::config, "output directory not set");
  }
}

RunOutcome run_benchmark(const RunSpec& spec) {
  check_spec(spec);

  auto manifest = load_manifest(spec.images_path, spec.queries_path);
  auto violations = validate_manifest(manifest);
  if (!violations.empty()) {
    std::string message = "manifest invalid:";
    std::size_t shown = 0;
    for (const auto& violation : violations) {
      if (shown++ == 5) {
        message += " (+" + std::to_string(violations.size() - 5) + " more)";
        break;
      }
      message += " [" + violation.record_id + ": " + violation.rule + "]";
    }
    throw CfqError(ErrorKind::validation, message);
  }

  // Granularities: explicit list or everything the manifest contains.
  std::vector<GranularityLevel> granularities;
  {
    std::set<std::size_t> wanted;
    if (spec.granularities.empty()) {
      for (const auto& query : manifest.queries) {
        wanted.insert(granularity_rank(query.granularity));
      }
    } else {
      for (auto g : spec.granularities) wanted.insert(granularity_rank(g));
    }
    for (auto rank : wanted) granularities.push_back(kGranularityOrder[rank]);
  }

  std::vector<RetrievalMode> modes;
  {
    std::set<std::size_t> wanted;
    for (auto mode : spec.modes) wanted.insert(mode_rank(mode));
    for (auto rank : wanted) modes.push_back(kModeOrder[rank]);
  }

  // Sampled query set per granularity: ids sorted, seeded draw, then the
  // sample itself sorted again for a stable processing order.
  std::map<std::string, const QueryRecord*> query_by_id;
  for (const auto& query : manifest.queries) {
    query_by_id.emplace(query.id, &query);
  }
  std::map<std::size_t, std::vector<const QueryRecord*>> sampled_by_rank;
  std::vector<std::string> sampled_ids;
  for (auto granularity : granularities) {
    std::vector<std::string> ids;
    for (const auto& query : manifest.queries) {
      if (query.granularity == granularity) ids.push_back(query.id);
    }
    std::sort(ids.begin(), ids.end());
    if (spec.sample) {
      ids = sample_without_replacement(std::move(ids), spec.sample->count,
                                       spec.sample->seed);
      std::sort(ids.begin(), ids.end());
    }
    auto& slot = sampled_by_rank[granularity_rank(granularity)];
    for (const auto& id : ids) {
      slot.push_back(query_by_id.at(id));
      sampled_ids.push_back(id);
    }
  }

  // Evaluation pool: whole catalog, or truth union plus seeded distractors.
  std::vector<std::string> pool;
  std::set<std::string> truth;
  for (const auto& [rank, queries] : sampled_by_rank) {
    for (const auto* query : queries) {
      truth.insert(query->true_image_ids.begin(), query->true_image_ids.end());
    }
  }
  {
    std::vector<std::string> catalog;
    catalog.reserve(manifest.images.size());
    for (const auto& image : manifest.images) catalog.push_back(image.id);
    std::sort(catalog.begin(), catalog.end());
    if (spec.pool_size == 0) {
      pool = std::move(catalog);
    } else {
      pool.assign(truth.begin(), truth.end());
      if (pool.size() < spec.pool_size) {
        std::vector<std::string> distractors;
        for (const auto& id : catalog) {
          if (!truth.count(id)) distractors.push_back(id);
        }
        auto drawn = sample_without_replacement(
            std::move(distractors), spec.pool_size - pool.size(),
            spec.pool_seed);
        pool.insert(pool.end(), drawn.begin(), drawn.end());
      }
      std::sort(pool.begin(), pool.end());
    }
  }
  if (pool.empty()) {
    throw CfqError(ErrorKind::config, "evaluation pool is empty");
  }

  // Pool-size rule: the pool is the initial candidate set, so the effective
  // N_initial is its size and K1 is clamped into range.
  RetrievalConfig base = spec.retrieval;
  base.n_initial = pool.size();
  base.k1 = std::min(base.k1, base.n_initial);
  check_config(base);

  // Encoders: provider plus a pool index built once. A broken encoder fails
  // its cells, not the run.
  std::vector<EncoderContext> encoders;
  for (const auto& [name, provider_spec] : spec.encoders) {
    EncoderContext ctx;
    ctx.name = name;
    ctx.provider_spec = provider_spec;
    try {
      ctx.provider = make_provider(provider_spec);
      ctx.index = build_image_index(*ctx.provider, pool);
    } catch (const std::exception& error) {
      ctx.build_error = error.what();
    }
    encoders.push_back(std::move(ctx));
  }
  std::sort(encoders.begin(), encoders.end(),
            [](const EncoderContext& a, const EncoderContext& b) {
              return a.name < b.name;
            });

  bool enhanced_requested = std::any_of(
      modes.begin(), modes.end(),
      [](RetrievalMode mode) { return mode != RetrievalMode::baseline; });
  std::shared_ptr<GenClient> client;
  if (!spec.cache_dir.empty()) {
    std::shared_ptr<GenTransport> transport;
    if (spec.chat) transport = make_http_transport(*spec.chat);
    client = std::make_shared<GenClient>(spec.cache_dir, transport);
  }
  PromptTemplate expansion;
  if (enhanced_requested) {
    expansion = load_template(spec.template_path);
    check_template(expansion);
  }

  std::vector<Cell> cells;
  for (std::size_t e = 0; e < encoders.size(); ++e) {
    for (auto granularity : granularities) {
      for (auto mode : modes) {
        cells.push_back({e, granularity, mode});
      }
    }
  }
  std::vector<CellOutput> outputs(cells.size());

  auto run_cell = [&](std::size_t index) {
    const Cell& cell = cells[index];
    CellOutput& output = outputs[index];
    EncoderContext& ctx = encoders[cell.encoder_index];
    try {
      if (!ctx.build_error.empty()) {
        throw CfqError(ErrorKind::config, "encoder '" + ctx.name +
                                              "' unavailable: " +
                                              ctx.build_error);
      }
      const auto& queries =
          sampled_by_rank.at(granularity_rank(cell.granularity));
      if (queries.empty()) {
        output.empty = true;
        return;
      }
      RetrievalConfig config = base;
      config.mode = cell.mode;
      EnhanceFn enhancer = [](const std::string& text) {
        return passthrough(text);
      };
      if (cell.mode != RetrievalMode::baseline) {
        if (!client) {
          throw CfqError(ErrorKind::config, "no generation cache configured");
        }
        enhancer = [&](const std::string& text) {
          return enhance(text, expansion, *client, spec.enhance);
        };
      }
      for (const auto* query : queries) {
        auto result = retrieve(*query, ctx.index, *ctx.provider, config,
                               enhancer);
        output.records.push_back(evaluate(*query, result, ctx.name,
                                          static_cast<int>(base.k_final)));
      }
    } catch (const std::exception& error) {
      output.records.clear();
      output.error = error.what();
    }
  };

  std::size_t workers = std::min(spec.jobs, cells.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < cells.size();
             i = next.fetch_add(1)) {
          run_cell(i);
        }
      });
    }
    for (auto& thread : threads) thread.join();
  }

  // Deterministic reduce: cells were laid out in (encoder asc, granularity,
  // mode) order, so a linear pass is already canonical.
  RunOutcome outcome;
  outcome.pool_ids = pool;
  outcome.sampled_query_ids = sampled_ids;
  outcome.effective_n_initial = base.n_initial;
  outcome.effective_k1 = base.k1;
  std::vector<CellKey> empty_cells;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Cell& cell = cells[i];
    CellKey key{encoders[cell.encoder_index].name, cell.granularity,
                cell.mode};
    if (!outputs[i].error.empty()) {
      outcome.failures.push_back({key, outputs[i].error});
    } else if (outputs[i].empty) {
      empty_cells.push_back(key);
    } else {
      for (auto& record : outputs[i].records) {
        outcome.records.push_back(std::move(record));
      }
    }
  }
  auto groups = aggregate(outcome.records);
  outcome.cells = build_report(groups, static_cast<int>(base.k_final));
  if (client) outcome.gen_stats = client->stats();

  // Files: per-query records, the two report renderings, and the resolved
  // config snapshot.
  std::filesystem::create_directories(spec.output_dir);

  std::string records_text;
  for (const auto& record : outcome.records) {
    records_text += record_line(record);
    records_text += '\n';
  }
  write_text_file(spec.output_dir / "records.jsonl", records_text);

  write_text_file(spec.output_dir / "report.csv",
                  render_report_csv(outcome.cells));

  std::string text = render_report_text(outcome.cells);
  if (!outcome.failures.empty()) {
    text += "failed cells:\n";
    for (const auto& failure : outcome.failures) {
      text += "  " + failure.key.encoder + "/" +
              std::string(to_string(failure.key.granularity)) + "/" +
              std::string(to_string(failure.key.mode)) + ": " +
              failure.message + "\n";
    }
  }
  write_text_file(spec.output_dir / "report.txt", text);

  ordered_json config;
  config["images"] = spec.images_path.string();
  config["queries"] = spec.queries_path.string();
  {
    ordered_json list = ordered_json::array();
    for (const auto& ctx : encoders) {
      list.push_back({{"name", ctx.name}, {"provider", ctx.provider_spec}});
    }
    config["encoders"] = list;
  }
  {
    ordered_json list = ordered_json::array();
    for (auto mode : modes) list.push_back(to_string(mode));
    config["modes"] = list;
    list = ordered_json::array();
    for (auto g : granularities) list.push_back(to_string(g));
    config["granularities"] = list;
  }
  config["retrieval"] = {{"n_initial", base.n_initial},
                         {"k1", base.k1},
                         {"k_final", base.k_final},
                         {"configured_n_initial", spec.retrieval.n_initial},
                         {"configured_k1", spec.retrieval.k1}};
  config["enhance"] = {
      {"model_name", spec.enhance.model_name},
      {"batch_count", spec.enhance.batch_count},
      {"batch_retries", spec.enhance.batch_retries},
      {"template", spec.template_path.empty()
                       ? ordered_json(nullptr)
                       : ordered_json(spec.template_path.string())}};
  config["sample"] = spec.sample
                         ? ordered_json{{"count", spec.sample->count},
                                        {"seed", spec.sample->seed}}
                         : ordered_json(nullptr);
  config["pool"] = {{"requested_size", spec.pool_size},
                    {"seed", spec.pool_seed},
                    {"truth_images", truth.size()},
                    {"size", pool.size()}};
  config["jobs"] = spec.jobs;
  config["sampled_query_ids"] = sampled_ids;
  config["generation_cache"] =
      client ? ordered_json{{"dir", spec.cache_dir.string()},
                            {"hits", outcome.gen_stats.cache_hits},
                            {"misses", outcome.gen_stats.cache_misses},
                            {"network_calls", outcome.gen_stats.network_calls}}
             : ordered_json(nullptr);
  {
    ordered_json list = ordered_json::array();
    for (const auto& failure : outcome.failures) {
      list.push_back({{"encoder", failure.key.encoder},
                      {"granularity", to_string(failure.key.granularity)},
                      {"mode", to_string(failure.key.mode)},
                      {"message", failure.message}});
    }
    config["failed_cells"] = list;
    list = ordered_json::array();
    for (const auto& key : empty_cells) {
      list.push_back({{"encoder", key.encoder},
                      {"granularity", to_string(key.granularity)},
                      {"mode", to_string(key.mode)}});
    }
    config["empty_cells"] = list;
  }
  write_text_file(spec.output_dir / "run_config.json", config.dump(2) + "\n");

  return outcome;
}

std::string render_heatmap_csv(const std::string& query_text,
                               const EnhancedQuery& enhanced,
                               const ImageIndex& index,
                               EmbeddingProvider& provider) {
  std::vector<std::string> rows;
  rows.push_back(query_text);
  for (const auto& text : enhanced.pooled) {
    if (text != query_text) rows.push_back(text);
  }
  auto vectors = provider.embed_texts(rows);
  auto matrix = cosine_similarity(vectors, rows, index.vectors, index.ids);

  std::string out = "text";
  for (const auto& id : index.ids) {
    out += ',';
    out += csv_quote(id);
  }
  out += '\n';
  char buffer[32];
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    out += csv_quote(matrix.row_keys[r]);
    for (std::size_t c = 0; c < matrix.cols(); ++c) {
      std::snprintf(buffer, sizeof(buffer), "%.6f", matrix.at(r, c));
      out += ',';
      out += buffer;
    }
    out += '\n';
  }
  return out;
}

}  // namespace cfq
