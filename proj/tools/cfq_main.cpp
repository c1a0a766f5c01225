#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "cfq/corpus.hpp"
#include "cfq/embedding.hpp"
#include "cfq/enhancer.hpp"
#include "cfq/error.hpp"
#include "cfq/genclient.hpp"
#include "cfq/harness.hpp"
#include "cfq/manifest_io.hpp"
#include "cfq/metrics.hpp"
#include "cfq/report.hpp"
#include "cfq/retrieval.hpp"

namespace {

using namespace cfq;

std::string env_or_empty(const std::string& name) {
  if (name.empty()) return "";
  const char* value = std::getenv(name.c_str());
  return value ? value : "";
}

/// Chat endpoint flags shared by the generation-driven subcommands. The
/// endpoint falls back to CFQ_CHAT_ENDPOINT, the key to CFQ_CHAT_API_KEY.
struct ChatFlags {
  std::string endpoint;
  std::string api_key_env = "CFQ_CHAT_API_KEY";
  std::string system_prompt;
  bool vision = false;
  std::string image_mode = "uri";
  int timeout_seconds = 60;
  int max_retries = 2;

  void attach(CLI::App* cmd) {
    cmd->add_option("--endpoint", endpoint,
                    "Chat endpoint URL (default: $CFQ_CHAT_ENDPOINT)");
    cmd->add_option("--api-key-env", api_key_env,
                    "Environment variable holding the API key");
    cmd->add_option("--system-prompt", system_prompt,
                    "Leading system message");
    cmd->add_flag("--vision", vision, "Endpoint accepts image attachments");
    cmd->add_option("--image-mode", image_mode,
                    "Image attachment form: uri | base64");
    cmd->add_option("--timeout", timeout_seconds, "Request timeout, seconds");
    cmd->add_option("--retries", max_retries, "Transport retries");
  }

  std::optional<ChatEndpointConfig> resolve() const {
    std::string url =
        endpoint.empty() ? env_or_empty("CFQ_CHAT_ENDPOINT") : endpoint;
    if (url.empty()) return std::nullopt;
    ChatEndpointConfig config;
    config.endpoint = url;
    config.api_key = env_or_empty(api_key_env);
    config.system_prompt = system_prompt;
    config.supports_vision = vision;
    config.image_mode = image_mode;
    config.timeout_seconds = timeout_seconds;
    config.max_retries = max_retries;
    return config;
  }
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CfqError(ErrorKind::io, "cannot open '" + path.string() + "'");
  }
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  return content;
}

// ---------------------------------------------------------------- validate

int cmd_validate(const std::string& images, const std::string& queries) {
  auto manifest = load_manifest(images, queries);
  auto violations = validate_manifest(manifest);
  if (violations.empty()) {
    std::cout << "manifest valid: " << manifest.images.size() << " images, "
              << manifest.queries.size() << " queries\n";
    return 0;
  }
  for (const auto& violation : violations) {
    std::cout << violation.record_id << ": " << violation.rule << ": "
              << violation.message << "\n";
  }
  std::cout << violations.size() << " violation(s)\n";
  return 1;
}

// ------------------------------------------------------------------- embed

struct EmbedArgs {
  std::string provider_spec;
  std::string images;
  std::string queries;
  std::string texts;
  std::string out;
  // Remote encoder settings (used instead of --provider when set).
  std::string endpoint;
  std::string api_key_env = "CFQ_ENCODER_API_KEY";
  std::uint32_t dim = 0;
  int timeout_seconds = 30;
  int max_retries = 2;
  std::size_t batch_size = 64;
};

int cmd_embed(const EmbedArgs& args) {
  std::unique_ptr<EmbeddingProvider> provider;
  bool remote = !args.endpoint.empty();
  if (remote) {
    RemoteEncoderConfig config;
    config.endpoint = args.endpoint;
    config.api_key = env_or_empty(args.api_key_env);
    config.dimension = args.dim;
    config.timeout_seconds = args.timeout_seconds;
    config.max_retries = args.max_retries;
    config.batch_size = args.batch_size;
    provider = std::make_unique<RemoteProvider>(config);
  } else if (!args.provider_spec.empty()) {
    provider = make_provider(args.provider_spec);
  } else {
    throw CfqError(ErrorKind::config,
                   "embed needs --provider or --endpoint");
  }

  // (store id, encoder key, is_image) triples; remote encoders key images by
  // uri, everything else by id.
  std::vector<std::pair<std::string, std::string>> image_items;
  std::vector<std::string> text_items;
  if (!args.images.empty()) {
    for (const auto& image : load_images(args.images)) {
      image_items.emplace_back(image.id, remote ? image.uri : image.id);
    }
  }
  if (!args.queries.empty()) {
    for (const auto& query : load_queries(args.queries)) {
      text_items.push_back(query.text);
    }
  }
  if (!args.texts.empty()) {
    std::ifstream in(args.texts);
    if (!in) {
      throw CfqError(ErrorKind::io, "cannot open '" + args.texts + "'");
    }
    std::string line;
    while (std::getline(in, line)) {
      if (!trim(line).empty()) text_items.push_back(line);
    }
  }
  if (image_items.empty() && text_items.empty()) {
    throw CfqError(ErrorKind::config,
                   "embed needs --images, --queries, or --texts");
  }
  // Texts are store keys, and distinct queries may share one text (merged
  // granularities do); a single entry serves them all.
  std::sort(text_items.begin(), text_items.end());
  text_items.erase(std::unique(text_items.begin(), text_items.end()),
                   text_items.end());

  std::vector<std::pair<std::string, EmbeddingVector>> records;
  if (!image_items.empty()) {
    std::vector<std::string> keys;
    for (const auto& [id, key] : image_items) keys.push_back(key);
    auto vectors = provider->embed_images(keys);
    for (std::size_t i = 0; i < image_items.size(); ++i) {
      records.emplace_back(image_items[i].first, vectors[i]);
    }
  }
  if (!text_items.empty()) {
    auto vectors = provider->embed_texts(text_items);
    for (std::size_t i = 0; i < text_items.size(); ++i) {
      records.emplace_back(text_items[i], vectors[i]);
    }
  }
  auto store = build_store(records, provider->name());
  save_store(store, args.out);
  std::cout << "wrote " << store.size() << " vectors (dim "
            << store.dimension() << ") to " << args.out << "\n";
  return 0;
}

// ----------------------------------------------------------------- enhance

struct EnhanceArgs {
  std::string queries;
  std::string template_path;
  std::string cache_dir;
  std::string model = "default";
  int batches = 3;
  int retries = 2;
  std::string out;  // optional: pooled sentences, one per line
  ChatFlags chat;
};

int cmd_enhance(const EnhanceArgs& args) {
  auto tmpl = load_template(args.template_path);
  check_template(tmpl);
  std::shared_ptr<GenTransport> transport;
  if (auto chat = args.chat.resolve()) {
    transport = make_http_transport(*chat);
  }
  GenClient client(args.cache_dir, transport);
  EnhanceOptions options;
  options.model_name = args.model;
  options.batch_count = args.batches;
  options.batch_retries = args.retries;

  std::size_t done = 0;
  std::vector<std::string> pooled_texts;
  for (const auto& query : load_queries(args.queries)) {
    auto enhanced = enhance(query.text, tmpl, client, options);
    std::cout << query.id << ": " << enhanced.pooled.size()
              << " pooled texts\n";
    pooled_texts.insert(pooled_texts.end(), enhanced.pooled.begin(),
                        enhanced.pooled.end());
    ++done;
  }
  if (!args.out.empty()) {
    // One unique sentence per line, ready for `embed --texts` so a store
    // encoder can serve enhanced runs.
    std::sort(pooled_texts.begin(), pooled_texts.end());
    pooled_texts.erase(
        std::unique(pooled_texts.begin(), pooled_texts.end()),
        pooled_texts.end());
    std::string joined;
    for (const auto& text : pooled_texts) joined += text + "\n";
    write_text_file(args.out, joined);
    std::cout << pooled_texts.size() << " unique sentences -> " << args.out
              << "\n";
  }
  auto stats = client.stats();
  std::cout << done << " queries enhanced; cache hits " << stats.cache_hits
            << ", misses " << stats.cache_misses << ", network calls "
            << stats.network_calls << "\n";
  return 0;
}

// --------------------------------------------------------------------- run

struct RunArgs {
  std::string config_file;
  std::string images;
  std::string queries;
  std::vector<std::string> encoders;  // name=spec
  std::vector<std::string> modes;
  std::vector<std::string> granularities;
  std::size_t n_initial = 1000;
  std::size_t k1 = 15;
  std::size_t k_final = 10;
  std::string model = "default";
  int batches = 3;
  int retries = 2;
  std::string template_path;
  std::string cache_dir;
  std::size_t sample_count = 0;
  std::uint64_t sample_seed = 0;
  std::size_t pool_size = 0;
  std::uint64_t pool_seed = 17;
  std::string out;
  std::size_t jobs = 1;
  ChatFlags chat;
};

RunSpec spec_from_config_file(const std::string& path) {
  RunSpec spec;
  nlohmann::json config;
  try {
    config = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& error) {
    throw CfqError(ErrorKind::parse, path + ": " + error.what());
  }
  auto get_string = [&](const char* key, std::string fallback) {
    return config.contains(key) ? config[key].get<std::string>() : fallback;
  };
  spec.images_path = get_string("images", "");
  spec.queries_path = get_string("queries", "");
  if (config.contains("encoders")) {
    for (const auto& entry : config["encoders"]) {
      spec.encoders.emplace_back(entry.at("name").get<std::string>(),
                                 entry.at("provider").get<std::string>());
    }
  }
  if (config.contains("modes")) {
    spec.modes.clear();
    for (const auto& mode : config["modes"]) {
      spec.modes.push_back(mode_from_string(mode.get<std::string>()));
    }
  }
  if (config.contains("granularities")) {
    for (const auto& granularity : config["granularities"]) {
      spec.granularities.push_back(
          granularity_from_string(granularity.get<std::string>()));
    }
  }
  if (config.contains("retrieval")) {
    const auto& retrieval = config["retrieval"];
    if (retrieval.contains("n_initial")) {
      spec.retrieval.n_initial = retrieval["n_initial"].get<std::size_t>();
    }
    if (retrieval.contains("k1")) {
      spec.retrieval.k1 = retrieval["k1"].get<std::size_t>();
    }
    if (retrieval.contains("k_final")) {
      spec.retrieval.k_final = retrieval["k_final"].get<std::size_t>();
    }
  }
  if (config.contains("enhance")) {
    const auto& enhance_cfg = config["enhance"];
    if (enhance_cfg.contains("model_name")) {
      spec.enhance.model_name = enhance_cfg["model_name"].get<std::string>();
    }
    if (enhance_cfg.contains("batch_count")) {
      spec.enhance.batch_count = enhance_cfg["batch_count"].get<int>();
    }
    if (enhance_cfg.contains("batch_retries")) {
      spec.enhance.batch_retries = enhance_cfg["batch_retries"].get<int>();
    }
  }
  spec.template_path = get_string("template", "");
  spec.cache_dir = get_string("cache_dir", "");
  if (config.contains("sample") && !config["sample"].is_null()) {
    SampleSpec sample;
    sample.count = config["sample"].at("count").get<std::size_t>();
    sample.seed = config["sample"].value("seed", std::uint64_t{0});
    spec.sample = sample;
  }
  if (config.contains("pool_size")) {
    spec.pool_size = config["pool_size"].get<std::size_t>();
  }
  if (config.contains("pool_seed")) {
    spec.pool_seed = config["pool_seed"].get<std::uint64_t>();
  }
  spec.output_dir = get_string("output_dir", "");
  if (config.contains("jobs")) spec.jobs = config["jobs"].get<std::size_t>();
  if (config.contains("chat") && !config["chat"].is_null()) {
    const auto& chat = config["chat"];
    ChatEndpointConfig endpoint;
    endpoint.endpoint = chat.value("endpoint", "");
    endpoint.api_key = env_or_empty(chat.value("api_key_env", ""));
    endpoint.system_prompt = chat.value("system_prompt", "");
    endpoint.supports_vision = chat.value("supports_vision", false);
    endpoint.image_mode = chat.value("image_mode", "uri");
    endpoint.timeout_seconds = chat.value("timeout_seconds", 60);
    endpoint.max_retries = chat.value("max_retries", 2);
    if (!endpoint.endpoint.empty()) spec.chat = endpoint;
  }
  return spec;
}

int cmd_run(const RunArgs& args, const CLI::App* cmd) {
  RunSpec spec;
  if (!args.config_file.empty()) {
    spec = spec_from_config_file(args.config_file);
  }
  auto given = [&](const char* flag) { return cmd->count(flag) > 0; };
  if (given("--images")) spec.images_path = args.images;
  if (given("--queries")) spec.queries_path = args.queries;
  if (given("--encoder")) {
    spec.encoders.clear();
    for (const auto& entry : args.encoders) {
      auto eq = entry.find('=');
      if (eq == std::string::npos || eq == 0 || eq + 1 == entry.size()) {
        throw CfqError(ErrorKind::config,
                       "encoder must be name=provider-spec: '" + entry + "'");
      }
      spec.encoders.emplace_back(entry.substr(0, eq), entry.substr(eq + 1));
    }
  }
  if (given("--mode")) {
    spec.modes.clear();
    for (const auto& mode : args.modes) {
      spec.modes.push_back(mode_from_string(mode));
    }
  }
  if (given("--granularity")) {
    spec.granularities.clear();
    for (const auto& granularity : args.granularities) {
      spec.granularities.push_back(granularity_from_string(granularity));
    }
  }
  if (given("--n-initial")) spec.retrieval.n_initial = args.n_initial;
  if (given("--k1")) spec.retrieval.k1 = args.k1;
  if (given("--k-final")) spec.retrieval.k_final = args.k_final;
  if (given("--model")) spec.enhance.model_name = args.model;
  if (given("--batches")) spec.enhance.batch_count = args.batches;
  if (given("--batch-retries")) spec.enhance.batch_retries = args.retries;
  if (given("--template")) spec.template_path = args.template_path;
  if (given("--cache-dir")) spec.cache_dir = args.cache_dir;
  if (given("--sample-count")) {
    SampleSpec sample;
    sample.count = args.sample_count;
    sample.seed = args.sample_seed;
    spec.sample = sample;
  } else if (given("--sample-seed") && spec.sample) {
    spec.sample->seed = args.sample_seed;
  }
  if (given("--pool-size")) spec.pool_size = args.pool_size;
  if (given("--pool-seed")) spec.pool_seed = args.pool_seed;
  if (given("--out")) spec.output_dir = args.out;
  if (given("--jobs")) spec.jobs = args.jobs;
  if (auto chat = args.chat.resolve()) spec.chat = chat;

  auto outcome = run_benchmark(spec);
  std::cout << "pool " << outcome.pool_ids.size() << " images, "
            << outcome.sampled_query_ids.size() << " queries, "
            << outcome.records.size() << " records, "
            << outcome.failures.size() << " failed cell(s)\n";
  std::cout << "reports written to "
            << std::filesystem::path(spec.output_dir).string() << "\n";
  for (const auto& failure : outcome.failures) {
    std::cerr << "failed: " << failure.key.encoder << "/"
              << to_string(failure.key.granularity) << "/"
              << to_string(failure.key.mode) << ": " << failure.message
              << "\n";
  }
  return outcome.exit_code();
}

// ----------------------------------------------------------------- heatmap

struct HeatmapArgs {
  std::string images;
  std::string queries;
  std::string query_id;
  std::string provider_spec;
  std::string template_path;
  std::string cache_dir;
  std::string model = "default";
  int batches = 3;
  int retries = 2;
  std::string out;
  ChatFlags chat;
};

int cmd_heatmap(const HeatmapArgs& args) {
  auto manifest = load_manifest(args.images, args.queries);
  const QueryRecord* query = nullptr;
  for (const auto& candidate : manifest.queries) {
    if (candidate.id == args.query_id) {
      query = &candidate;
      break;
    }
  }
  if (!query) {
    throw CfqError(ErrorKind::lookup,
                   "query '" + args.query_id + "' not in manifest");
  }

  EnhancedQuery enhanced;
  if (!args.template_path.empty()) {
    if (args.cache_dir.empty()) {
      throw CfqError(ErrorKind::config,
                     "enhanced heatmaps need --cache-dir");
    }
    auto tmpl = load_template(args.template_path);
    check_template(tmpl);
    std::shared_ptr<GenTransport> transport;
    if (auto chat = args.chat.resolve()) transport = make_http_transport(*chat);
    GenClient client(args.cache_dir, transport);
    EnhanceOptions options;
    options.model_name = args.model;
    options.batch_count = args.batches;
    options.batch_retries = args.retries;
    enhanced = enhance(query->text, tmpl, client, options);
  } else {
    enhanced = passthrough(query->text);
  }

  auto provider = make_provider(args.provider_spec);
  std::vector<std::string> pool;
  for (const auto& image : manifest.images) pool.push_back(image.id);
  std::sort(pool.begin(), pool.end());
  auto index = build_image_index(*provider, pool);
  write_text_file(args.out,
                  render_heatmap_csv(query->text, enhanced, index, *provider));
  std::cout << "wrote " << (1 + enhanced.pooled.size()) << "x" << pool.size()
            << " heatmap grid to " << args.out << "\n";
  return 0;
}

// ----------------------------------------------------------------- compare

int cmd_compare(const std::string& path_a, const std::string& path_b,
                const std::string& out) {
  auto report_a = parse_report_csv(read_file(path_a));
  auto report_b = parse_report_csv(read_file(path_b));
  auto deltas = compare_runs(report_a, report_b);
  auto csv = render_compare_csv(deltas);
  if (out.empty()) {
    std::cout << csv;
  } else {
    write_text_file(out, csv);
    std::cout << "wrote " << deltas.size() << " cell deltas to " << out
              << "\n";
  }
  return 0;
}

// ------------------------------------------------------------ build-corpus

struct CorpusArgs {
  std::string images;
  std::string captions;
  std::string phrases;
  std::string templates_dir;
  std::string cache_dir;
  std::string model = "default";
  std::vector<std::string> stages = {"tags", "triples", "fragments", "merge",
                                     "assemble"};
  double tau = 0.0;
  std::string merge_encoder;
  std::size_t fragment_group = 3;
  std::string out;
  ChatFlags chat;
};

int cmd_build_corpus(const CorpusArgs& args, const CLI::App* cmd) {
  CorpusSpec spec;
  spec.images_path = args.images;
  spec.captions_path = args.captions;
  spec.phrases_path = args.phrases;
  spec.templates_dir = args.templates_dir;
  spec.cache_dir = args.cache_dir;
  spec.chat = args.chat.resolve();
  spec.model_name = args.model;
  spec.stages.clear();
  for (const auto& stage : args.stages) spec.stages.insert(stage);
  if (cmd->count("--tau") > 0) spec.tau = args.tau;
  spec.merge_encoder = args.merge_encoder;
  spec.fragment_group = args.fragment_group;
  spec.output_dir = args.out;

  auto outcome = build_corpus(spec);
  std::cout << render_counts_csv(outcome.counts);
  for (const auto& note : outcome.notes) std::cout << "note: " << note << "\n";
  std::cout << "generation: " << outcome.gen_stats.cache_hits << " hits, "
            << outcome.gen_stats.cache_misses << " misses, "
            << outcome.gen_stats.network_calls << " network calls\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Granular text-image retrieval bench: corpus building, "
               "query enhancement, two-stage retrieval, reports"};
  app.require_subcommand(1);

  auto* validate = app.add_subcommand("validate", "Check a dataset manifest");
  std::string v_images, v_queries;
  validate->add_option("--images", v_images, "images.jsonl")->required();
  validate->add_option("--queries", v_queries, "queries.jsonl")->required();

  auto* embed = app.add_subcommand("embed", "Build an embedding store");
  EmbedArgs embed_args;
  embed->add_option("--provider", embed_args.provider_spec,
                    "synthetic:seed=S,dim=D or a store file");
  embed->add_option("--images", embed_args.images, "images.jsonl to embed");
  embed->add_option("--queries", embed_args.queries,
                    "queries.jsonl whose texts to embed");
  embed->add_option("--texts", embed_args.texts, "plain file, one text per line");
  embed->add_option("--out", embed_args.out, "output store file")->required();
  embed->add_option("--encoder-endpoint", embed_args.endpoint,
                    "remote encoder URL (overrides --provider)");
  embed->add_option("--encoder-key-env", embed_args.api_key_env,
                    "env var with the encoder API key");
  embed->add_option("--dim", embed_args.dim, "expected remote dimension");
  embed->add_option("--encoder-timeout", embed_args.timeout_seconds,
                    "remote timeout, seconds");
  embed->add_option("--encoder-retries", embed_args.max_retries,
                    "remote transport retries");
  embed->add_option("--encoder-batch", embed_args.batch_size,
                    "remote batch size");

  auto* enhance_cmd = app.add_subcommand("enhance",
                                         "Pre-warm the generation cache");
  EnhanceArgs enhance_args;
  enhance_cmd->add_option("--queries", enhance_args.queries, "queries.jsonl")
      ->required();
  enhance_cmd->add_option("--template", enhance_args.template_path,
                          "expansion template")->required();
  enhance_cmd->add_option("--cache-dir", enhance_args.cache_dir,
                          "generation cache directory")->required();
  enhance_cmd->add_option("--model", enhance_args.model, "model name");
  enhance_cmd->add_option("--batches", enhance_args.batches,
                          "expansion turns per query");
  enhance_cmd->add_option("--out", enhance_args.out,
                          "write unique pooled sentences, one per line");
  enhance_cmd->add_option("--batch-retries", enhance_args.retries,
                          "refresh attempts per empty turn");
  enhance_args.chat.attach(enhance_cmd);

  auto* run = app.add_subcommand("run", "Run the benchmark cells");
  RunArgs run_args;
  run->add_option("--config", run_args.config_file,
                  "JSON config supplying any of the flags");
  run->add_option("--images", run_args.images, "images.jsonl");
  run->add_option("--queries", run_args.queries, "queries.jsonl");
  run->add_option("--encoder", run_args.encoders,
                  "name=provider-spec (repeatable)");
  run->add_option("--mode", run_args.modes,
                  "baseline | enhanced_maxsim | enhanced_vote (repeatable)");
  run->add_option("--granularity", run_args.granularities,
                  "granularities to run (repeatable; default: all present)");
  run->add_option("--n-initial", run_args.n_initial, "initial candidate count");
  run->add_option("--k1", run_args.k1, "stage-1 keep count");
  run->add_option("--k-final", run_args.k_final, "final result size");
  run->add_option("--model", run_args.model, "generation model name");
  run->add_option("--batches", run_args.batches, "expansion turns per query");
  run->add_option("--batch-retries", run_args.retries,
                  "refresh attempts per empty turn");
  run->add_option("--template", run_args.template_path, "expansion template");
  run->add_option("--cache-dir", run_args.cache_dir, "generation cache");
  run->add_option("--sample-count", run_args.sample_count,
                  "queries sampled per granularity");
  run->add_option("--sample-seed", run_args.sample_seed, "sampling seed");
  run->add_option("--pool-size", run_args.pool_size,
                  "evaluation pool size (0 = whole catalog)");
  run->add_option("--pool-seed", run_args.pool_seed, "distractor draw seed");
  run->add_option("--out", run_args.out, "output directory");
  run->add_option("--jobs", run_args.jobs, "parallel cell workers");
  run_args.chat.attach(run);

  auto* heatmap = app.add_subcommand("heatmap",
                                     "Export one query's similarity grid");
  HeatmapArgs heatmap_args;
  heatmap->add_option("--images", heatmap_args.images, "images.jsonl")
      ->required();
  heatmap->add_option("--queries", heatmap_args.queries, "queries.jsonl")
      ->required();
  heatmap->add_option("--query-id", heatmap_args.query_id, "query to plot")
      ->required();
  heatmap->add_option("--provider", heatmap_args.provider_spec,
                      "embedding provider spec")->required();
  heatmap->add_option("--template", heatmap_args.template_path,
                      "expansion template (omit for the plain query row)");
  heatmap->add_option("--cache-dir", heatmap_args.cache_dir,
                      "generation cache");
  heatmap->add_option("--model", heatmap_args.model, "model name");
  heatmap->add_option("--batches", heatmap_args.batches, "expansion turns");
  heatmap->add_option("--batch-retries", heatmap_args.retries,
                      "refresh attempts per empty turn");
  heatmap->add_option("--out", heatmap_args.out, "output CSV")->required();
  heatmap_args.chat.attach(heatmap);

  auto* compare = app.add_subcommand("compare", "Diff two report.csv files");
  std::string c_a, c_b, c_out;
  compare->add_option("--a", c_a, "first report.csv")->required();
  compare->add_option("--b", c_b, "second report.csv")->required();
  compare->add_option("--out", c_out, "output CSV (default: stdout)");

  auto* corpus = app.add_subcommand("build-corpus",
                                    "Assemble the five-granularity corpus");
  CorpusArgs corpus_args;
  corpus->add_option("--images", corpus_args.images, "images.jsonl")
      ->required();
  corpus->add_option("--captions", corpus_args.captions,
                     "captions.jsonl ({id, image_id, text} lines)")
      ->required();
  corpus->add_option("--phrases", corpus_args.phrases,
                     "phrases.jsonl (same shape; optional)");
  corpus->add_option("--templates-dir", corpus_args.templates_dir,
                     "directory with tag_*.txt, triples.txt, fragment.txt")
      ->required();
  corpus->add_option("--cache-dir", corpus_args.cache_dir, "generation cache");
  corpus->add_option("--model", corpus_args.model, "model name");
  corpus->add_option("--stages", corpus_args.stages,
                     "stages to run (tags triples fragments merge assemble)")
      ->delimiter(',');
  corpus->add_option("--tau", corpus_args.tau,
                     "merge similarity threshold (required by merge)");
  corpus->add_option("--merge-encoder", corpus_args.merge_encoder,
                     "embedding provider spec for the merge stage");
  corpus->add_option("--fragment-group", corpus_args.fragment_group,
                     "triples fused per fragment (>= 2)");
  corpus->add_option("--out", corpus_args.out, "output directory");
  corpus_args.chat.attach(corpus);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(validate)) return cmd_validate(v_images, v_queries);
    if (app.got_subcommand(embed)) return cmd_embed(embed_args);
    if (app.got_subcommand(enhance_cmd)) return cmd_enhance(enhance_args);
    if (app.got_subcommand(run)) return cmd_run(run_args, run);
    if (app.got_subcommand(heatmap)) return cmd_heatmap(heatmap_args);
    if (app.got_subcommand(compare)) return cmd_compare(c_a, c_b, c_out);
    if (app.got_subcommand(corpus)) return cmd_build_corpus(corpus_args, corpus);
  } catch (const CfqError& error) {
    std::cerr << "error: " << error.what() << "\n";
    return 2;
  } catch (const std::exception& error) {
    std::cerr << "error: " << error.what() << "\n";
    return 2;
  }
  return 0;
}
