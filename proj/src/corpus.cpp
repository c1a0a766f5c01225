#include "cfq/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <json.hpp>
#include <map>
#include <numeric>
#include <sstream>

#include "cfq/error.hpp"
#include "cfq/manifest_io.hpp"

namespace cfq {
namespace {

std::size_t word_count(const std::string& text) {
  std::istringstream in(text);
  std::string word;
  std::size_t count = 0;
  while (in >> word) ++count;
  return count;
}

std::string join_triples(std::span<const SpoTriple> triples) {
  std::string out;
  for (const auto& triple : triples) {
    if (!out.empty()) out += '\n';
    out += triple.subject + " | " + triple.predicate + " | " + triple.object;
  }
  return out;
}

/// Union-find over query indices with path halving.
class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) { parent_[find(a)] = find(b); }

 private:
  std::vector<std::size_t> parent_;
};

double pair_cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  double acc = 0.0;
  for (std::size_t d = 0; d < a.dimension(); ++d) {
    acc += static_cast<double>(a.values[d]) * static_cast<double>(b.values[d]);
  }
  if (!(a.normalized && b.normalized)) {
    double norms = a.l2_norm() * b.l2_norm();
    if (!(norms > 0.0)) {
      throw CfqError(ErrorKind::domain, "cosine undefined for zero vector");
    }
    acc /= norms;
  }
  return acc;
}

}  // namespace

std::vector<CaptionRecord> load_caption_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw CfqError(ErrorKind::io, "cannot open '" + path.string() + "'");
  }
  std::vector<CaptionRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& error) {
      throw CfqError(ErrorKind::parse, path.string() + " line " +
                                           std::to_string(line_no) + ": " +
                                           error.what());
    }
    CaptionRecord record;
    for (const char* field : {"id", "image_id", "text"}) {
      if (!obj.contains(field) || !obj[field].is_string() ||
          obj[field].get<std::string>().empty()) {
        throw CfqError(ErrorKind::parse,
                       path.string() + " line " + std::to_string(line_no) +
                           ": missing string field '" + field + "'");
      }
    }
    record.id = obj["id"].get<std::string>();
    record.image_id = obj["image_id"].get<std::string>();
    record.text = obj["text"].get<std::string>();
    out.push_back(std::move(record));
  }
  return out;
}

std::optional<SpoTriple> parse_triple_line(const std::string& line,
                                           const std::string& caption_id) {
  std::vector<std::string> parts;
  std::string part;
  for (char c : line) {
    if (c == '|') {
      parts.push_back(part);
      part.clear();
    } else {
      part.push_back(c);
    }
  }
  parts.push_back(part);
  if (parts.size() != 3) return std::nullopt;
  SpoTriple triple;
  triple.subject = trim(parts[0]);
  triple.predicate = trim(parts[1]);
  triple.object = trim(parts[2]);
  triple.source_caption_id = caption_id;
  if (triple.subject.empty() || triple.predicate.empty() ||
      triple.object.empty()) {
    return std::nullopt;
  }
  return triple;
}

std::string fold_tag(const std::string& tag) {
  std::string folded = trim(tag);
  for (char& c : folded) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return folded;
}

GenerationRequest tag_request(const PromptTemplate& tmpl,
                              const std::string& image_uri,
                              const std::string& model_name) {
  GenerationRequest request;
  request.model_name = model_name;
  request.prompt = tmpl.body;
  request.image_uri = image_uri;
  request.temperature = tmpl.temperature;
  request.max_tokens = tmpl.max_tokens;
  return request;
}

GenerationRequest triple_request(const PromptTemplate& tmpl,
                                 const std::string& caption_text,
                                 const std::string& model_name) {
  GenerationRequest request;
  request.model_name = model_name;
  request.prompt = render_template(tmpl.body, "caption", caption_text);
  request.temperature = tmpl.temperature;
  request.max_tokens = tmpl.max_tokens;
  return request;
}

GenerationRequest fragment_request(const PromptTemplate& tmpl,
                                   std::span<const SpoTriple> triples,
                                   const std::string& model_name) {
  GenerationRequest request;
  request.model_name = model_name;
  request.prompt = render_template(tmpl.body, "triples", join_triples(triples));
  request.temperature = tmpl.temperature;
  request.max_tokens = tmpl.max_tokens;
  return request;
}

std::vector<std::string> generate_imagery_tags(
    const std::string& image_uri, std::span<const PromptTemplate> templates,
    GenClient& client, const std::string& model_name) {
  if (image_uri.empty()) {
    throw CfqError(ErrorKind::contract, "image uri is empty");
  }
  if (templates.empty()) {
    throw CfqError(ErrorKind::contract, "no tag templates given");
  }
  if (!client.offline() && !client.transport_supports_vision()) {
    throw CfqError(ErrorKind::capability,
                   "generation endpoint does not accept images");
  }
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& tmpl : templates) {
    auto raw = client.generate(tag_request(tmpl, image_uri, model_name));
    std::vector<std::string> lines;
    try {
      lines = parse_sentence_list(raw, tmpl.n);
    } catch (const CfqError& error) {
      if (error.kind() != ErrorKind::empty_generation) throw;
      continue;  // a dry template is not fatal; other templates may produce
    }
    for (const auto& line : lines) {
      auto folded = fold_tag(line);
      if (folded.empty() || word_count(folded) > 6) continue;
      if (seen.insert(folded).second) out.push_back(folded);
    }
  }
  return out;
}

std::vector<SpoTriple> extract_triples(const CaptionRecord& caption,
                                       const PromptTemplate& tmpl,
                                       GenClient& client,
                                       const std::string& model_name) {
  if (trim(caption.text).empty()) {
    throw CfqError(ErrorKind::contract, "caption text is empty");
  }
  auto raw = client.generate(triple_request(tmpl, caption.text, model_name));
  std::vector<std::string> lines;
  try {
    lines = parse_sentence_list(raw, 0);
  } catch (const CfqError& error) {
    if (error.kind() != ErrorKind::empty_generation) throw;
    return {};
  }
  std::vector<SpoTriple> out;
  for (const auto& line : lines) {
    if (auto triple = parse_triple_line(line, caption.id)) {
      out.push_back(std::move(*triple));
    }
  }
  return out;
}

FragmentRecord fuse_fragments(std::span<const SpoTriple> triples,
                              const std::vector<std::string>& image_ids,
                              const PromptTemplate& tmpl, GenClient& client,
                              const std::string& model_name) {
  if (triples.size() < 2) {
    throw CfqError(ErrorKind::contract,
                   "a fragment needs at least 2 source triples");
  }
  auto raw = client.generate(fragment_request(tmpl, triples, model_name));
  auto sentences = parse_sentence_list(raw, 1);
  FragmentRecord record;
  record.text = sentences.front();
  record.source_triples.assign(triples.begin(), triples.end());
  record.image_ids = image_ids;
  std::sort(record.image_ids.begin(), record.image_ids.end());
  record.image_ids.erase(
      std::unique(record.image_ids.begin(), record.image_ids.end()),
      record.image_ids.end());
  return record;
}

std::vector<QueryRecord> merge_ground_truth(std::vector<QueryRecord> queries,
                                            EmbeddingProvider& provider,
                                            double tau) {
  if (queries.size() < 2) return queries;
  std::vector<std::string> texts;
  texts.reserve(queries.size());
  for (const auto& query : queries) texts.push_back(query.text);
  auto vectors = provider.embed_texts(texts);

  DisjointSets sets(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    for (std::size_t j = i + 1; j < queries.size(); ++j) {
      // Byte-identical texts always merge (for any tau <= 1) regardless of
      // float rounding in their embeddings.
      double similarity = texts[i] == texts[j]
                              ? 1.0
                              : pair_cosine(vectors[i], vectors[j]);
      if (similarity >= tau) sets.unite(i, j);
    }
  }

  std::map<std::size_t, std::set<std::string>> merged;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    auto& slot = merged[sets.find(i)];
    slot.insert(queries[i].true_image_ids.begin(),
                queries[i].true_image_ids.end());
  }
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto& slot = merged[sets.find(i)];
    queries[i].true_image_ids.assign(slot.begin(), slot.end());
  }
  return queries;
}

std::string render_counts_csv(const CorpusCounts& counts) {
  std::string out = "caption,imagery_tag,phrase,triple,fragment\n";
  out += std::to_string(counts.captions) + "," +
         std::to_string(counts.imagery_tags) + "," +
         std::to_string(counts.phrases) + "," +
         std::to_string(counts.triples) + "," +
         std::to_string(counts.fragments) + "\n";
  return out;
}

DatasetManifest build_manifest(const CorpusInputs& inputs) {
  DatasetManifest manifest;
  manifest.images = inputs.images;

  auto add_query = [&](std::string id, std::string text,
                       GranularityLevel granularity,
                       std::vector<std::string> truth) {
    std::sort(truth.begin(), truth.end());
    truth.erase(std::unique(truth.begin(), truth.end()), truth.end());
    QueryRecord query;
    query.id = std::move(id);
    query.text = std::move(text);
    query.granularity = granularity;
    query.true_image_ids = std::move(truth);
    manifest.queries.push_back(std::move(query));
  };

  std::map<std::string, std::string> caption_image;
  for (const auto& caption : inputs.captions) {
    caption_image[caption.id] = caption.image_id;
    add_query("caption:" + caption.id, caption.text, GranularityLevel::caption,
              {caption.image_id});
  }

  std::vector<const ImageryTagRecord*> tags;
  for (const auto& tag : inputs.tags) tags.push_back(&tag);
  std::sort(tags.begin(), tags.end(),
            [](const auto* a, const auto* b) { return a->tag < b->tag; });
  for (std::size_t k = 0; k < tags.size(); ++k) {
    add_query("tag:" + std::to_string(k), tags[k]->tag,
              GranularityLevel::imagery_tag, tags[k]->image_ids);
  }

  for (const auto& phrase : inputs.phrases) {
    add_query("phrase:" + phrase.id, phrase.text, GranularityLevel::phrase,
              {phrase.image_id});
  }

  for (std::size_t k = 0; k < inputs.triples.size(); ++k) {
    const auto& triple = inputs.triples[k];
    auto it = caption_image.find(triple.source_caption_id);
    if (it == caption_image.end()) {
      throw CfqError(ErrorKind::validation,
                     "triple " + std::to_string(k) +
                         " references unknown caption '" +
                         triple.source_caption_id + "'");
    }
    add_query("triple:" + std::to_string(k),
              triple.subject + " " + triple.predicate + " " + triple.object,
              GranularityLevel::triple, {it->second});
  }

  for (std::size_t k = 0; k < inputs.fragments.size(); ++k) {
    const auto& fragment = inputs.fragments[k];
    if (fragment.source_triples.size() < 2) {
      throw CfqError(ErrorKind::validation,
                     "fragment " + std::to_string(k) +
                         " has fewer than 2 source triples");
    }
    add_query("fragment:" + std::to_string(k), fragment.text,
              GranularityLevel::fragment, fragment.image_ids);
  }

  auto counts = count_granularities(manifest);
  manifest.metadata["caption_count"] = std::to_string(counts.captions);
  manifest.metadata["imagery_tag_count"] = std::to_string(counts.imagery_tags);
  manifest.metadata["phrase_count"] = std::to_string(counts.phrases);
  manifest.metadata["triple_count"] = std::to_string(counts.triples);
  manifest.metadata["fragment_count"] = std::to_string(counts.fragments);

  auto violations = validate_manifest(manifest);
  if (!violations.empty()) {
    std::string message = "built manifest is invalid:";
    for (const auto& violation : violations) {
      message += "\n  " + violation.record_id + ": " + violation.rule + " (" +
                 violation.message + ")";
    }
    throw CfqError(ErrorKind::validation, message);
  }
  return manifest;
}

CorpusCounts count_granularities(const DatasetManifest& manifest) {
  CorpusCounts counts;
  for (const auto& query : manifest.queries) {
    switch (query.granularity) {
      case GranularityLevel::caption: ++counts.captions; break;
      case GranularityLevel::imagery_tag: ++counts.imagery_tags; break;
      case GranularityLevel::phrase: ++counts.phrases; break;
      case GranularityLevel::triple: ++counts.triples; break;
      case GranularityLevel::fragment: ++counts.fragments; break;
    }
  }
  return counts;
}

CorpusOutcome build_corpus(const CorpusSpec& spec) {
  namespace fs = std::filesystem;
  auto want = [&](const char* stage) {
    return spec.stages.count(stage) != 0;
  };
  if (want("fragments") && !want("triples")) {
    throw CfqError(ErrorKind::config,
                   "the fragments stage needs the triples stage");
  }
  if (want("merge")) {
    if (!spec.tau) {
      throw CfqError(ErrorKind::config,
                     "the merge stage needs an explicit tau");
    }
    if (spec.merge_encoder.empty()) {
      throw CfqError(ErrorKind::config,
                     "the merge stage needs an embedding provider");
    }
  }
  bool needs_generation =
      want("tags") || want("triples") || want("fragments");
  if (needs_generation && spec.cache_dir.empty()) {
    throw CfqError(ErrorKind::config,
                   "generation stages need a cache directory");
  }
  if (spec.fragment_group < 2) {
    throw CfqError(ErrorKind::config, "fragment group size must be >= 2");
  }

  CorpusInputs inputs;
  inputs.images = load_images(spec.images_path);
  inputs.captions = load_caption_file(spec.captions_path);
  if (!spec.phrases_path.empty()) {
    inputs.phrases = load_caption_file(spec.phrases_path);
  }

  CorpusOutcome outcome;
  std::shared_ptr<GenClient> client;
  if (needs_generation) {
    std::shared_ptr<GenTransport> transport;
    if (spec.chat) transport = make_http_transport(*spec.chat);
    client = std::make_shared<GenClient>(spec.cache_dir, transport);
  }

  auto load_named_template = [&](const char* file, const char* placeholder) {
    auto tmpl = load_template(spec.templates_dir / file);
    if (placeholder_count(tmpl.body, placeholder) != 1) {
      throw CfqError(ErrorKind::parse,
                     std::string(file) + " must contain {" + placeholder +
                         "} exactly once");
    }
    return tmpl;
  };

  if (want("tags")) {
    std::vector<PromptTemplate> templates;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(spec.templates_dir)) {
      auto name = entry.path().filename().string();
      if (name.rfind("tag_", 0) == 0 && entry.path().extension() == ".txt") {
        files.push_back(entry.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) templates.push_back(load_template(file));
    if (templates.empty()) {
      throw CfqError(ErrorKind::config, "no tag_*.txt templates in '" +
                                            spec.templates_dir.string() + "'");
    }

    std::vector<const ImageRecord*> images;
    for (const auto& image : inputs.images) images.push_back(&image);
    std::sort(images.begin(), images.end(),
              [](const auto* a, const auto* b) { return a->id < b->id; });
    std::map<std::string, std::set<std::string>> vocabulary;
    for (const auto* image : images) {
      auto tags = generate_imagery_tags(image->uri, templates, *client,
                                        spec.model_name);
      for (const auto& tag : tags) vocabulary[tag].insert(image->id);
    }
    for (const auto& [tag, ids] : vocabulary) {
      inputs.tags.push_back(
          {tag, std::vector<std::string>(ids.begin(), ids.end())});
    }
  }

  if (want("triples")) {
    auto tmpl = load_named_template("triples.txt", "caption");
    for (const auto& caption : inputs.captions) {
      auto triples = extract_triples(caption, tmpl, *client, spec.model_name);
      if (triples.empty()) {
        outcome.notes.push_back("caption '" + caption.id +
                                "' produced no triples");
        continue;
      }
      for (auto& triple : triples) inputs.triples.push_back(std::move(triple));
    }
  }

  if (want("fragments")) {
    auto tmpl = load_named_template("fragment.txt", "triples");
    std::map<std::string, std::string> caption_image;
    for (const auto& caption : inputs.captions) {
      caption_image[caption.id] = caption.image_id;
    }
    std::map<std::string, std::vector<SpoTriple>> per_image;
    for (const auto& triple : inputs.triples) {
      per_image[caption_image.at(triple.source_caption_id)].push_back(triple);
    }
    for (const auto& [image_id, triples] : per_image) {
      if (triples.size() < 2) {
        outcome.notes.push_back("image '" + image_id +
                                "' has too few triples for a fragment");
        continue;
      }
      // Consecutive groups of fragment_group triples; a trailing singleton
      // joins the previous group so every group keeps >= 2 members.
      std::vector<std::pair<std::size_t, std::size_t>> groups;
      for (std::size_t start = 0; start < triples.size();
           start += spec.fragment_group) {
        groups.emplace_back(start,
                            std::min(start + spec.fragment_group,
                                     triples.size()));
      }
      if (groups.size() > 1 &&
          groups.back().second - groups.back().first < 2) {
        groups[groups.size() - 2].second = groups.back().second;
        groups.pop_back();
      }
      for (auto [begin, end] : groups) {
        std::span<const SpoTriple> group(triples.data() + begin, end - begin);
        try {
          inputs.fragments.push_back(fuse_fragments(
              group, {image_id}, tmpl, *client, spec.model_name));
        } catch (const CfqError& error) {
          if (error.kind() != ErrorKind::empty_generation) throw;
          outcome.notes.push_back("fusion produced nothing for image '" +
                                  image_id + "'");
        }
      }
    }
  }

  outcome.manifest = build_manifest(inputs);

  if (want("merge")) {
    auto provider = make_provider(spec.merge_encoder);
    outcome.manifest.queries = merge_ground_truth(
        std::move(outcome.manifest.queries), *provider, *spec.tau);
  }

  outcome.counts = count_granularities(outcome.manifest);
  if (client) outcome.gen_stats = client->stats();

  if (want("assemble")) {
    if (spec.output_dir.empty()) {
      throw CfqError(ErrorKind::config, "output directory not set");
    }
    fs::create_directories(spec.output_dir);
    save_manifest(outcome.manifest, spec.output_dir / "images.jsonl",
                  spec.output_dir / "queries.jsonl");
    write_text_file(spec.output_dir / "counts.csv",
                    render_counts_csv(outcome.counts));
  }
  return outcome;
}

}  // namespace cfq
