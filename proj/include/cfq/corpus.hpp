#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cfq/embedding.hpp"
#include "cfq/enhancer.hpp"
#include "cfq/genclient.hpp"
#include "cfq/types.hpp"

namespace cfq {

/// One subject-predicate-object relation lifted from a caption. All three
/// parts are non-empty after trimming and free of the '|' field delimiter.
struct SpoTriple {
  std::string subject;
  std::string predicate;
  std::string object;
  std::string source_caption_id;

  bool operator==(const SpoTriple&) const = default;
};

/// A short text fused from at least two triples of one image.
struct FragmentRecord {
  std::string text;
  std::vector<SpoTriple> source_triples;  // size >= 2
  std::vector<std::string> image_ids;
};

/// One vocabulary tag with every image it was generated for. Tags are
/// case-folded; the vocabulary holds no case-insensitive duplicates.
struct ImageryTagRecord {
  std::string tag;
  std::vector<std::string> image_ids;  // sorted unique
};

/// Caption / phrase source row: line-delimited JSON {id, image_id, text}.
struct CaptionRecord {
  std::string id;
  std::string image_id;
  std::string text;
};

std::vector<CaptionRecord> load_caption_file(
    const std::filesystem::path& path);

/// "subject | predicate | object" -> triple; anything else -> nullopt.
std::optional<SpoTriple> parse_triple_line(const std::string& line,
                                           const std::string& caption_id);

/// ASCII lowercase + trim; the tag vocabulary key.
std::string fold_tag(const std::string& tag);

// The generation requests the corpus stages issue. Exposed so fixtures can
// warm the cache with byte-identical keys.
GenerationRequest tag_request(const PromptTemplate& tmpl,
                              const std::string& image_uri,
                              const std::string& model_name);
GenerationRequest triple_request(const PromptTemplate& tmpl,
                                 const std::string& caption_text,
                                 const std::string& model_name);
GenerationRequest fragment_request(const PromptTemplate& tmpl,
                                   std::span<const SpoTriple> triples,
                                   const std::string& model_name);

/// Runs every tag template against one image and merges the outputs: parse
/// into lines, keep lines of at most 6 words, case-fold, deduplicate in
/// first-occurrence order. With a live transport lacking vision support this
/// is a capability error before any call.
std::vector<std::string> generate_imagery_tags(
    const std::string& image_uri, std::span<const PromptTemplate> templates,
    GenClient& client, const std::string& model_name);

/// Prompts for one-triple-per-line output over a caption and parses the
/// well-shaped lines. Zero valid triples is an empty list, not an error.
std::vector<SpoTriple> extract_triples(const CaptionRecord& caption,
                                       const PromptTemplate& tmpl,
                                       GenClient& client,
                                       const std::string& model_name);

/// Fuses >= 2 triples of one image into a single-sentence fragment. An empty
/// generation propagates as the group's fusion error.
FragmentRecord fuse_fragments(std::span<const SpoTriple> triples,
                              const std::vector<std::string>& image_ids,
                              const PromptTemplate& tmpl, GenClient& client,
                              const std::string& model_name);

/// Unions the true_image_ids of queries whose texts are near-duplicates:
/// cosine >= tau links a pair (byte-identical texts count as similarity 1),
/// links close transitively. Order and all other fields are preserved;
/// applying the merge twice changes nothing.
std::vector<QueryRecord> merge_ground_truth(std::vector<QueryRecord> queries,
                                            EmbeddingProvider& provider,
                                            double tau);

struct CorpusInputs {
  std::vector<ImageRecord> images;
  std::vector<CaptionRecord> captions;
  std::vector<CaptionRecord> phrases;
  std::vector<ImageryTagRecord> tags;
  std::vector<SpoTriple> triples;
  std::vector<FragmentRecord> fragments;
};

/// Per-granularity query counts, in report column order.
struct CorpusCounts {
  std::size_t captions = 0;
  std::size_t imagery_tags = 0;
  std::size_t phrases = 0;
  std::size_t triples = 0;
  std::size_t fragments = 0;
};

/// caption,imagery_tag,phrase,triple,fragment header plus one count row.
std::string render_counts_csv(const CorpusCounts& counts);

/// Assembles the five granularities into one manifest (triples serialize as
/// space-joined "subject predicate object"). The result must pass
/// validate_manifest; violations abort the build listing them.
DatasetManifest build_manifest(const CorpusInputs& inputs);

CorpusCounts count_granularities(const DatasetManifest& manifest);

/// Full pipeline configuration for the build-corpus command.
struct CorpusSpec {
  std::filesystem::path images_path;
  std::filesystem::path captions_path;
  std::filesystem::path phrases_path;   // optional
  std::filesystem::path templates_dir;  // tag_*.txt, triples.txt, fragment.txt
  std::filesystem::path cache_dir;
  std::optional<ChatEndpointConfig> chat;
  std::string model_name = "default";
  std::set<std::string> stages = {"tags", "triples", "fragments", "merge",
                                  "assemble"};
  std::optional<double> tau;  // mandatory when the merge stage runs
  std::string merge_encoder;  // provider spec for merge embeddings
  std::size_t fragment_group = 3;
  std::filesystem::path output_dir;
};

struct CorpusOutcome {
  DatasetManifest manifest;
  CorpusCounts counts;
  std::vector<std::string> notes;  // skipped captions, failed fusions, ...
  GenStats gen_stats;
};

/// Runs the requested stages and assembles the manifest. The "assemble"
/// stage controls whether manifest files are written to output_dir.
CorpusOutcome build_corpus(const CorpusSpec& spec);

}  // namespace cfq
