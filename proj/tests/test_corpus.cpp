#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include "cfq/corpus.hpp"
#include "cfq/error.hpp"
#include "cfq/manifest_io.hpp"
#include "support/fixture_script.hpp"
#include "support/stubs.hpp"

using namespace cfq;
using cfq::testing::ScriptedTransport;
using cfq::testing::TempDir;

namespace {

PromptTemplate corpus_template(std::string body, int n = 5) {
  PromptTemplate tmpl;
  tmpl.name = "test";
  tmpl.body = std::move(body);
  tmpl.n = n;
  tmpl.temperature = 0.2;
  tmpl.max_tokens = 128;
  return tmpl;
}

/// Text -> fixed 2-d direction; lets merge tests plan exact cosines.
class PlannedProvider : public EmbeddingProvider {
 public:
  explicit PlannedProvider(std::map<std::string, std::vector<float>> plan)
      : plan_(std::move(plan)) {}

  std::vector<EmbeddingVector> embed_texts(
      std::span<const std::string> texts) override {
    std::vector<EmbeddingVector> out;
    for (const auto& text : texts) {
      out.push_back(normalized({plan_.at(text), false}));
    }
    return out;
  }
  std::vector<EmbeddingVector> embed_images(
      std::span<const std::string> keys) override {
    return embed_texts(keys);
  }
  std::uint32_t dimension() const override { return 2; }
  std::string name() const override { return "planned"; }

 private:
  std::map<std::string, std::vector<float>> plan_;
};

QueryRecord query_of(std::string id, std::string text,
                     std::vector<std::string> truth) {
  QueryRecord query;
  query.id = std::move(id);
  query.text = std::move(text);
  query.granularity = GranularityLevel::caption;
  query.true_image_ids = std::move(truth);
  return query;
}

const std::filesystem::path kFixtures = CFQ_FIXTURES_DIR;
const std::filesystem::path kTemplates = CFQ_TEMPLATES_DIR;

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

std::map<std::string, std::string> dir_contents(
    const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    out[entry.path().filename().string()] = slurp(entry.path());
  }
  return out;
}

}  // namespace

TEST_CASE("caption files parse {id, image_id, text} lines") {
  TempDir dir;
  std::ofstream(dir / "caps.jsonl")
      << R"({"id": "c1", "image_id": "i1", "text": "a dog"})" << "\n\n"
      << R"({"id": "c2", "image_id": "i1", "text": "a cat"})" << "\n";
  auto captions = load_caption_file(dir / "caps.jsonl");
  REQUIRE(captions.size() == 2);
  CHECK(captions[0].id == "c1");
  CHECK(captions[0].image_id == "i1");
  CHECK(captions[0].text == "a dog");

  std::ofstream(dir / "bad.jsonl") << R"({"id": "c1", "text": "no image"})"
                                   << "\n";
  CHECK_THROWS_AS(load_caption_file(dir / "bad.jsonl"), CfqError);
}

TEST_CASE("a pipe-delimited relation line parses into its three parts") {
  auto triple =
      parse_triple_line("children | bundled up for | cold weather", "cap_9");
  REQUIRE(triple.has_value());
  CHECK(triple->subject == "children");
  CHECK(triple->predicate == "bundled up for");
  CHECK(triple->object == "cold weather");
  CHECK(triple->source_caption_id == "cap_9");

  CHECK_FALSE(parse_triple_line("only two | parts", "c").has_value());
  CHECK_FALSE(parse_triple_line("a | b | c | d", "c").has_value());
  CHECK_FALSE(parse_triple_line(" | missing | subject", "c").has_value());
  CHECK_FALSE(parse_triple_line("no pipes at all", "c").has_value());
}

TEST_CASE("tag folding lowercases and trims") {
  CHECK(fold_tag("  Pleasant Afternoon ") == "pleasant afternoon");
  CHECK(fold_tag("QUIET morning") == "quiet morning");
  CHECK(fold_tag("already folded") == "already folded");
}

TEST_CASE("imagery tags merge templates, cap at six words, and fold case") {
  TempDir dir;
  auto transport = std::make_shared<ScriptedTransport>(
      [](const GenerationRequest& request) -> std::string {
        if (request.prompt.find("first") != std::string::npos) {
          return "1. pleasant afternoon\n2. family gathering";
        }
        return "1. Family Gathering\n"
               "2. a very long tag that runs past six words\n"
               "3. warm light";
      },
      /*vision=*/true);
  GenClient client(dir / "cache", transport);
  std::vector<PromptTemplate> templates = {corpus_template("first prompt"),
                                           corpus_template("second prompt")};
  auto tags = generate_imagery_tags("file:///img.jpg", templates, client,
                                    "model");
  // Order is first occurrence across templates; the case-folded duplicate
  // and the 9-word tag are gone.
  CHECK(tags == std::vector<std::string>{"pleasant afternoon",
                                         "family gathering", "warm light"});
}

TEST_CASE("an empty tag generation contributes nothing instead of failing") {
  TempDir dir;
  auto transport = std::make_shared<ScriptedTransport>(
      [](const GenerationRequest& request) -> std::string {
        return request.prompt.find("first") != std::string::npos ? ""
                                                                 : "1. kept";
      },
      /*vision=*/true);
  GenClient client(dir / "cache", transport);
  std::vector<PromptTemplate> templates = {corpus_template("first"),
                                           corpus_template("second")};
  auto tags =
      generate_imagery_tags("file:///img.jpg", templates, client, "model");
  CHECK(tags == std::vector<std::string>{"kept"});
}

TEST_CASE("tagging over a blind endpoint fails before any network call") {
  TempDir dir;
  auto transport = std::make_shared<ScriptedTransport>(
      [](const GenerationRequest&) { return "1. tag"; }, /*vision=*/false);
  GenClient client(dir / "cache", transport);
  std::vector<PromptTemplate> templates = {corpus_template("prompt")};
  try {
    generate_imagery_tags("file:///img.jpg", templates, client, "model");
    FAIL("expected capability error");
  } catch (const CfqError& error) {
    CHECK(error.kind() == ErrorKind::capability);
  }
  CHECK(transport->call_count() == 0);
}

TEST_CASE("triple extraction keeps well-shaped lines and drops the rest") {
  TempDir dir;
  auto transport = std::make_shared<ScriptedTransport>(
      [](const GenerationRequest&) {
        return "1. a brown dog | chases | a red ball\n"
               "not a relation line\n"
               "2. too | many | parts | here";
      });
  GenClient client(dir / "cache", transport);
  CaptionRecord caption{"cap_2", "img_a", "A brown dog chases a red ball"};
  auto triples = extract_triples(caption, corpus_template("{caption}"),
                                 client, "model");
  REQUIRE(triples.size() == 1);
  CHECK(triples[0].subject == "a brown dog");
  CHECK(triples[0].source_caption_id == "cap_2");
}

TEST_CASE("a caption that generates nothing yields zero triples, no error") {
  TempDir dir;
  auto transport = std::make_shared<ScriptedTransport>(
      [](const GenerationRequest&) { return ""; });
  GenClient client(dir / "cache", transport);
  CaptionRecord caption{"cap_6", "img_d", "An empty street at night"};
  CHECK(extract_triples(caption, corpus_template("{caption}"), client, "model")
            .empty());
}

TEST_CASE("fusing fewer than two triples is a contract violation") {
  TempDir dir;
  GenClient client(dir / "cache");
  std::vector<SpoTriple> one = {{"a", "b", "c", "cap"}};
  CHECK_THROWS_AS(fuse_fragments(one, {"img"}, corpus_template("{triples}"),
                                 client, "model"),
                  CfqError);
}

TEST_CASE("fusion renders the triples into the prompt and keeps sources") {
  TempDir dir;
  std::string seen_prompt;
  auto transport = std::make_shared<ScriptedTransport>(
      [&seen_prompt](const GenerationRequest& request) {
        seen_prompt = request.prompt;
        return "1. A dog chases a ball in the park.";
      });
  GenClient client(dir / "cache", transport);
  std::vector<SpoTriple> triples = {
      {"a dog", "chases", "a ball", "cap_1"},
      {"the park", "is", "sunny", "cap_1"},
  };
  auto fragment = fuse_fragments(triples, {"img_a"},
                                 corpus_template("Fuse:\n{triples}"), client,
                                 "model");
  CHECK(fragment.text == "A dog chases a ball in the park.");
  CHECK(fragment.source_triples == triples);
  CHECK(fragment.image_ids == std::vector<std::string>{"img_a"});
  CHECK(seen_prompt.find("a dog | chases | a ball") != std::string::npos);
  CHECK(seen_prompt.find("the park | is | sunny") != std::string::npos);
}

TEST_CASE("ground-truth merging links identical texts as similarity one") {
  // Distinct directions guarantee the non-equal pair stays below tau.
  PlannedProvider provider({{"pleasant afternoon", {1.0f, 0.0f}},
                            {"night skyline", {0.0f, 1.0f}}});
  std::vector<QueryRecord> queries = {
      query_of("q1", "pleasant afternoon", {"img_a"}),
      query_of("q2", "night skyline", {"img_b"}),
      query_of("q3", "pleasant afternoon", {"img_d"}),
  };
  auto merged = merge_ground_truth(queries, provider, 0.95);
  REQUIRE(merged.size() == 3);
  CHECK(merged[0].true_image_ids == std::vector<std::string>{"img_a", "img_d"});
  CHECK(merged[1].true_image_ids == std::vector<std::string>{"img_b"});
  CHECK(merged[2].true_image_ids == std::vector<std::string>{"img_a", "img_d"});
  // Ids, texts, order unchanged.
  CHECK(merged[0].id == "q1");
  CHECK(merged[2].id == "q3");
}

TEST_CASE("merging is transitive across a chain of near-duplicates") {
  // cos(A,B) = 0.9, cos(B,C) = 0.9, cos(A,C) ~ 0.62: only the chain links.
  PlannedProvider provider({{"A", {1.0f, 0.0f}},
                            {"B", {0.9f, 0.43589f}},
                            {"C", {0.62f, 0.78459f}}});
  std::vector<QueryRecord> queries = {query_of("qa", "A", {"img_1"}),
                                      query_of("qb", "B", {"img_2"}),
                                      query_of("qc", "C", {"img_3"})};
  auto merged = merge_ground_truth(queries, provider, 0.89);
  std::vector<std::string> all = {"img_1", "img_2", "img_3"};
  for (const auto& query : merged) {
    CHECK(query.true_image_ids == all);
  }
  // Sanity: with tau above both links nothing merges.
  auto untouched = merge_ground_truth(queries, provider, 0.95);
  CHECK(untouched[0].true_image_ids == std::vector<std::string>{"img_1"});
}

TEST_CASE("merging twice changes nothing and tau above one disables it") {
  PlannedProvider provider({{"same text", {1.0f, 0.0f}},
                            {"other", {0.0f, 1.0f}}});
  std::vector<QueryRecord> queries = {
      query_of("q1", "same text", {"img_a"}),
      query_of("q2", "same text", {"img_b"}),
      query_of("q3", "other", {"img_c"}),
  };
  auto once = merge_ground_truth(queries, provider, 0.99);
  auto twice = merge_ground_truth(once, provider, 0.99);
  CHECK(once == twice);

  // Even byte-identical texts (similarity exactly 1) stay apart at tau 1.01.
  auto none = merge_ground_truth(queries, provider, 1.01);
  CHECK(none[0].true_image_ids == std::vector<std::string>{"img_a"});
  CHECK(none[1].true_image_ids == std::vector<std::string>{"img_b"});
}

TEST_CASE("manifest assembly names and orders the five granularities") {
  CorpusInputs inputs;
  inputs.images = {{"img_a", "file:///a.jpg", std::nullopt},
                   {"img_b", "file:///b.jpg", std::nullopt}};
  inputs.captions = {{"cap_1", "img_a", "A dog runs"}};
  inputs.phrases = {{"phr_1", "img_b", "a fountain"}};
  inputs.tags = {{"sunny day", {"img_a", "img_b"}}, {"dog walk", {"img_a"}}};
  inputs.triples = {{"a dog", "runs through", "a park", "cap_1"}};
  inputs.fragments = {
      {"A dog runs through a park.",
       {{"a dog", "runs", "fast", "cap_1"}, {"a dog", "is in", "a park",
                                             "cap_1"}},
       {"img_a"}}};

  auto manifest = build_manifest(inputs);
  REQUIRE(manifest.queries.size() == 6);
  std::map<std::string, const QueryRecord*> by_id;
  for (const auto& query : manifest.queries) by_id[query.id] = &query;

  CHECK(by_id.at("caption:cap_1")->granularity == GranularityLevel::caption);
  CHECK(by_id.at("caption:cap_1")->true_image_ids ==
        std::vector<std::string>{"img_a"});
  // Tags index in sorted-by-text order: dog walk first.
  CHECK(by_id.at("tag:0")->text == "dog walk");
  CHECK(by_id.at("tag:1")->text == "sunny day");
  CHECK(by_id.at("tag:1")->true_image_ids ==
        std::vector<std::string>{"img_a", "img_b"});
  CHECK(by_id.at("phrase:phr_1")->granularity == GranularityLevel::phrase);
  CHECK(by_id.at("triple:0")->text == "a dog runs through a park");
  CHECK(by_id.at("fragment:0")->granularity == GranularityLevel::fragment);

  CHECK(manifest.metadata.at("caption_count") == "1");
  CHECK(manifest.metadata.at("imagery_tag_count") == "2");
  auto counts = count_granularities(manifest);
  CHECK(render_counts_csv(counts) ==
        "caption,imagery_tag,phrase,triple,fragment\n1,2,1,1,1\n");
}

TEST_CASE("assembly rejects triples of unknown captions and thin fragments") {
  CorpusInputs inputs;
  inputs.images = {{"img_a", "u", std::nullopt}};
  inputs.captions = {{"cap_1", "img_a", "text"}};
  inputs.triples = {{"s", "p", "o", "cap_404"}};
  CHECK_THROWS_AS(build_manifest(inputs), CfqError);

  inputs.triples.clear();
  inputs.fragments = {{"text", {{"s", "p", "o", "cap_1"}}, {"img_a"}}};
  CHECK_THROWS_AS(build_manifest(inputs), CfqError);
}

TEST_CASE("stage selection enforces its dependencies") {
  TempDir dir;
  CorpusSpec spec = cfq::testing::fixture_corpus_spec(kFixtures, kTemplates,
                                                      dir / "cache");
  spec.stages = {"fragments"};
  CHECK_THROWS_AS(build_corpus(spec), CfqError);  // needs triples

  spec.stages = {"merge"};
  spec.tau.reset();
  CHECK_THROWS_AS(build_corpus(spec), CfqError);  // needs explicit tau

  spec = cfq::testing::fixture_corpus_spec(kFixtures, kTemplates, "");
  spec.stages = {"tags"};
  spec.cache_dir.clear();
  CHECK_THROWS_AS(build_corpus(spec), CfqError);  // needs a cache dir

  spec = cfq::testing::fixture_corpus_spec(kFixtures, kTemplates,
                                           dir / "cache");
  spec.fragment_group = 1;
  CHECK_THROWS_AS(build_corpus(spec), CfqError);
}

TEST_CASE("the fixture cache regenerates byte-identically from the script") {
  TempDir dir;
  cfq::testing::warm_fixture_cache(dir / "cache", kFixtures, kTemplates);

  auto committed_dir = kFixtures / "corpus_cache";
  if (std::getenv("CFQ_WRITE_FIXTURES")) {
    std::filesystem::remove_all(committed_dir);
    std::filesystem::create_directories(committed_dir);
    for (const auto& entry :
         std::filesystem::directory_iterator(dir / "cache")) {
      std::filesystem::copy_file(entry.path(),
                                 committed_dir / entry.path().filename());
    }
  }
  REQUIRE_MESSAGE(std::filesystem::exists(committed_dir),
                  "run once with CFQ_WRITE_FIXTURES=1 to seed the fixtures");
  auto regenerated = dir_contents(dir / "cache");
  auto committed = dir_contents(committed_dir);
  REQUIRE(regenerated.size() == committed.size());
  for (const auto& [name, bytes] : committed) {
    REQUIRE_MESSAGE(regenerated.count(name) == 1, name);
    CHECK_MESSAGE(regenerated.at(name) == bytes, name);
  }
}

TEST_CASE("the corpus builds offline from the committed fixture cache") {
  auto committed_cache = kFixtures / "corpus_cache";
  REQUIRE(std::filesystem::exists(committed_cache));
  auto spec = cfq::testing::fixture_corpus_spec(kFixtures, kTemplates,
                                                committed_cache);
  // No chat endpoint: every generation must come from the committed cache.
  auto outcome = build_corpus(spec);

  CHECK(outcome.gen_stats.network_calls == 0);
  CHECK(outcome.gen_stats.cache_misses == 0);
  CHECK(outcome.counts.captions == 6);
  CHECK(outcome.counts.imagery_tags == 7);
  CHECK(outcome.counts.phrases == 3);
  CHECK(outcome.counts.triples == 8);
  CHECK(outcome.counts.fragments == 2);
  CHECK(validate_manifest(outcome.manifest).empty());

  std::map<std::string, const QueryRecord*> by_id;
  for (const auto& query : outcome.manifest.queries) by_id[query.id] = &query;

  // Tag vocabulary is shared across images and case-folded.
  CHECK(by_id.at("tag:1")->text == "family gathering");
  CHECK(by_id.at("tag:1")->true_image_ids ==
        std::vector<std::string>{"img_a", "img_b"});
  CHECK(by_id.at("tag:6")->text == "quiet morning");

  // The merge stage united the identical tag and phrase texts.
  CHECK(by_id.at("tag:5")->text == "pleasant afternoon");
  CHECK(by_id.at("tag:5")->true_image_ids ==
        std::vector<std::string>{"img_a", "img_d"});
  CHECK(by_id.at("phrase:phr_3")->true_image_ids ==
        std::vector<std::string>{"img_a", "img_d"});

  // Thin or empty generations surfaced as notes, not failures.
  bool noted_cap_6 = false;
  bool noted_img_c = false;
  for (const auto& note : outcome.notes) {
    if (note.find("cap_6") != std::string::npos) noted_cap_6 = true;
    if (note.find("img_c") != std::string::npos) noted_img_c = true;
  }
  CHECK(noted_cap_6);
  CHECK(noted_img_c);

  // A second offline build is bit-identical.
  auto again = build_corpus(spec);
  CHECK(again.manifest == outcome.manifest);
}

TEST_CASE("the assemble stage writes the manifest files and counts") {
  TempDir dir;
  auto spec = cfq::testing::fixture_corpus_spec(kFixtures, kTemplates,
                                                kFixtures / "corpus_cache");
  spec.stages.insert("assemble");
  spec.output_dir = dir / "corpus_out";
  auto outcome = build_corpus(spec);

  auto manifest = load_manifest(dir / "corpus_out" / "images.jsonl",
                                dir / "corpus_out" / "queries.jsonl");
  CHECK(manifest.images == outcome.manifest.images);
  CHECK(manifest.queries == outcome.manifest.queries);
  CHECK(slurp(dir / "corpus_out" / "counts.csv") ==
        "caption,imagery_tag,phrase,triple,fragment\n6,7,3,8,2\n");
}
