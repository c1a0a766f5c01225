#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "cfq/error.hpp"
#include "cfq/genclient.hpp"
#include "support/stubs.hpp"

using namespace cfq;
using cfq::testing::ScriptedTransport;
using cfq::testing::TempDir;

namespace {

GenerationRequest request(std::string prompt, int batch_tag = 0,
                          std::string image_uri = "") {
  GenerationRequest req;
  req.model_name = "model-x";
  req.prompt = std::move(prompt);
  req.image_uri = std::move(image_uri);
  req.temperature = 0.7;
  req.max_tokens = 128;
  req.batch_tag = batch_tag;
  return req;
}

std::shared_ptr<ScriptedTransport> echo_transport(std::string response) {
  return std::make_shared<ScriptedTransport>(
      [response](const GenerationRequest&) { return response; });
}

}  // namespace

TEST_CASE("equal requests share a key; every field change produces a new one") {
  auto base = request("expand this");
  CHECK(cache_key(base) == cache_key(request("expand this")));
  CHECK(cache_key(base).size() == 64);  // sha-256 hex

  auto model = base;
  model.model_name = "model-y";
  auto prompt = base;
  prompt.prompt = "expand that";
  auto image = base;
  image.image_uri = "file:///x.jpg";
  auto temp = base;
  temp.temperature = 0.8;
  auto tokens = base;
  tokens.max_tokens = 129;
  auto tag = base;
  tag.batch_tag = 1;
  for (const auto& changed : {model, prompt, image, temp, tokens, tag}) {
    CHECK(cache_key(changed) != cache_key(base));
  }
  CHECK(cache_key(request("p", 1)) != cache_key(request("p", 2)));
}

TEST_CASE("a miss calls the endpoint once and later calls hit the cache") {
  TempDir dir;
  auto transport = echo_transport("1. a dog runs");
  GenClient client(dir / "cache", transport);
  auto req = request("expand this");

  CHECK(client.generate(req) == "1. a dog runs");
  CHECK(transport->call_count() == 1);
  CHECK(client.generate(req) == "1. a dog runs");
  CHECK(transport->call_count() == 1);  // second call served from disk

  auto stats = client.stats();
  CHECK(stats.cache_misses == 1);
  CHECK(stats.cache_hits == 1);
  CHECK(stats.network_calls == 1);

  // One response file plus one request sidecar, named by the key.
  auto key = cache_key(req);
  CHECK(std::filesystem::exists(dir / "cache" / (key + ".txt")));
  CHECK(std::filesystem::exists(dir / "cache" / (key + ".req.json")));
}

TEST_CASE("a second client over the same directory reads the first's entries") {
  TempDir dir;
  auto req = request("shared prompt");
  {
    GenClient writer(dir / "cache", echo_transport("stored response"));
    writer.generate(req);
  }
  GenClient offline(dir / "cache");
  CHECK(offline.offline());
  CHECK(offline.generate(req) == "stored response");
}

TEST_CASE("an offline miss is a cache_miss error naming the key") {
  TempDir dir;
  GenClient client(dir / "cache");
  auto req = request("never cached");
  try {
    client.generate(req);
    FAIL("expected cache_miss");
  } catch (const CfqError& error) {
    CHECK(error.kind() == ErrorKind::cache_miss);
    CHECK(std::string(error.what()).find(cache_key(req)) !=
          std::string::npos);
  }
}

TEST_CASE("force_refresh skips the cached value and replaces it") {
  TempDir dir;
  int calls = 0;
  auto transport = std::make_shared<ScriptedTransport>(
      [&calls](const GenerationRequest&) {
        return "attempt " + std::to_string(++calls);
      });
  GenClient client(dir / "cache", transport);
  auto req = request("retry me");
  CHECK(client.generate(req) == "attempt 1");
  CHECK(client.generate(req, /*force_refresh=*/true) == "attempt 2");
  CHECK(client.generate(req) == "attempt 2");  // replacement stuck
  CHECK(transport->call_count() == 2);
}

TEST_CASE("a pre-existing cache entry wins over the endpoint") {
  TempDir dir;
  auto req = request("already there");
  std::filesystem::create_directories(dir / "cache");
  std::ofstream(dir / "cache" / (cache_key(req) + ".txt"), std::ios::binary)
      << "first writer's value";
  auto transport = echo_transport("network value");
  GenClient client(dir / "cache", transport);
  CHECK(client.generate(req) == "first writer's value");
  CHECK(transport->call_count() == 0);
}

TEST_CASE("image requests need a vision-capable endpoint") {
  TempDir dir;
  GenClient blind(dir / "cache", echo_transport("response"));
  try {
    blind.generate(request("describe", 0, "file:///img.jpg"));
    FAIL("expected capability error");
  } catch (const CfqError& error) {
    CHECK(error.kind() == ErrorKind::capability);
  }
  GenClient sighted(dir / "cache",
                    std::make_shared<ScriptedTransport>(
                        [](const GenerationRequest&) { return "ok"; },
                        /*vision=*/true));
  CHECK(sighted.generate(request("describe", 0, "file:///img.jpg")) == "ok");
}

TEST_CASE("malformed generation requests are contract violations") {
  TempDir dir;
  GenClient client(dir / "cache");
  CHECK_THROWS_AS(client.generate(request("  ")), CfqError);
  auto bad_temp = request("p");
  bad_temp.temperature = -0.5;
  CHECK_THROWS_AS(client.generate(bad_temp), CfqError);
  auto bad_tokens = request("p");
  bad_tokens.max_tokens = 0;
  CHECK_THROWS_AS(client.generate(bad_tokens), CfqError);
}

TEST_CASE("numbered and bulleted output splits into clean sentences") {
  auto parsed = parse_sentence_list("1. a dog runs\n2. park scene", 10);
  CHECK(parsed == std::vector<std::string>{"a dog runs", "park scene"});

  parsed = parse_sentence_list(
      "- first item\n* second item\n\xE2\x80\xA2 third item\n3) fourth", 10);
  CHECK(parsed == std::vector<std::string>{"first item", "second item",
                                           "third item", "fourth"});
}

TEST_CASE("sentence parsing trims, drops empties, and caps at expected_n") {
  auto parsed = parse_sentence_list("1.  padded  \n\n2. kept\n3. dropped", 2);
  CHECK(parsed == std::vector<std::string>{"padded", "kept"});
}

TEST_CASE("a leading measurement is not an enumeration marker") {
  auto parsed = parse_sentence_list("3.5 km of trail", 5);
  CHECK(parsed == std::vector<std::string>{"3.5 km of trail"});
}

TEST_CASE("output with no usable sentences is an empty generation") {
  for (const char* raw : {"", "   \n\n  ", "1.\n2.\n-"}) {
    try {
      parse_sentence_list(raw, 5);
      FAIL("expected empty_generation for: ", raw);
    } catch (const CfqError& error) {
      CHECK(error.kind() == ErrorKind::empty_generation);
    }
  }
}
