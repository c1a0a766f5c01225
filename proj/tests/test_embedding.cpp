#include <doctest.h>

#include <cmath>
#include <fstream>

#include "cfq/embedding.hpp"
#include "cfq/error.hpp"
#include "support/stubs.hpp"

using namespace cfq;
using cfq::testing::TempDir;

namespace {

EmbeddingVector vec(std::vector<float> values, bool normalized = false) {
  return EmbeddingVector{std::move(values), normalized};
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const CfqError& error) {
    return error.kind();
  }
  FAIL("expected a CfqError");
  return ErrorKind::io;
}

}  // namespace

TEST_CASE("l2 norm and normalization") {
  auto v = vec({3.0f, 4.0f});
  CHECK(v.l2_norm() == doctest::Approx(5.0));
  auto unit = normalized(v);
  CHECK(unit.normalized);
  CHECK(unit.values[0] == doctest::Approx(0.6f));
  CHECK(unit.values[1] == doctest::Approx(0.8f));
  CHECK(unit.l2_norm() == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("zero vectors cannot be normalized") {
  CHECK(kind_of([] { normalized(vec({0.0f, 0.0f})); }) == ErrorKind::domain);
}

TEST_CASE("non-finite components are rejected") {
  auto nan = vec({1.0f, std::nanf("")});
  CHECK_THROWS_AS(check_vector(nan), CfqError);
  auto lying = vec({3.0f, 4.0f}, /*normalized=*/true);
  CHECK(kind_of([&] { check_vector(lying); }) == ErrorKind::domain);
}

TEST_CASE("build_store sorts ids ascending and keeps rows aligned") {
  auto store = build_store({{"zeta", vec({1.0f, 0.0f})},
                            {"alpha", vec({0.0f, 1.0f})},
                            {"mid", vec({0.5f, 0.5f})}},
                           "unit-test");
  CHECK(store.size() == 3);
  CHECK(store.dimension() == 2);
  CHECK(store.ids() == std::vector<std::string>{"alpha", "mid", "zeta"});
  CHECK(store.lookup("zeta").values == std::vector<float>{1.0f, 0.0f});
  CHECK(store.row(0)[1] == 1.0f);  // alpha
  CHECK(store.contains("mid"));
  CHECK_FALSE(store.contains("nope"));
  CHECK(kind_of([&] { store.lookup("nope"); }) == ErrorKind::lookup);
}

TEST_CASE("build_store rejects duplicates and ragged dimensions") {
  CHECK(kind_of([] {
          build_store({{"a", vec({1.0f})}, {"a", vec({2.0f})}});
        }) == ErrorKind::duplicate);
  CHECK(kind_of([] {
          build_store({{"a", vec({1.0f})}, {"b", vec({1.0f, 2.0f})}});
        }) == ErrorKind::mismatch);
}

TEST_CASE("store files round-trip bit-exactly") {
  TempDir dir;
  auto store = build_store({{"img_b", vec({0.25f, -1.5f, 3.0f})},
                            {"img_a", vec({1e-8f, 2.0f, -0.125f})}},
                           "roundtrip");
  auto first = dir / "store.cfqe";
  auto second = dir / "again.cfqe";
  save_store(store, first);
  auto loaded = load_store(first);
  CHECK(loaded.same_contents(store));
  CHECK(loaded.ids() == store.ids());
  CHECK(loaded.data() == store.data());
  save_store(loaded, second);
  CHECK(slurp(first) == slurp(second));
}

TEST_CASE("store files start with the CFQE magic") {
  TempDir dir;
  auto path = dir / "store.cfqe";
  save_store(build_store({{"a", vec({1.0f})}}), path);
  auto bytes = slurp(path);
  REQUIRE(bytes.size() > 4);
  CHECK(bytes.substr(0, 4) == "CFQE");
}

TEST_CASE("a corrupted magic number is a format error") {
  TempDir dir;
  auto path = dir / "store.cfqe";
  save_store(build_store({{"a", vec({1.0f, 2.0f})}}), path);
  auto bytes = slurp(path);
  bytes[0] = 'X';
  std::ofstream(path, std::ios::binary) << bytes;
  CHECK(kind_of([&] { load_store(path); }) == ErrorKind::format);
}

TEST_CASE("a truncated vector block is a truncation error") {
  TempDir dir;
  auto path = dir / "store.cfqe";
  save_store(build_store({{"a", vec({1.0f, 2.0f})}, {"b", vec({3.0f, 4.0f})}}),
             path);
  auto bytes = slurp(path);
  std::ofstream(path, std::ios::binary)
      << bytes.substr(0, bytes.size() - 3);
  CHECK(kind_of([&] { load_store(path); }) == ErrorKind::truncated);
}

TEST_CASE("trailing garbage after the vector block is a format error") {
  TempDir dir;
  auto path = dir / "store.cfqe";
  save_store(build_store({{"a", vec({1.0f})}}), path);
  std::ofstream(path, std::ios::binary | std::ios::app) << "junk";
  CHECK(kind_of([&] { load_store(path); }) == ErrorKind::format);
}

TEST_CASE("synthetic embeddings are deterministic, unit-norm, seed-sensitive") {
  SyntheticProvider provider(99, 16);
  SyntheticProvider same(99, 16);
  SyntheticProvider other(100, 16);
  std::vector<std::string> texts = {"a dog", "a cat"};
  auto first = provider.embed_texts(texts);
  auto again = same.embed_texts(texts);
  REQUIRE(first.size() == 2);
  CHECK(first[0].values == again[0].values);
  CHECK(first[0].normalized);
  CHECK(first[0].l2_norm() == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(first[0].values != first[1].values);
  CHECK(first[0].values != other.embed_texts(texts)[0].values);
  // Text and image embeddings of the same string agree (one keyed function).
  CHECK(provider.embed_images(texts)[0].values == first[0].values);
}

TEST_CASE("make_provider parses synthetic specs and store paths") {
  auto synthetic = make_provider("synthetic:seed=7,dim=8");
  CHECK(synthetic->dimension() == 8);
  CHECK(synthetic->embed_texts(std::vector<std::string>{"x"})[0].dimension() ==
        8);

  TempDir dir;
  auto path = (dir / "s.cfqe").string();
  save_store(build_store({{"img_1", normalized(vec({1.0f, 1.0f}))}}, "enc"),
             path);
  auto from_path = make_provider(path);
  CHECK(from_path->dimension() == 2);
  auto from_prefixed = make_provider("file:" + path);
  std::vector<std::string> key = {"img_1"};
  CHECK(from_prefixed->embed_images(key)[0].values ==
        from_path->embed_images(key)[0].values);

  CHECK(kind_of([] { make_provider("synthetic:seed=7"); }) ==
        ErrorKind::config);
}

TEST_CASE("store-backed providers resolve every key or fail by name") {
  auto store = build_store({{"img_1", normalized(vec({1.0f, 0.0f}))},
                            {"img_2", normalized(vec({0.0f, 1.0f}))}});
  StoreProvider provider(store);
  std::vector<std::string> keys = {"img_2", "img_1"};
  auto vectors = provider.embed_images(keys);
  CHECK(vectors[0].values == store.lookup("img_2").values);
  CHECK(vectors[1].values == store.lookup("img_1").values);
  try {
    provider.embed_texts(std::vector<std::string>{"missing text"});
    FAIL("expected a lookup error");
  } catch (const CfqError& error) {
    CHECK(error.kind() == ErrorKind::lookup);
    CHECK(std::string(error.what()).find("missing text") != std::string::npos);
  }
}
