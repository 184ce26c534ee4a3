// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cmath>
#include <fstream>
#include <thread>

#include "doctest.h"
#include "frameind/cache.hpp"
#include "frameind/embedding.hpp"
#include "frameind/errors.hpp"
#include "support/fixtures.hpp"

using namespace frameind;

namespace {

EmbeddingRecord record(const std::string& id, const std::string& prompt, std::vector<float> v,
                       const std::string& model = "m") {
  return EmbeddingRecord{id, model, prompt_digest(prompt), std::move(v)};
}

void le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

// A cache file assembled byte by byte, the way an external producer writes it.
std::string handmade_cache(const std::string& meta, std::uint32_t dim,
                           const std::vector<EmbeddingRecord>& records) {
  std::string out = "FEOL";
  le(out, 1, 2);
  le(out, dim, 4);
  le(out, meta.size(), 4);
  out += meta;
  for (const auto& r : records) {
    std::string rec;
    le(rec, r.instance_id.size(), 2);
    rec += r.instance_id;
    rec.append(reinterpret_cast<const char*>(r.prompt_digest.bytes().data()), 32);
    for (float f : r.values) le(rec, std::bit_cast<std::uint32_t>(f), 4);
    le(rec, crc32(rec), 4);
    out += rec;
  }
  return out;
}

void spit(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

}  // namespace

TEST_CASE("embedding vectors and geometry") {
  CHECK_THROWS_AS(EmbeddingVector(std::vector<double>{}), std::invalid_argument);
  CHECK_THROWS_AS(EmbeddingVector(std::vector<double>{1.0, NAN}), std::invalid_argument);
  const EmbeddingVector v(std::vector<double>{3.0, 4.0});
  CHECK(v.norm() == doctest::Approx(5.0));
  const auto n = normalize(v);
  CHECK(n.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(n[0] == doctest::Approx(0.6));
  CHECK_THROWS_AS(normalize(EmbeddingVector(std::vector<double>{0.0, 0.0})), std::invalid_argument);
  // Tiny and huge inputs normalize without under- or overflow.
  CHECK(normalize(EmbeddingVector(std::vector<double>{1e-200, 1e-200})).norm() ==
        doctest::Approx(1.0));
  CHECK(normalize(EmbeddingVector(std::vector<double>{1e200, 1e200})).norm() == doctest::Approx(1.0));
  const EmbeddingVector a(std::vector<double>{1.0, 0.0}), b(std::vector<double>{-1.0, 0.0});
  CHECK(distance(a, b) == doctest::Approx(2.0));
  CHECK(distance(a, b) == distance(b, a));
  CHECK_THROWS_AS(distance(a, EmbeddingVector(std::vector<double>{1.0})), std::invalid_argument);
  const auto f = EmbeddingVector::from_f32(std::vector<float>{0.5f, -2.0f});
  CHECK(f.to_f32() == std::vector<float>{0.5f, -2.0f});
}

TEST_CASE("records survive a round trip and a reopen") {
  fixtures::TempDir dir("cache");
  const auto path = dir / "c.bin";
  {
    auto cache = EmbeddingCache::open(path, "m");
    CHECK(cache.size() == 0);
    CHECK(cache.dim() == 0);
    cache.put(record("i1", "p1", {1.0f, 2.0f, 3.0f}));
    cache.put(record("i2", "p2", {-1.0f, 0.5f, 0.25f}));
    CHECK(cache.dim() == 3);
    CHECK_THROWS_AS(cache.put(record("i3", "p3", {1.0f})), DataError);
    CHECK_THROWS_AS(cache.put(record("i3", "p3", {1.0f, 1.0f, 1.0f}, "other")), DataError);
    const auto got = cache.get("m", prompt_digest("p2"));
    REQUIRE(got.has_value());
    CHECK(got->instance_id == "i2");
    CHECK(got->values == std::vector<float>{-1.0f, 0.5f, 0.25f});
    CHECK_FALSE(cache.get("other", prompt_digest("p2")).has_value());
    CHECK_FALSE(cache.get("m", prompt_digest("nope")).has_value());
  }
  CHECK_NOTHROW(EmbeddingCache::validate(path));
  auto again = EmbeddingCache::open(path, "m");
  CHECK(again.size() == 2);
  CHECK(again.contains(prompt_digest("p1")));
  CHECK_THROWS_AS(EmbeddingCache::open(path, "different-model"), DataError);
  CHECK(EmbeddingCache::open_existing(path).model_id() == "m");
  CHECK_THROWS_AS(EmbeddingCache::open_existing(dir / "missing.bin"), DataError);
}

TEST_CASE("writer output matches the byte layout") {
  fixtures::TempDir dir("cache-layout");
  const std::vector<EmbeddingRecord> records{record("a", "pa", {0.25f, -1.5f}, "tiny-lm"),
                                             record("日本", "pb", {3.0f, 4.0f}, "tiny-lm")};
  {
    auto cache = EmbeddingCache::open(dir / "w.bin", "tiny-lm");
    for (const auto& r : records) cache.put(r);
  }
  CHECK(fixtures::slurp(dir / "w.bin") == handmade_cache(R"({"model_id":"tiny-lm"})", 2, records));
}

TEST_CASE("externally produced caches are readable, extra metadata included") {
  fixtures::TempDir dir("cache-external");
  const std::vector<EmbeddingRecord> records{record("x", "px", {1.0f, 2.0f, 3.0f, 4.0f})};
  spit(dir / "e.bin",
       handmade_cache(R"({"model_id":"gpt2","bos":false,"precision":"f32"})", 4, records));
  auto cache = EmbeddingCache::open(dir / "e.bin", "gpt2");
  CHECK(cache.dim() == 4);
  CHECK(cache.get("gpt2", prompt_digest("px"))->values == records[0].values);
  cache.put(record("y", "py", {0.0f, 0.0f, 1.0f, 0.0f}, "gpt2"));
  CHECK_NOTHROW(EmbeddingCache::validate(dir / "e.bin"));

  spit(dir / "empty.bin", handmade_cache(R"({"model_id":"gpt2"})", 0, {}));
  CHECK(EmbeddingCache::open_existing(dir / "empty.bin").size() == 0);
}

TEST_CASE("integrity failures are reported") {
  fixtures::TempDir dir("cache-corrupt");
  const std::vector<EmbeddingRecord> records{record("x", "px", {1.0f, 2.0f})};
  const std::string good = handmade_cache(R"({"model_id":"m"})", 2, records);

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  spit(dir / "magic.bin", bad_magic);
  CHECK_THROWS_AS(EmbeddingCache::validate(dir / "magic.bin"), CacheError);

  std::string bad_version = good;
  bad_version[4] = 2;
  spit(dir / "version.bin", bad_version);
  CHECK_THROWS_AS(EmbeddingCache::validate(dir / "version.bin"), CacheError);

  std::string flipped = good;
  flipped[flipped.size() - 6] ^= 0x01;  // inside the vector
  spit(dir / "crc.bin", flipped);
  CHECK_THROWS_AS(EmbeddingCache::open_existing(dir / "crc.bin"), CacheError);

  spit(dir / "short.bin", good.substr(0, good.size() - 3));
  CHECK_THROWS_AS(EmbeddingCache::validate(dir / "short.bin"), CacheError);

  spit(dir / "meta.bin", handmade_cache(R"({"no_model":1})", 2, records));
  CHECK_THROWS_AS(EmbeddingCache::validate(dir / "meta.bin"), CacheError);
}

TEST_CASE("readers run alongside a writer") {
  fixtures::TempDir dir("cache-concurrent");
  auto cache = EmbeddingCache::open(dir / "c.bin", "m");
  cache.put(record("seed", "p-seed", {1.0f, 1.0f}));
  std::atomic<bool> done{false};
  std::atomic<int> bad{0};
  std::thread reader([&] {
    while (!done) {
      const auto r = cache.get("m", prompt_digest("p-seed"));
      if (!r || r->values != std::vector<float>{1.0f, 1.0f}) ++bad;
    }
  });
  for (int i = 0; i < 500; ++i) {
    cache.put(record("i" + std::to_string(i), "p" + std::to_string(i), {float(i), 1.0f}));
  }
  done = true;
  reader.join();
  CHECK(bad == 0);
  CHECK(cache.size() == 501);
  CHECK(cache.get("m", prompt_digest("p499"))->values[0] == 499.0f);
}
