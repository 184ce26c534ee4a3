// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#include <set>

#include "doctest.h"
#include "frameind/digest.hpp"
#include "frameind/rng.hpp"
#include "frameind/text.hpp"

using namespace frameind;

TEST_CASE("utf8 code point arithmetic") {
  const std::string s = "a日本b";  // 1 + 3 + 3 + 1 bytes
  CHECK(utf8::is_valid(s));
  CHECK_FALSE(utf8::is_valid("\xe6\x97"));
  CHECK_FALSE(utf8::is_valid("\xc0\xaf"));  // overlong
  CHECK(utf8::length(s) == 4);
  CHECK(utf8::byte_offset(s, 2) == 4u);
  CHECK(utf8::byte_offset(s, 4) == 8u);
  CHECK_FALSE(utf8::byte_offset(s, 5).has_value());
  CHECK(utf8::next_boundary(s, 2) == 4);
  CHECK(utf8::next_boundary(s, 4) == 4);
  CHECK(utf8::substr(s, 1, 3) == "日本");
  CHECK_THROWS_AS(utf8::substr(s, 3, 9), std::out_of_range);
}

TEST_CASE("base64 round trip and rejection") {
  CHECK(base64_encode("") == "");
  CHECK(base64_encode("f") == "Zg==");
  CHECK(base64_encode("foobar") == "Zm9vYmFy");
  const std::string bytes("\x00\xff\x10 日本", 8);
  CHECK(base64_decode(base64_encode(bytes)) == bytes);
  CHECK(base64_decode("Zm8=") == "fo");
  CHECK_THROWS_AS(base64_decode("Zm8"), std::invalid_argument);
  CHECK_THROWS_AS(base64_decode("Z!8="), std::invalid_argument);
}

TEST_CASE("SHA-256 and CRC-32 reference vectors") {
  CHECK(Digest::of("abc").hex() ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(Digest::of("").hex() ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  const auto d = Digest::of("abc");
  CHECK(Digest::from_hex(d.hex()) == d);
  CHECK(crc32("123456789") == 0xCBF43926u);
  CHECK(crc32("") == 0u);
}

TEST_CASE("seed derivation is deterministic and separates stages") {
  CHECK(derive_seed(1, "folds") == derive_seed(1, "folds"));
  std::set<std::uint64_t> seen;
  for (std::uint64_t base : {0, 1, 2}) {
    for (const char* stage : {"folds", "demos", "dml/init"}) {
      for (std::uint64_t i = 0; i < 4; ++i) seen.insert(derive_seed(base, stage, i));
    }
  }
  CHECK(seen.size() == 36);
}

TEST_CASE("Rng streams are reproducible and in range") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
  Rng r(7);
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < 20000; ++i) {
    CHECK(r.uniform_index(5) < 5);
    const double u = r.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double z = r.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(sum / 20000 == doctest::Approx(0.0).epsilon(0.03));
  CHECK(sq / 20000 == doctest::Approx(1.0).epsilon(0.03));
  std::vector<int> v{1, 2, 3, 4, 5};
  Rng s(3);
  s.shuffle(v);
  CHECK(std::multiset<int>(v.begin(), v.end()) == std::multiset<int>{1, 2, 3, 4, 5});
}
