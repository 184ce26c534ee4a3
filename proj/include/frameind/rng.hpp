// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace frameind {

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed expansion used by every stage:
//   derive_seed(base, stage, index) = mix64(mix64(base ^ fnv1a(stage)) + index)
// A stage tag names the consumer ("folds", "demos", "dml/init", ...) and the
// index distinguishes repeated draws (round, epoch, lemma, ...).
std::uint64_t derive_seed(std::uint64_t base, std::string_view stage,
                          std::uint64_t index = 0) noexcept;

// Deterministic random source. Only the engine (mt19937_64) comes from the
// standard library; the distributions are implemented here so that streams
// are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);

  // Uniform real in [0, 1).
  double uniform01();

  // Standard normal (Box-Muller, second value cached).
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  template <class T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[uniform_index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace frameind
