// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "frameind/clustering.hpp"
#include "frameind/corpus.hpp"
#include "json.hpp"

namespace frameind {

// B-cubed precision, recall and F, each in [0, 1].
struct EvalReport {
  double bcp = 0.0;
  double bcr = 0.0;
  double bcf = 0.0;
};

// 0 when either input is 0.
double harmonic_mean(double a, double b);

// Item-weighted B-cubed over two labelings of the same items.
EvalReport bcubed(std::span<const int> pred, std::span<const int> gold);
// Throws DataError unless both assignments cover the same id set.
EvalReport bcubed(const ClusterAssignment& pred, const ClusterAssignment& gold);

// Arithmetic mean of each score; F is averaged, not recomputed.
EvalReport mean_report(std::span<const EvalReport> reports);

ClusterAssignment gold_assignment(const Dataset& dataset);

struct RunMetadata {
  std::string config_name;
  std::string model_id;
  std::string prompt_variant;
  int shots = 0;
  std::string mode;  // "one-step" or "two-step"
  std::vector<std::uint64_t> seeds;
};

struct RoundResult {
  int round = 0;
  std::vector<EvalReport> per_seed;
  EvalReport mean;  // over seeds
};

struct CVResult {
  RunMetadata meta;
  std::vector<RoundResult> rounds;
  EvalReport mean;  // over rounds
};

// Clusters round.test for one demonstration seed.
using RoundRunner = std::function<ClusterAssignment(const CvRound& round, std::uint64_t seed)>;

// For every round: run once per seed, score the test clustering against gold,
// average over seeds; the result mean averages the rounds. A failing round
// is rethrown as DataError naming the round.
CVResult run_cv(const Dataset& dataset, const FoldAssignment& folds, const RoundRunner& runner,
                RunMetadata meta);

// Fixed-layout table: one row per config name (sorted), BcP/BcR/BcF columns
// for one-step then two-step, scores x100 with one decimal.
std::string report_table(std::span<const CVResult> results);

// Score x100, one decimal.
std::string format_score(double score);

nlohmann::ordered_json to_json(const EvalReport& r);
nlohmann::ordered_json to_json(const CVResult& r);

}  // namespace frameind
