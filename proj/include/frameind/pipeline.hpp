// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "frameind/backend.hpp"
#include "frameind/cache.hpp"
#include "frameind/clustering.hpp"
#include "frameind/corpus.hpp"
#include "frameind/dml.hpp"
#include "frameind/eval.hpp"
#include "frameind/prompting.hpp"
#include "json.hpp"

namespace frameind {

struct PromptOptions {
  Language language = Language::english;
  bool framenet_token = true;
  std::size_t shots = 0;
  std::uint64_t demo_seed = 0;
  // Demonstration seeds per round in k-shot mode.
  std::size_t icl_runs = 4;
  // Subprocess token counter command; empty selects ceil(bytes / 4).
  std::string token_counter;
  std::size_t max_total_tokens = 2048;
  std::size_t max_demo_tokens = 1900;

  // {demo_seed} for zero-shot, demo_seed + j for j < icl_runs otherwise.
  std::vector<std::uint64_t> run_seeds() const;
  PromptTemplate make_template() const;
  nlohmann::ordered_json to_json() const;
};

struct PlannedPrompt {
  std::string instance_id;
  int round = -1;          // -1 when the prompt does not depend on the round
  std::uint64_t seed = 0;  // demonstration seed
  std::string text;
  Digest digest;
};

// Every prompt a run needs. Zero-shot: one per instance. k-shot: one per
// (round, demonstration seed, instance) with demonstrations drawn from the
// round's training folds.
class PromptPlan {
 public:
  static PromptPlan build(const Dataset& dataset, const FoldAssignment* folds,
                          const PromptOptions& options);

  const std::vector<PlannedPrompt>& prompts() const noexcept { return prompts_; }
  bool in_context() const noexcept { return in_context_; }

  // Throws DataError when the plan holds no such prompt.
  const PlannedPrompt& lookup(std::string_view instance_id, int round, std::uint64_t seed) const;

  // Largest counted size over the plan and over its selected demonstrations.
  std::size_t max_prompt_tokens = 0;
  std::size_t max_demo_tokens = 0;

 private:
  std::vector<PlannedPrompt> prompts_;
  std::map<std::tuple<std::string, int, std::uint64_t>, std::size_t, std::less<>> index_;
  bool in_context_ = false;
};

// Prompts manifest for external embedding producers: one
// {"instance_id", "prompt": base64 of the exact prompt bytes} per line, one
// line per distinct prompt in plan order.
void write_prompts_manifest(std::ostream& out, const PromptPlan& plan);

struct ManifestPrompt {
  std::string instance_id;
  std::string prompt;
};
std::vector<ManifestPrompt> read_prompts_manifest(std::istream& in);

struct FetchReport {
  std::size_t distinct = 0;  // distinct prompts in the plan
  std::size_t cached = 0;    // already present
  std::size_t fetched = 0;
};

// Stores an embedding for every distinct planned prompt missing from the
// cache. Fetches proceed in chunks and each chunk is persisted before the
// next starts, so a backend failure keeps earlier progress. Without a
// backend, any miss is a DataError.
FetchReport populate_cache(const PromptPlan& plan, EmbeddingCache& cache,
                           const BackendConfig* backend);

enum class ClusteringMode { one_step, two_step };
std::string_view to_string(ClusteringMode mode);
ClusteringMode parse_mode(std::string_view text);

struct RunConfig {
  std::string config_name = "run";
  std::filesystem::path dataset;
  std::filesystem::path folds;  // empty: folds are generated
  FoldOptions fold_options;
  PromptOptions prompt;
  std::filesystem::path cache;
  std::optional<BackendConfig> backend;
  bool dml = false;
  TrainGrid grid;
  std::filesystem::path heads;  // pretrained heads for cluster runs
  ClusteringMode mode = ClusteringMode::one_step;
  ThresholdRule threshold_rule = ThresholdRule::final_merge;
  LemmaCriterion lemma_criterion = LemmaCriterion::share;
  XMeansConfig xmeans;
  std::uint64_t seed = 0;

  // Every setting that influences outputs. Paths appear as given.
  nlohmann::ordered_json to_json() const;
};

// Loaded inputs of a run.
struct Experiment {
  Dataset dataset;
  FoldAssignment folds;
  PromptPlan plan;
  std::optional<EmbeddingCache> cache;
  FetchReport fetch;

  // Normalized embeddings of `part` under (round, seed), in dataset order.
  std::vector<EmbeddingVector> embeddings(const Dataset& part, int round,
                                          std::uint64_t seed) const;
};

// Loads the dataset and folds, plans prompts and opens the cache, fetching
// misses when a backend is configured. `default_cache` is used when the
// config names no cache.
Experiment load_experiment(const RunConfig& config,
                           const std::filesystem::path& default_cache = {});

// Head files: <dir>/round<r>-seed<s>.bin and .log.jsonl. Returns the paths
// written, relative to `dir`.
std::vector<std::string> train_heads(const Experiment& experiment, const RunConfig& config,
                                     const std::filesystem::path& dir);

// Writes clusters/<stem>.assignment.jsonl, .trace.jsonl, .calibration.json
// per (round, seed) plus clusters/index.json. Uses heads from `heads_dir`
// when non-empty. Returns the paths written, relative to `out`.
std::vector<std::string> cluster_rounds(const Experiment& experiment, const RunConfig& config,
                                        const std::filesystem::path& heads_dir,
                                        const std::filesystem::path& out);

// Scores the assignments listed in <clusters>/index.json.
CVResult evaluate_assignments(const Dataset& dataset, const FoldAssignment& folds,
                              const std::filesystem::path& clusters_dir);

// results.json and report.txt in `out`. Returns their relative paths.
std::vector<std::string> write_results(const CVResult& result, const std::filesystem::path& out);

// Run manifest: the config and its hash, all seeds, and SHA-256 digests of
// every input and output file. Contains no timestamps or output locations,
// so identical runs produce identical manifests.
class RunManifest {
 public:
  RunManifest(std::string command, nlohmann::ordered_json config);
  void add_input(const std::string& role, const std::filesystem::path& path);
  void add_seed(const std::string& name, std::uint64_t value);
  void add_outputs(const std::filesystem::path& root, const std::vector<std::string>& relative);
  nlohmann::ordered_json to_json() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::string command_;
  nlohmann::ordered_json config_;
  nlohmann::ordered_json inputs_ = nlohmann::ordered_json::object();
  nlohmann::ordered_json seeds_ = nlohmann::ordered_json::object();
  std::map<std::string, std::string> outputs_;
};

void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace frameind
