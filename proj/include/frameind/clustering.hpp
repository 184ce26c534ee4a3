// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "frameind/embedding.hpp"
#include "json.hpp"

namespace frameind {

// Cluster label per item, contiguous from 0 in order of first appearance.
using Labels = std::vector<int>;

// Relabels to contiguous ids ordered by first appearance.
Labels canonical_labels(std::span<const int> labels);
int count_clusters(std::span<const int> labels);

// Instance id -> cluster label.
class ClusterAssignment {
 public:
  ClusterAssignment() = default;
  // Labels are canonicalized. Throws std::invalid_argument on a size mismatch.
  ClusterAssignment(std::vector<std::string> ids, std::span<const int> labels);

  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const Labels& labels() const noexcept { return labels_; }
  std::size_t size() const noexcept { return ids_.size(); }
  int n_clusters() const noexcept { return n_clusters_; }

  // Line-delimited {"instance_id": ..., "cluster": ...}.
  std::string to_jsonl() const;
  static ClusterAssignment from_jsonl(std::string_view text);

 private:
  std::vector<std::string> ids_;
  Labels labels_;
  int n_clusters_ = 0;
};

// One agglomerative merge. Initial clusters have ids 0..n-1; the cluster made
// by merge step s gets id n + s.
struct MergeStep {
  std::size_t left = 0;   // smaller id
  std::size_t right = 0;  // larger id
  double linkage = 0.0;
  std::size_t merged = 0;
};

struct MergeTrace {
  std::size_t n_initial = 0;
  std::vector<MergeStep> steps;

  std::string to_jsonl() const;
};

struct StopAtCount {
  std::size_t k = 1;
};
// Merge while the closest pair's linkage is strictly below the threshold.
struct StopBelowThreshold {
  double threshold = 0.0;
};
using StopRule = std::variant<StopAtCount, StopBelowThreshold>;

struct ClusteringResult {
  Labels labels;
  MergeTrace trace;
};

// Group-average agglomeration. The linkage between two clusters is the mean
// Euclidean distance over all cross pairs of their member points. Every step
// merges the pair with the smallest (linkage, lower id, higher id).
class Agglomerator {
 public:
  // Starts from singletons.
  explicit Agglomerator(std::span<const EmbeddingVector> points);
  // Starts from the given groups (a partition of point indices).
  Agglomerator(std::span<const EmbeddingVector> points,
               std::span<const std::vector<std::size_t>> groups);

  std::size_t n_clusters() const noexcept { return active_; }

  struct Candidate {
    std::size_t left = 0;
    std::size_t right = 0;
    double linkage = 0.0;
  };
  // Closest pair, or empty with a single cluster left.
  std::optional<Candidate> closest() const;

  MergeStep merge_closest();

  // Member point indices of the cluster that currently owns the given id.
  const std::vector<std::size_t>& members_of(std::size_t cluster_id) const;

  // Canonical labels of the current partition.
  Labels labels() const;
  const MergeTrace& trace() const noexcept { return trace_; }

 private:
  void init(std::span<const EmbeddingVector> points,
            std::span<const std::vector<std::size_t>> groups);
  double& sum(std::size_t a, std::size_t b);
  double sum(std::size_t a, std::size_t b) const;
  bool better(double linkage, std::size_t a, std::size_t b, double best_linkage,
              std::size_t best_a, std::size_t best_b) const;
  void refresh_neighbor(std::size_t slot);

  std::size_t n_points_ = 0;
  std::size_t n_slots_ = 0;
  std::size_t active_ = 0;
  std::vector<double> sums_;               // condensed upper triangle over slots
  std::vector<std::size_t> size_;          // points per slot
  std::vector<std::size_t> id_;            // cluster id per slot
  std::vector<bool> alive_;
  std::vector<std::size_t> neighbor_;      // nearest slot per slot
  std::vector<double> neighbor_linkage_;
  std::vector<std::vector<std::size_t>> members_;
  std::vector<std::size_t> slot_of_id_;    // cluster id -> slot while alive
  std::vector<std::size_t> merged_into_;   // cluster id -> id it merged into
  MergeTrace trace_;
};

// Throws std::invalid_argument when StopAtCount asks for k < 1 or k > n, or
// when the input is empty or of mixed dimension.
ClusteringResult group_average_cluster(std::span<const EmbeddingVector> points, StopRule stop);

// ---------------------------------------------------------------------------
// One-step calibration

enum class ThresholdRule {
  // Threshold sits on the linkage of the final merge (nudged one ulp upward so
  // that re-applying it with the strict stop rule repeats that merge).
  final_merge,
  // Threshold is the smallest linkage left between clusters after the final merge.
  next_merge,
};

struct OneStepCalibration {
  double threshold = 0.0;
  std::size_t dev_frame_count = 0;
};

// Agglomerates the dev points down to dev_frame_count clusters and reads the
// threshold off the trace. No merge at all gives threshold 0.
OneStepCalibration calibrate_one_step(std::span<const EmbeddingVector> dev_points,
                                      std::size_t dev_frame_count,
                                      ThresholdRule rule = ThresholdRule::final_merge);

// ---------------------------------------------------------------------------
// X-means

struct XMeansConfig {
  std::size_t k_max = 8;
  int restarts = 10;
  int max_iterations = 100;
  double tolerance = 1e-6;
  std::uint64_t seed = 0;
};

// Bayesian information criterion of a hard clustering under the identical
// spherical Gaussian model. `points` are indices into `data`.
double spherical_bic(std::span<const EmbeddingVector> data,
                     std::span<const std::size_t> points, std::span<const int> labels, int k);

// Starts from one cluster and bisects with 2-means (k-means++ seeding, best of
// `restarts`), keeping a split when the children's BIC beats the parent's.
// Never exceeds k_max clusters. Deterministic given the seed.
Labels xmeans(std::span<const EmbeddingVector> points, const XMeansConfig& config);

// ---------------------------------------------------------------------------
// Two-step clustering

// Pair-based: among unordered instance pairs sharing a lemma, the fraction put
// in the same cluster. 1 when no such pair exists.
double same_lemma_proportion(std::span<const int> labels, std::span<const std::string> lemmas);

// Pair-based: among unordered instance pairs put in the same cluster, the
// fraction sharing a lemma. 1 when no such pair exists.
double same_lemma_share(std::span<const int> labels, std::span<const std::string> lemmas);

enum class LemmaCriterion {
  // same_lemma_share; merging across lemmas drives it down toward the target.
  share,
  // same_lemma_proportion; merging sub-clusters of a lemma drives it up.
  proportion,
};

struct TwoStepCalibration {
  std::size_t k_max = 1;
  double target_same_lemma_proportion = 1.0;
  double second_stage_threshold = 0.0;
  LemmaCriterion criterion = LemmaCriterion::share;
};

struct TwoStepResult {
  Labels step1;  // per-lemma X-means clusters
  Labels labels;
  MergeTrace trace;  // step-2 merges over step-1 clusters
};

// Step 1: X-means inside each lemma group (k_max from calibration).
// Step 2: group-average merging of the step-1 clusters while the closest
// linkage is below the second-stage threshold.
TwoStepResult two_step_cluster(std::span<const std::string> lemmas,
                               std::span<const EmbeddingVector> points,
                               const TwoStepCalibration& calibration, XMeansConfig config);

// k_max: most distinct gold frames of any dev lemma. Target: the criterion
// evaluated on the dev gold partition. Threshold: linkage of the step-2 merge
// on dev at which the criterion first reaches the target (0 when step 1
// already does).
TwoStepCalibration calibrate_two_step(std::span<const std::string> lemmas,
                                      std::span<const EmbeddingVector> points,
                                      std::span<const std::string> gold_frames,
                                      XMeansConfig config,
                                      LemmaCriterion criterion = LemmaCriterion::share);

nlohmann::ordered_json to_json(const OneStepCalibration& c);
nlohmann::ordered_json to_json(const TwoStepCalibration& c);

}  // namespace frameind
