// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "frameind/embedding.hpp"
#include "json.hpp"

namespace frameind {

// LoRA-structured projection over frozen embeddings:
//   x -> x + (alpha / r) * B * A * x
// with the frozen base map fixed to the identity. A is r x d, B is d x r,
// both row-major and stored back to back in parameters() (A first).
class ProjectionHead {
 public:
  ProjectionHead() = default;
  // A = B = 0. Throws std::invalid_argument unless 1 <= rank <= dim, alpha > 0.
  ProjectionHead(std::size_t dim, std::size_t rank, double alpha);

  // Standard LoRA start: A ~ N(0, 0.02^2), B = 0, so the map is the identity.
  static ProjectionHead lora_init(std::size_t dim, std::size_t rank, double alpha,
                                  std::uint64_t seed);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t rank() const noexcept { return rank_; }
  double alpha() const noexcept { return alpha_; }
  double scale() const noexcept { return alpha_ / static_cast<double>(rank_); }

  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }
  std::span<double> a() noexcept { return {params_.data(), rank_ * dim_}; }
  std::span<const double> a() const noexcept { return {params_.data(), rank_ * dim_}; }
  std::span<double> b() noexcept { return {params_.data() + rank_ * dim_, dim_ * rank_}; }
  std::span<const double> b() const noexcept {
    return {params_.data() + rank_ * dim_, dim_ * rank_};
  }

  std::vector<double> apply(std::span<const double> x) const;
  EmbeddingVector apply(const EmbeddingVector& x) const;

  // Rounds every parameter through f32, matching a checkpoint round trip.
  void round_to_f32();

  // Checkpoint: one JSON header line (dim, rank, alpha, plus `extra`) then
  // little-endian f32 A followed by B.
  void save(const std::filesystem::path& path, const nlohmann::ordered_json& extra = {}) const;
  static ProjectionHead load(const std::filesystem::path& path);

 private:
  std::size_t dim_ = 0;
  std::size_t rank_ = 0;
  double alpha_ = 1.0;
  std::vector<double> params_;
};

// Indices into a labeled embedding set.
struct Triplet {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;

  bool operator==(const Triplet&) const = default;
};

// max(D(a, p) - D(a, n) + margin, 0) with D the Euclidean distance between
// normalized inputs. Inputs are head outputs.
double triplet_loss(std::span<const double> anchor, std::span<const double> positive,
                    std::span<const double> negative, double margin);
double triplet_loss(const EmbeddingVector& anchor, const EmbeddingVector& positive,
                    const EmbeddingVector& negative, double margin);

struct HeadGradient {
  std::vector<double> values;  // same layout as ProjectionHead::parameters()
  double mean_loss = 0.0;
};

// Mean over the batch of the triplet loss gradient with respect to A and B,
// through the head and the normalization. Clamped triplets contribute zero.
HeadGradient loss_gradient(const ProjectionHead& head, std::span<const EmbeddingVector> inputs,
                           std::span<const Triplet> batch, double margin);

// Per epoch: valid anchors (frames with >= 2 members, when another frame
// exists) in shuffled order; positive uniform over the anchor's frame minus
// the anchor; negative uniform over all instances of other frames. Batched
// in order. Throws DataError when no valid triplet exists.
std::vector<std::vector<Triplet>> sample_triplets(std::span<const int> frame_of,
                                                  std::uint64_t epoch_seed,
                                                  std::size_t batch_size);

struct OptimizerState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Decoupled weight decay:
//   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p)
// Throws std::invalid_argument on a shape mismatch or non-finite gradient.
void adamw_step(OptimizerState& state, std::span<double> params, std::span<const double> grads,
                double lr, double weight_decay);

struct LabeledEmbeddings {
  std::vector<EmbeddingVector> vectors;
  std::vector<std::string> frames;
};

struct TrainConfig {
  double margin = 0.5;
  double learning_rate = 1e-4;
  int epochs = 20;
  std::size_t batch_size = 32;
  double weight_decay = 0.01;
  std::size_t rank = 8;
  double alpha = 32.0;
  std::uint64_t seed = 0;
};

struct TrainGrid {
  std::vector<double> margins{0.1, 0.2, 0.5, 1.0};
  std::vector<double> learning_rates{3e-5, 5e-5, 1e-4};
  TrainConfig base;  // everything but margin and learning rate

  std::vector<TrainConfig> expand() const;
};

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double dev_bcf = 0.0;
};

struct GridRunLog {
  TrainConfig config;
  std::vector<EpochLog> epochs;
  double dev_bcf = 0.0;  // of the final head
};

struct TrainResult {
  ProjectionHead head;
  std::vector<GridRunLog> runs;
  std::size_t selected = 0;
  double baseline_dev_bcf = 0.0;  // identity head
};

// Dev BcF of one-step clustering stopped at the dev frame count.
double dev_bcubed_f(const ProjectionHead* head, const LabeledEmbeddings& dev);

// Trains one head per grid point and keeps the one with the best final dev
// BcF (first in grid order on ties). Throws std::invalid_argument on an empty grid.
TrainResult train_head(const LabeledEmbeddings& train, const LabeledEmbeddings& dev,
                       const TrainGrid& grid);

// Training log as line-delimited JSON.
std::string training_log_jsonl(const TrainResult& result, int round);

}  // namespace frameind
