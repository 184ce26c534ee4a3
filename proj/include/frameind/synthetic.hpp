// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "frameind/corpus.hpp"
#include "frameind/embedding.hpp"

namespace frameind {

// Gaussian frame corpus: each frame has a centroid, each lemma evokes one
// frame, and every instance embeds as its frame centroid plus Gaussian
// noise. Centroids are standard normal inside a random `centroid_rank`
// dimensional subspace of R^dim (rank 0 means the full space). The noise is
// isotropic with deviation sigma, plus an extra component of deviation
// nuisance_scale * sigma confined to a random `nuisance_rank` dimensional
// subspace.
struct SyntheticSpec {
  std::size_t n_frames = 20;
  std::size_t lemmas_per_frame = 5;
  std::size_t instances_per_lemma = 10;
  std::size_t dim = 256;
  std::size_t centroid_rank = 0;
  std::size_t nuisance_rank = 8;
  double nuisance_scale = 4.0;
  // Per-coordinate noise deviation as a fraction of the mean distance
  // between centroids.
  double noise_ratio = 0.05;
  std::uint64_t seed = 0;
};

struct SyntheticCorpus {
  Dataset dataset;
  std::vector<EmbeddingVector> embeddings;  // aligned with dataset order
  double mean_centroid_distance = 0.0;
  double noise_sigma = 0.0;
};

SyntheticCorpus make_synthetic_corpus(const SyntheticSpec& spec);

// Embedding table file: one {"sentence": ..., "embedding": [...]} per line,
// the format served by the stub backend.
void write_embedding_table(const std::filesystem::path& path, const SyntheticCorpus& corpus);

}  // namespace frameind
