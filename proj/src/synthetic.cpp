// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#include "frameind/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "frameind/errors.hpp"
#include "frameind/rng.hpp"
#include "json.hpp"

namespace frameind {

namespace {

// Orthonormal rows by Gram-Schmidt over Gaussian draws.
std::vector<std::vector<double>> random_basis(std::size_t rank, std::size_t dim, Rng& rng) {
  std::vector<std::vector<double>> basis;
  while (basis.size() < rank) {
    std::vector<double> v(dim);
    for (double& x : v) x = rng.normal();
    for (const auto& b : basis) {
      const double p = dot(v, b);
      for (std::size_t i = 0; i < dim; ++i) v[i] -= p * b[i];
    }
    const double n = std::sqrt(dot(v, v));
    if (n < 1e-8) continue;
    for (double& x : v) x /= n;
    basis.push_back(std::move(v));
  }
  return basis;
}

}  // namespace

SyntheticCorpus make_synthetic_corpus(const SyntheticSpec& spec) {
  if (spec.n_frames < 1 || spec.lemmas_per_frame < 1 || spec.instances_per_lemma < 1) {
    throw std::invalid_argument("synthetic corpus: counts must be positive");
  }
  if (spec.dim < 1 || spec.centroid_rank > spec.dim) {
    throw std::invalid_argument("synthetic corpus: need 0 <= centroid_rank <= dim, dim >= 1");
  }
  if (spec.nuisance_rank > spec.dim) {
    throw std::invalid_argument("synthetic corpus: nuisance_rank exceeds dim");
  }
  if (spec.noise_ratio < 0.0 || spec.nuisance_scale < 0.0) {
    throw std::invalid_argument("synthetic corpus: negative noise");
  }

  Rng rng(derive_seed(spec.seed, "synthetic/centroids"));
  std::vector<std::vector<double>> centroids(spec.n_frames, std::vector<double>(spec.dim, 0.0));
  if (spec.centroid_rank == 0) {
    for (auto& c : centroids) {
      for (double& x : c) x = rng.normal();
    }
  } else {
    const auto basis = random_basis(spec.centroid_rank, spec.dim, rng);
    for (auto& c : centroids) {
      for (const auto& b : basis) {
        const double z = rng.normal();
        for (std::size_t i = 0; i < spec.dim; ++i) c[i] += z * b[i];
      }
    }
  }

  SyntheticCorpus corpus;
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < centroids.size(); ++a) {
    for (std::size_t b = a + 1; b < centroids.size(); ++b) {
      total += distance(centroids[a], centroids[b]);
      ++pairs;
    }
  }
  corpus.mean_centroid_distance = pairs == 0 ? 1.0 : total / static_cast<double>(pairs);
  corpus.noise_sigma = spec.noise_ratio * corpus.mean_centroid_distance;

  Rng noise(derive_seed(spec.seed, "synthetic/noise"));
  Rng nuisance_rng(derive_seed(spec.seed, "synthetic/nuisance"));
  const auto nuisance = random_basis(spec.nuisance_rank, spec.dim, nuisance_rng);
  const double nuisance_sigma = spec.nuisance_scale * corpus.noise_sigma;
  std::vector<Instance> instances;
  char buffer[64];
  std::size_t serial = 0;
  for (std::size_t f = 0; f < spec.n_frames; ++f) {
    std::snprintf(buffer, sizeof buffer, "Frame_%02zu", f);
    const std::string frame = buffer;
    for (std::size_t l = 0; l < spec.lemmas_per_frame; ++l) {
      std::snprintf(buffer, sizeof buffer, "verb%zu", f * spec.lemmas_per_frame + l);
      const std::string lemma = buffer;
      for (std::size_t i = 0; i < spec.instances_per_lemma; ++i, ++serial) {
        Instance inst;
        std::snprintf(buffer, sizeof buffer, "syn-%05zu", serial);
        inst.id = buffer;
        inst.lemma = lemma;
        const std::string prefix = "Case " + std::to_string(serial) + ": they ";
        inst.sentence = prefix + lemma + " the thing.";
        inst.target = Span{prefix.size(), prefix.size() + lemma.size()};
        inst.gold_frame = frame;
        instances.push_back(std::move(inst));

        std::vector<double> v = centroids[f];
        for (double& x : v) x += noise.normal(0.0, corpus.noise_sigma);
        for (const auto& b : nuisance) {
          const double z = noise.normal(0.0, nuisance_sigma);
          for (std::size_t k = 0; k < spec.dim; ++k) v[k] += z * b[k];
        }
        corpus.embeddings.emplace_back(std::move(v));
      }
    }
  }
  corpus.dataset = Dataset("synthetic", std::move(instances));
  return corpus;
}

void write_embedding_table(const std::filesystem::path& path, const SyntheticCorpus& corpus) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write embedding table " + path.string());
  for (std::size_t i = 0; i < corpus.dataset.size(); ++i) {
    const auto values = corpus.embeddings[i].values();
    out << nlohmann::ordered_json{{"sentence", corpus.dataset[i].sentence},
                                  {"embedding", std::vector<double>(values.begin(), values.end())}}
               .dump()
        << '\n';
  }
  if (!out) throw DataError("failed writing embedding table " + path.string());
}

}  // namespace frameind
