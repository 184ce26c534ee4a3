// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "frameind/clustering.hpp"
#include "frameind/rng.hpp"

namespace frameind {

namespace {

double squared_distance(std::span<const double> u, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = u[i] - v[i];
    s += d * d;
  }
  return s;
}

struct Split {
  std::vector<int> side;  // 0 or 1 per point
  double sse = std::numeric_limits<double>::infinity();
};

// Index drawn with probability proportional to weights; uniform when all
// weights are zero.
std::size_t weighted_pick(std::span<const double> weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (total <= 0.0) return rng.uniform_index(weights.size());
  const double target = rng.uniform01() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (target < acc) return i;
  }
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return weights.size() - 1;
}

// One 2-means run from k-means++ seeds. A side left empty yields an
// infinite SSE.
Split two_means(std::span<const EmbeddingVector> data, std::span<const std::size_t> points,
                Rng& rng, const XMeansConfig& config) {
  const std::size_t n = points.size();
  const std::size_t dim = data.front().dim();
  auto at = [&](std::size_t i) { return data[points[i]].values(); };

  std::vector<std::vector<double>> centers(2);
  const auto first = at(rng.uniform_index(n));
  centers[0].assign(first.begin(), first.end());
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(at(i), centers[0]);
  const auto second = at(weighted_pick(d2, rng));
  centers[1].assign(second.begin(), second.end());

  Split split;
  split.side.assign(n, 0);
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    for (std::size_t i = 0; i < n; ++i) {
      split.side[i] = squared_distance(at(i), centers[1]) < squared_distance(at(i), centers[0]);
    }
    std::vector<std::vector<double>> next(2, std::vector<double>(dim, 0.0));
    std::size_t counts[2] = {0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = at(i);
      auto& c = next[static_cast<std::size_t>(split.side[i])];
      for (std::size_t k = 0; k < dim; ++k) c[k] += x[k];
      ++counts[split.side[i]];
    }
    if (counts[0] == 0 || counts[1] == 0) return Split{};
    double shift = 0.0;
    for (std::size_t c = 0; c < 2; ++c) {
      for (double& v : next[c]) v /= static_cast<double>(counts[c]);
      shift = std::max(shift, std::sqrt(squared_distance(next[c], centers[c])));
    }
    centers = std::move(next);
    if (shift <= config.tolerance) break;
  }
  // Final assignment against the final centers.
  split.sse = 0.0;
  std::size_t counts[2] = {0, 0};
  for (std::size_t i = 0; i < n; ++i) {
    const double to0 = squared_distance(at(i), centers[0]);
    const double to1 = squared_distance(at(i), centers[1]);
    split.side[i] = to1 < to0;
    split.sse += std::min(to0, to1);
    ++counts[split.side[i]];
  }
  if (counts[0] == 0 || counts[1] == 0) return Split{};
  return split;
}

Split best_two_means(std::span<const EmbeddingVector> data, std::span<const std::size_t> points,
                     Rng& rng, const XMeansConfig& config) {
  Split best;
  for (int r = 0; r < std::max(1, config.restarts); ++r) {
    Split s = two_means(data, points, rng, config);
    if (s.sse < best.sse) best = std::move(s);
  }
  return best;
}

}  // namespace

double spherical_bic(std::span<const EmbeddingVector> data, std::span<const std::size_t> points,
                     std::span<const int> labels, int k) {
  if (points.size() != labels.size()) throw std::invalid_argument("spherical_bic: size mismatch");
  if (k < 1) throw std::invalid_argument("spherical_bic: k < 1");
  const double r = static_cast<double>(points.size());
  if (points.size() <= static_cast<std::size_t>(k)) return -std::numeric_limits<double>::infinity();
  const std::size_t dim = data[points.front()].dim();
  const double m = static_cast<double>(dim);

  std::vector<std::vector<double>> centroid(static_cast<std::size_t>(k), std::vector<double>(dim));
  std::vector<double> count(static_cast<std::size_t>(k), 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto x = data[points[i]].values();
    auto& c = centroid.at(static_cast<std::size_t>(labels[i]));
    for (std::size_t d = 0; d < dim; ++d) c[d] += x[d];
    count[static_cast<std::size_t>(labels[i])] += 1.0;
  }
  for (std::size_t c = 0; c < centroid.size(); ++c) {
    if (count[c] == 0.0) throw std::invalid_argument("spherical_bic: empty cluster");
    for (double& v : centroid[c]) v /= count[c];
  }
  double sse = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    sse += squared_distance(data[points[i]].values(), centroid[static_cast<std::size_t>(labels[i])]);
  }
  // Pooled per-dimension variance.
  const double variance = sse / (m * (r - k));
  if (variance <= 0.0) return std::numeric_limits<double>::infinity();

  double log_likelihood = -r * m / 2.0 * std::log(2.0 * std::numbers::pi * variance) -
                          m * (r - k) / 2.0;
  for (double n : count) log_likelihood += n * std::log(n / r);
  const double params = k * (m + 1.0);
  return log_likelihood - params / 2.0 * std::log(r);
}

Labels xmeans(std::span<const EmbeddingVector> points, const XMeansConfig& config) {
  if (points.empty()) throw std::invalid_argument("xmeans: no points");
  if (config.k_max < 1) throw std::invalid_argument("xmeans: k_max < 1");
  for (const auto& p : points) {
    if (p.dim() != points.front().dim()) throw std::invalid_argument("xmeans: mixed dimensions");
  }
  Rng rng(derive_seed(config.seed, "xmeans"));
  std::vector<std::vector<std::size_t>> clusters(1);
  for (std::size_t i = 0; i < points.size(); ++i) clusters[0].push_back(i);

  // A cluster whose split was rejected is not tried again.
  std::vector<bool> settled(1, false);
  bool changed = true;
  while (changed && clusters.size() < config.k_max) {
    changed = false;
    std::vector<std::vector<std::size_t>> next;
    std::vector<bool> next_settled;
    std::size_t total = clusters.size();
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      auto& parent = clusters[c];
      if (settled[c] || total >= config.k_max || parent.size() < 2) {
        next_settled.push_back(settled[c] || parent.size() < 2);
        next.push_back(std::move(parent));
        continue;
      }
      const Split split = best_two_means(points, parent, rng, config);
      const std::vector<int> whole(parent.size(), 0);
      if (std::isfinite(split.sse) &&
          spherical_bic(points, parent, split.side, 2) > spherical_bic(points, parent, whole, 1)) {
        std::vector<std::size_t> children[2];
        for (std::size_t i = 0; i < parent.size(); ++i) {
          children[split.side[i]].push_back(parent[i]);
        }
        for (auto& child : children) {
          next.push_back(std::move(child));
          next_settled.push_back(false);
        }
        ++total;
        changed = true;
      } else {
        next.push_back(std::move(parent));
        next_settled.push_back(true);
      }
    }
    clusters = std::move(next);
    settled = std::move(next_settled);
  }

  std::vector<int> labels(points.size());
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    for (std::size_t i : clusters[c]) labels[i] = static_cast<int>(c);
  }
  return canonical_labels(labels);
}

}  // namespace frameind
