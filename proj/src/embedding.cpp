// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#include "frameind/embedding.hpp"

#include <cmath>
#include <stdexcept>

namespace frameind {

EmbeddingVector::EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw std::invalid_argument("embedding vector is empty");
  for (double x : values_) {
    if (!std::isfinite(x)) throw std::invalid_argument("embedding vector has a non-finite entry");
  }
}

EmbeddingVector EmbeddingVector::from_f32(std::span<const float> values) {
  return EmbeddingVector(std::vector<double>(values.begin(), values.end()));
}

double EmbeddingVector::norm() const noexcept { return std::sqrt(dot(values_, values_)); }

std::vector<float> EmbeddingVector::to_f32() const {
  return std::vector<float>(values_.begin(), values_.end());
}

EmbeddingVector normalize(const EmbeddingVector& v) {
  if (v.dim() == 0) throw std::invalid_argument("normalize: empty vector");
  // Scale by the largest magnitude first so tiny or huge inputs do not
  // underflow or overflow in the sum of squares.
  double peak = 0.0;
  for (double x : v.values()) peak = std::max(peak, std::abs(x));
  if (peak == 0.0) throw std::invalid_argument("normalize: zero vector");
  std::vector<double> out(v.values().begin(), v.values().end());
  double sq = 0.0;
  for (double& x : out) {
    x /= peak;
    sq += x * x;
  }
  const double n = std::sqrt(sq);
  for (double& x : out) x /= n;
  return EmbeddingVector(std::move(out));
}

double dot(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw std::invalid_argument("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u[i] * v[i];
  return s;
}

double distance(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw std::invalid_argument("distance: dimension mismatch (" + std::to_string(u.size()) +
                                " vs " + std::to_string(v.size()) + ")");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = u[i] - v[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double distance(const EmbeddingVector& u, const EmbeddingVector& v) {
  return distance(u.values(), v.values());
}

}  // namespace frameind
