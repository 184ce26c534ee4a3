// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "frameind/digest.hpp"

namespace frameind {

// Dense frame embedding. Entries are finite; storage is 64-bit.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;
  // Throws std::invalid_argument on an empty or non-finite input.
  explicit EmbeddingVector(std::vector<double> values);

  static EmbeddingVector from_f32(std::span<const float> values);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t dim() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  double norm() const noexcept;
  std::vector<float> to_f32() const;

  bool operator==(const EmbeddingVector&) const = default;

 private:
  std::vector<double> values_;
};

// Unit-norm copy. Throws std::invalid_argument for a zero vector.
EmbeddingVector normalize(const EmbeddingVector& v);

// Euclidean distance. Throws std::invalid_argument on a dimension mismatch.
double distance(const EmbeddingVector& u, const EmbeddingVector& v);
double distance(std::span<const double> u, std::span<const double> v);

double dot(std::span<const double> u, std::span<const double> v);

// Cache identity of a prompt: SHA-256 over its exact bytes.
inline Digest prompt_digest(std::string_view prompt) { return Digest::of(prompt); }

struct EmbeddingRecord {
  std::string instance_id;
  std::string model_id;
  Digest prompt_digest;
  std::vector<float> values;

  EmbeddingVector vector() const { return EmbeddingVector::from_f32(values); }
};

}  // namespace frameind
