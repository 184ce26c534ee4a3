// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "frameind/embedding.hpp"

namespace frameind {

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  double backoff_multiplier = 2.0;
};

// HTTP embedding endpoint. The server must pool the final-layer hidden state
// of the last prompt token; the client has no way to check that.
//
// Request:  POST <endpoint>  {"model": "<model_id>", "input": ["...", ...]}
// Response: {"data": [{"embedding": [...], "index": i}, ...]}
//       or  {"embeddings": [[...], ...]}
// with one vector per input, in input order unless "index" says otherwise.
struct BackendConfig {
  std::string endpoint;  // http://host[:port]/path
  std::string model_id;
  std::size_t parallelism = 4;
  std::size_t batch_size = 16;
  RetryPolicy retry;
  std::chrono::milliseconds timeout{60000};

  // Throws std::invalid_argument for a malformed configuration.
  void validate() const;
};

// One vector per prompt, in prompt order. Identical prompts are sent once.
// At most `parallelism` requests are in flight. Transport errors, HTTP 408,
// 429 and 5xx are retried with exponential backoff; other failures are not.
// Throws BackendError (carrying the failing prompt index) when a request
// cannot be served, or when responses disagree on dimension.
std::vector<EmbeddingVector> fetch_embeddings(const BackendConfig& backend,
                                              std::span<const std::string> prompts);

}  // namespace frameind
