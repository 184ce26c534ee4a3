// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace frameind {

// Sentence -> embedding rows used by the stub backend.
struct EmbeddingTable {
  std::vector<std::string> sentences;
  std::vector<std::vector<double>> vectors;

  // Reads the line-delimited table written by write_embedding_table.
  static EmbeddingTable load(const std::filesystem::path& path);
};

struct StubOptions {
  // Dimension of the hash-derived vectors served for prompts not in the table
  // (ignored when the table is non-empty; its dimension is used instead).
  std::size_t fallback_dim = 16;
  // Reply with {"embeddings": [[...]]} instead of {"data": [...]}.
  bool embeddings_format = false;
  // Emit "data" entries in reverse order, relying on their "index" fields.
  bool reverse_data = false;
  // The first `fail_first` requests answer `fail_status`.
  int fail_first = 0;
  int fail_status = 503;
  // Any request holding a prompt that contains this text answers 500.
  std::optional<std::string> fail_marker;
  // Prompts containing this text get one extra dimension.
  std::optional<std::string> wrong_dim_marker;
  std::chrono::milliseconds latency{0};
};

// Local HTTP endpoint speaking the embedding API. A prompt is looked up by
// its last line: the longest table sentence contained in it wins; unknown
// prompts get a deterministic pseudo-random vector seeded by their bytes.
class StubEmbeddingServer {
 public:
  explicit StubEmbeddingServer(EmbeddingTable table = {}, StubOptions options = {});
  ~StubEmbeddingServer();

  StubEmbeddingServer(const StubEmbeddingServer&) = delete;
  StubEmbeddingServer& operator=(const StubEmbeddingServer&) = delete;

  // Binds 127.0.0.1 on `port` (0 picks a free one) and serves in a
  // background thread.
  void start(int port = 0);
  void stop();
  // Blocks until stop() is called from elsewhere.
  void wait();

  int port() const noexcept { return port_; }
  std::string url() const;  // http://127.0.0.1:<port>/v1/embeddings

  std::size_t request_count() const noexcept { return requests_.load(); }
  std::size_t prompt_count() const noexcept { return prompts_.load(); }
  std::size_t max_in_flight() const noexcept { return max_in_flight_.load(); }
  void reset_counters();

  // The vector the stub would serve for a prompt.
  std::vector<double> embed(const std::string& prompt) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
  std::atomic<std::size_t> requests_{0};
  std::atomic<std::size_t> prompts_{0};
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> max_in_flight_{0};
};

}  // namespace frameind
