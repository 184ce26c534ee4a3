// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "frameind/corpus.hpp"
#include "frameind/stub_server.hpp"
#include "frameind/synthetic.hpp"

namespace fixtures {

namespace fs = std::filesystem;

// Removed with its contents on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "test") {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("frameind-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_dataset(const fs::path& path, const frameind::Dataset& dataset) {
  std::ofstream out(path, std::ios::binary);
  frameind::write_instances(out, dataset);
}

// Relative path -> bytes of every regular file under `root`.
inline std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    files[fs::relative(entry.path(), root).generic_string()] = slurp(entry.path());
  }
  return files;
}

inline frameind::EmbeddingTable table_of(const frameind::SyntheticCorpus& corpus) {
  frameind::EmbeddingTable table;
  for (std::size_t i = 0; i < corpus.dataset.size(); ++i) {
    table.sentences.push_back(corpus.dataset[i].sentence);
    const auto v = corpus.embeddings[i].values();
    table.vectors.emplace_back(v.begin(), v.end());
  }
  return table;
}

}  // namespace fixtures
