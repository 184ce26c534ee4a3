// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>

#include "frameind/digest.hpp"
#include "frameind/embedding.hpp"

namespace frameind {

// Append-only binary embedding cache bound to one model.
//
// Layout, all integers little-endian:
//
//   header  "FEOL" | u16 version (=1) | u32 dim | u32 meta_len | meta bytes
//   record  u16 id_len | id bytes | 32-byte SHA-256 prompt digest
//           | dim x f32 | u32 CRC-32 over the preceding record bytes
//
// `meta` is a UTF-8 JSON object; "model_id" is required, producers may add
// other keys. `dim` is 0 until the first record is written.
//
// Readers may run concurrently with one writer. Each record is written with a
// single append, so a reader never observes a partial record through get().
class EmbeddingCache {
 public:
  static constexpr std::uint16_t kVersion = 1;

  // Opens or creates the cache at `path`. Validates every record of an
  // existing file (throws CacheError on bad magic, version or CRC) and throws
  // DataError when the file belongs to a different model.
  static EmbeddingCache open(const std::filesystem::path& path, const std::string& model_id);

  // Opens an existing cache whatever its model.
  static EmbeddingCache open_existing(const std::filesystem::path& path);

  // Full integrity check without keeping the file open.
  static void validate(const std::filesystem::path& path);

  EmbeddingCache(EmbeddingCache&& other) noexcept;
  EmbeddingCache& operator=(EmbeddingCache&&) = delete;
  EmbeddingCache(const EmbeddingCache&) = delete;
  EmbeddingCache& operator=(const EmbeddingCache&) = delete;
  ~EmbeddingCache();

  const std::string& model_id() const noexcept { return model_id_; }
  std::uint32_t dim() const;
  std::size_t size() const;
  const std::filesystem::path& path() const noexcept { return path_; }

  // Throws DataError on a model or dimension mismatch.
  void put(const EmbeddingRecord& record);

  // Latest record for the digest; empty for an unknown digest or a foreign model.
  std::optional<EmbeddingRecord> get(std::string_view model_id, const Digest& digest) const;

  bool contains(const Digest& digest) const;

 private:
  struct Location {
    std::uint64_t offset = 0;  // start of the record
    std::uint32_t length = 0;  // bytes including the CRC
  };

  EmbeddingCache(std::filesystem::path path, int fd, std::string model_id,
                 std::uint32_t dim, std::uint64_t end);
  static EmbeddingCache open_impl(const std::filesystem::path& path,
                                  const std::string* expected_model);

  std::filesystem::path path_;
  int fd_ = -1;
  std::string model_id_;
  std::uint32_t dim_ = 0;
  std::uint64_t end_ = 0;
  std::unordered_map<Digest, Location, DigestHash> index_;
  mutable std::shared_mutex mutex_;
  std::mutex write_mutex_;

  friend struct CacheScanner;
};

}  // namespace frameind
