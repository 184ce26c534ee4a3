// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>

namespace frameind {

// SHA-256 of a byte string.
class Digest {
 public:
  static constexpr std::size_t kSize = 32;
  using Bytes = std::array<std::uint8_t, kSize>;

  Digest() = default;
  explicit Digest(const Bytes& bytes) : bytes_(bytes) {}

  static Digest of(std::string_view data);
  static Digest of_file(const std::filesystem::path& path);
  static Digest from_hex(std::string_view hex);

  const Bytes& bytes() const noexcept { return bytes_; }
  std::string hex() const;

  auto operator<=>(const Digest&) const = default;

 private:
  Bytes bytes_{};
};

struct DigestHash {
  std::size_t operator()(const Digest& d) const noexcept {
    std::size_t h = 0;
    for (std::size_t i = 0; i < sizeof(std::size_t); ++i) {
      h = (h << 8) | d.bytes()[i];
    }
    return h;
  }
};

// CRC-32 (IEEE, as used by zlib/PNG).
std::uint32_t crc32(std::string_view data);

}  // namespace frameind
