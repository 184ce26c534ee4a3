// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace frameind::utf8 {

bool is_valid(std::string_view s);

// Number of code points. Requires valid UTF-8.
std::size_t length(std::string_view s);

// Byte offset of code point `index` (index == length(s) gives s.size()).
// Empty when index is past the end.
std::optional<std::size_t> byte_offset(std::string_view s, std::size_t index);

// Smallest code point boundary >= pos.
std::size_t next_boundary(std::string_view s, std::size_t pos);

// Substring by code point range [begin, end).
std::string substr(std::string_view s, std::size_t begin, std::size_t end);

}  // namespace frameind::utf8

namespace frameind {

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

}  // namespace frameind
