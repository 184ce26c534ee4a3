// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace frameind {

// Bad or inconsistent input data. The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A record in a line-oriented file failed to parse.
class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Cache file failed its integrity checks.
class CacheError : public DataError {
 public:
  using DataError::DataError;
};

// The embedding endpoint could not serve a request. CLI exit code 3.
class BackendError : public std::runtime_error {
 public:
  explicit BackendError(const std::string& what,
                        std::optional<std::size_t> prompt_index = std::nullopt)
      : std::runtime_error(what), prompt_index_(prompt_index) {}

  // Index (in the caller's prompt order) of the first prompt that failed.
  std::optional<std::size_t> prompt_index() const noexcept { return prompt_index_; }

 private:
  std::optional<std::size_t> prompt_index_;
};

}  // namespace frameind
