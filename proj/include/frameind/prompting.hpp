// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "frameind/corpus.hpp"

namespace frameind {

// FrameEOL prompt template. The rendered prompt ends right where the frame
// name would follow, so the last token's final-layer state is the embedding.
//
//   en, token on : The FrameNet frame evoked by "[verb]" in "[sentence]" is
//   en, token off: The frame evoked by "[verb]" in "[sentence]" is
//   ja, token on : "[sentence]" 内の "[verb]" が喚起するFrameNetフレームは
//
// There is no Japanese variant without the FrameNet token.
class PromptTemplate {
 public:
  explicit PromptTemplate(Language language = Language::english,
                          bool include_framenet_token = true);

  Language language() const noexcept { return language_; }
  bool include_framenet_token() const noexcept { return include_framenet_token_; }

  // Pattern with literal "[verb]" and "[sentence]" placeholders.
  std::string_view pattern() const noexcept;

  // "en-framenet", "en-plain" or "ja-framenet".
  std::string variant_name() const;

  // Throws std::invalid_argument for an empty verb or sentence.
  std::string render(std::string_view verb, std::string_view sentence) const;
  std::string render(const Instance& instance) const;

 private:
  Language language_;
  bool include_framenet_token_;
};

struct Demonstration {
  Instance instance;
  std::string frame_name;

  // Uses the instance's gold frame. Throws DataError when it has none.
  static Demonstration from_instance(const Instance& instance);
};

using TokenCounter = std::function<std::size_t(std::string_view)>;

// ceil(bytes / 4)
std::size_t approximate_token_count(std::string_view text);

struct IclBudget {
  std::size_t max_total_tokens = 2048;
  std::size_t max_demo_tokens = 1900;
  TokenCounter counter = approximate_token_count;

  // Throws std::invalid_argument unless 0 < max_demo_tokens <= max_total_tokens.
  void validate() const;
  std::size_t count(std::string_view text) const { return counter(text); }
};

// "<rendered template> <frame name>\n"
std::string render_demonstration(const PromptTemplate& tmpl, const Demonstration& demo);

// Demonstration lines followed by the target's rendered template. When the
// assembled text exceeds the budget, leading characters are dropped until it
// fits; the cut always lands on a UTF-8 boundary.
std::string build_icl_prompt(std::span<const Demonstration> demos, const Instance& target,
                             const PromptTemplate& tmpl, const IclBudget& budget);

// Shortest-prefix removal that makes `text` fit `max_tokens`.
std::string truncate_front(std::string_view text, std::size_t max_tokens,
                           const TokenCounter& counter);

// k demonstrations drawn uniformly without replacement from `train`. A draw
// whose rendered demonstration is over the per-demo budget is discarded and
// replaced by a fresh draw. Throws DataError when fewer than k qualify.
std::vector<Demonstration> sample_demonstrations(const Dataset& train, std::size_t k,
                                                 std::uint64_t seed, const IclBudget& budget,
                                                 const PromptTemplate& tmpl);

// Token counter backed by a child process speaking a line protocol: each
// request is one JSON string literal followed by '\n'; each reply is a
// decimal token count followed by '\n'. The process lives as long as the
// last copy of the returned counter.
TokenCounter make_subprocess_token_counter(const std::string& command);

}  // namespace frameind
