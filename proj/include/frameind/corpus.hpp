// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace frameind {

enum class Language { english, japanese };

// "en" / "ja"
std::string_view to_string(Language language);
// Accepts "en", "english", "ja", "japanese".
Language parse_language(std::string_view text);

// Half-open code point range of the frame-evoking verb within a sentence.
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  bool operator==(const Span&) const = default;
};

struct Instance {
  std::string id;
  std::string lemma;
  std::string sentence;
  Span target;
  std::optional<std::string> gold_frame;
  Language language = Language::english;

  // Surface form of the verb as it appears in the sentence.
  std::string target_text() const;
};

// Ordered, id-unique collection of instances. Immutable once built.
class Dataset {
 public:
  Dataset() = default;
  // Throws DataError on a duplicate id or an invalid target span.
  Dataset(std::string name, std::vector<Instance> instances);

  const std::string& name() const noexcept { return name_; }
  std::span<const Instance> instances() const noexcept { return instances_; }
  std::size_t size() const noexcept { return instances_.size(); }
  bool empty() const noexcept { return instances_.empty(); }
  const Instance& operator[](std::size_t i) const { return instances_[i]; }

  std::optional<std::size_t> index_of(std::string_view id) const;
  const Instance* find(std::string_view id) const;

  bool fully_labeled() const;
  // Throws DataError naming `purpose` when some instance lacks a gold frame.
  void require_labels(std::string_view purpose) const;

  Dataset subset(std::span<const std::size_t> indices, std::string name) const;

  std::vector<std::string> ids() const;
  std::vector<std::string> lemmas() const;
  // Gold frames; requires a fully labeled dataset.
  std::vector<std::string> gold_frames() const;

 private:
  std::string name_;
  std::vector<Instance> instances_;
  std::unordered_map<std::string, std::size_t> index_;
};

// One JSON object per line: id, lemma, sentence, target_begin, target_end,
// gold_frame (nullable), language. Blank lines are skipped.
Dataset parse_instances(std::istream& in, std::string name = "dataset");
Dataset load_instances(const std::filesystem::path& path);
void write_instances(std::ostream& out, const Dataset& dataset);

nlohmann::ordered_json instance_to_json(const Instance& instance);

// ---------------------------------------------------------------------------
// Cross-validation folds

enum class SplitPolicy {
  // Every lemma lives in exactly one fold.
  lemma,
  // Additionally keeps frames with fewer than `shared_frame_min_lemmas`
  // evoking lemmas inside a single fold; larger frames may span folds.
  frame_disjoint,
};

struct FoldOptions {
  int n_folds = 3;
  std::uint64_t seed = 0;
  bool balance_polysemy = true;
  SplitPolicy policy = SplitPolicy::lemma;
  std::size_t shared_frame_min_lemmas = 3;
};

// Fold roles for one cross-validation round.
struct RoundRoles {
  int test = 0;
  int dev = 0;
  std::vector<int> train;
};

struct CvRound {
  int index = 0;
  Dataset train;
  Dataset dev;
  Dataset test;
};

class FoldAssignment {
 public:
  FoldAssignment() = default;
  FoldAssignment(int n_folds, std::uint64_t seed, std::map<std::string, int> fold_of);

  int n_folds() const noexcept { return n_folds_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::map<std::string, int>& fold_of() const noexcept { return fold_of_; }

  // Throws DataError for an unknown id.
  int fold(std::string_view id) const;

  // Round r tests on fold r, tunes on fold (r + 1) mod n, trains on the rest.
  RoundRoles roles(int round) const;

  // Instance indices of `dataset` that fall into `fold`, in dataset order.
  std::vector<std::size_t> members(const Dataset& dataset, int fold) const;

  CvRound round(const Dataset& dataset, int round) const;

  // Throws DataError unless every dataset id (and nothing else) is assigned.
  void check_covers(const Dataset& dataset) const;

  nlohmann::ordered_json to_json() const;
  static FoldAssignment from_json(const nlohmann::json& j);

 private:
  int n_folds_ = 0;
  std::uint64_t seed_ = 0;
  std::map<std::string, int> fold_of_;
};

FoldAssignment make_folds(const Dataset& dataset, const FoldOptions& options);

FoldAssignment load_folds(const std::filesystem::path& path);
void save_folds(const std::filesystem::path& path, const FoldAssignment& folds);

// ---------------------------------------------------------------------------
// Statistics

struct FoldStats {
  int fold = 0;
  std::size_t n_instances = 0;
  std::size_t n_frames = 0;
  std::size_t n_verbs = 0;
  double polysemy_rate = 0.0;
};

struct UnseenFrameStats {
  int round = 0;
  std::size_t test_frames = 0;
  std::size_t unseen_frames = 0;
  double unseen_rate = 0.0;
};

struct DatasetStats {
  std::size_t n_instances = 0;
  std::size_t n_frames = 0;
  std::size_t n_verbs = 0;
  std::size_t n_polysemous_verbs = 0;
  double polysemy_rate = 0.0;
  std::vector<FoldStats> folds;
  std::vector<UnseenFrameStats> unseen;
};

DatasetStats compute_stats(const Dataset& dataset,
                           const FoldAssignment* folds = nullptr);

nlohmann::ordered_json stats_to_json(const DatasetStats& stats);

}  // namespace frameind
