// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#include "frameind/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "frameind/errors.hpp"
#include "frameind/rng.hpp"
#include "frameind/text.hpp"

namespace frameind {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Language language) {
  return language == Language::english ? "en" : "ja";
}

Language parse_language(std::string_view text) {
  if (text == "en" || text == "english") return Language::english;
  if (text == "ja" || text == "japanese") return Language::japanese;
  throw std::invalid_argument("unknown language '" + std::string(text) + "'");
}

std::string Instance::target_text() const {
  return utf8::substr(sentence, target.begin, target.end);
}

namespace {

// Empty string when valid, otherwise what is wrong.
std::string check_instance(const Instance& inst) {
  if (inst.id.empty()) return "empty id";
  if (inst.lemma.empty()) return "empty lemma";
  if (inst.sentence.empty()) return "empty sentence";
  if (!utf8::is_valid(inst.sentence)) return "sentence is not valid UTF-8";
  if (inst.target.begin >= inst.target.end) return "empty target span";
  if (inst.target.end > utf8::length(inst.sentence)) {
    return "target span [" + std::to_string(inst.target.begin) + ", " +
           std::to_string(inst.target.end) + ") exceeds sentence length " +
           std::to_string(utf8::length(inst.sentence));
  }
  if (inst.gold_frame && inst.gold_frame->empty()) return "empty gold_frame";
  return {};
}

Instance instance_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("record is not a JSON object");
  Instance inst;
  inst.id = j.at("id").get<std::string>();
  inst.lemma = j.at("lemma").get<std::string>();
  inst.sentence = j.at("sentence").get<std::string>();
  const auto begin = j.at("target_begin").get<long long>();
  const auto end = j.at("target_end").get<long long>();
  if (begin < 0 || end < 0) throw std::invalid_argument("negative target offset");
  inst.target = {static_cast<std::size_t>(begin), static_cast<std::size_t>(end)};
  if (auto it = j.find("gold_frame"); it != j.end() && !it->is_null()) {
    inst.gold_frame = it->get<std::string>();
  }
  inst.language = parse_language(j.at("language").get<std::string>());
  return inst;
}

}  // namespace

Dataset::Dataset(std::string name, std::vector<Instance> instances)
    : name_(std::move(name)), instances_(std::move(instances)) {
  index_.reserve(instances_.size());
  for (std::size_t i = 0; i < instances_.size(); ++i) {
    if (auto problem = check_instance(instances_[i]); !problem.empty()) {
      throw DataError("instance '" + instances_[i].id + "': " + problem);
    }
    if (!index_.emplace(instances_[i].id, i).second) {
      throw DataError("duplicate instance id '" + instances_[i].id + "'");
    }
  }
}

std::optional<std::size_t> Dataset::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const Instance* Dataset::find(std::string_view id) const {
  auto i = index_of(id);
  return i ? &instances_[*i] : nullptr;
}

bool Dataset::fully_labeled() const {
  return std::all_of(instances_.begin(), instances_.end(),
                     [](const Instance& inst) { return inst.gold_frame.has_value(); });
}

void Dataset::require_labels(std::string_view purpose) const {
  for (const auto& inst : instances_) {
    if (!inst.gold_frame) {
      throw DataError(std::string(purpose) + " needs gold frames, but instance '" + inst.id +
                      "' in '" + name_ + "' has none");
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices, std::string name) const {
  std::vector<Instance> picked;
  picked.reserve(indices.size());
  for (auto i : indices) picked.push_back(instances_.at(i));
  return Dataset(std::move(name), std::move(picked));
}

std::vector<std::string> Dataset::ids() const {
  std::vector<std::string> out;
  out.reserve(instances_.size());
  for (const auto& inst : instances_) out.push_back(inst.id);
  return out;
}

std::vector<std::string> Dataset::lemmas() const {
  std::vector<std::string> out;
  out.reserve(instances_.size());
  for (const auto& inst : instances_) out.push_back(inst.lemma);
  return out;
}

std::vector<std::string> Dataset::gold_frames() const {
  require_labels("gold_frames");
  std::vector<std::string> out;
  out.reserve(instances_.size());
  for (const auto& inst : instances_) out.push_back(*inst.gold_frame);
  return out;
}

Dataset parse_instances(std::istream& in, std::string name) {
  std::vector<Instance> instances;
  std::unordered_map<std::string, std::size_t> first_line;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    Instance inst;
    try {
      inst = instance_from_json(json::parse(line));
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    } catch (const std::invalid_argument& e) {
      throw ParseError(line_no, e.what());
    }
    if (auto problem = check_instance(inst); !problem.empty()) {
      throw ParseError(line_no, problem);
    }
    if (auto [it, fresh] = first_line.emplace(inst.id, line_no); !fresh) {
      throw ParseError(line_no, "duplicate id '" + inst.id + "' (first seen on line " +
                                    std::to_string(it->second) + ")");
    }
    instances.push_back(std::move(inst));
  }
  return Dataset(std::move(name), std::move(instances));
}

Dataset load_instances(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path.string());
  return parse_instances(in, path.stem().string());
}

ordered_json instance_to_json(const Instance& inst) {
  ordered_json j;
  j["id"] = inst.id;
  j["lemma"] = inst.lemma;
  j["sentence"] = inst.sentence;
  j["target_begin"] = inst.target.begin;
  j["target_end"] = inst.target.end;
  j["gold_frame"] = inst.gold_frame ? ordered_json(*inst.gold_frame) : ordered_json(nullptr);
  j["language"] = std::string(to_string(inst.language));
  return j;
}

void write_instances(std::ostream& out, const Dataset& dataset) {
  for (const auto& inst : dataset.instances()) out << instance_to_json(inst).dump() << '\n';
}

// ---------------------------------------------------------------------------

FoldAssignment::FoldAssignment(int n_folds, std::uint64_t seed, std::map<std::string, int> fold_of)
    : n_folds_(n_folds), seed_(seed), fold_of_(std::move(fold_of)) {
  if (n_folds_ < 2) throw std::invalid_argument("n_folds must be at least 2");
  for (const auto& [id, f] : fold_of_) {
    if (f < 0 || f >= n_folds_) {
      throw DataError("fold index " + std::to_string(f) + " of '" + id + "' out of range");
    }
  }
}

int FoldAssignment::fold(std::string_view id) const {
  auto it = fold_of_.find(std::string(id));
  if (it == fold_of_.end()) throw DataError("instance '" + std::string(id) + "' has no fold");
  return it->second;
}

RoundRoles FoldAssignment::roles(int round) const {
  if (round < 0 || round >= n_folds_) throw std::out_of_range("round out of range");
  RoundRoles roles;
  roles.test = round;
  roles.dev = (round + 1) % n_folds_;
  for (int f = 0; f < n_folds_; ++f) {
    if (f != roles.test && f != roles.dev) roles.train.push_back(f);
  }
  return roles;
}

std::vector<std::size_t> FoldAssignment::members(const Dataset& dataset, int fold_index) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (fold(dataset[i].id) == fold_index) out.push_back(i);
  }
  return out;
}

CvRound FoldAssignment::round(const Dataset& dataset, int round_index) const {
  const auto r = roles(round_index);
  std::vector<std::size_t> train;
  std::vector<std::size_t> dev;
  std::vector<std::size_t> test;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const int f = fold(dataset[i].id);
    if (f == r.test) {
      test.push_back(i);
    } else if (f == r.dev) {
      dev.push_back(i);
    } else {
      train.push_back(i);
    }
  }
  const std::string base = dataset.name() + "/round" + std::to_string(round_index);
  return CvRound{round_index, dataset.subset(train, base + "/train"),
                 dataset.subset(dev, base + "/dev"), dataset.subset(test, base + "/test")};
}

void FoldAssignment::check_covers(const Dataset& dataset) const {
  for (const auto& inst : dataset.instances()) fold(inst.id);
  if (fold_of_.size() != dataset.size()) {
    throw DataError("fold file assigns " + std::to_string(fold_of_.size()) +
                    " ids but the dataset has " + std::to_string(dataset.size()));
  }
}

ordered_json FoldAssignment::to_json() const {
  ordered_json j;
  j["n_folds"] = n_folds_;
  j["seed"] = seed_;
  ordered_json folds = ordered_json::object();
  for (const auto& [id, f] : fold_of_) folds[id] = f;
  j["folds"] = std::move(folds);
  return j;
}

FoldAssignment FoldAssignment::from_json(const json& j) {
  try {
    std::map<std::string, int> fold_of;
    for (const auto& [id, f] : j.at("folds").items()) fold_of[id] = f.get<int>();
    return FoldAssignment(j.at("n_folds").get<int>(), j.at("seed").get<std::uint64_t>(),
                          std::move(fold_of));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed fold file: ") + e.what());
  }
}

FoldAssignment load_folds(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open fold file " + path.string());
  try {
    return FoldAssignment::from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void save_folds(const std::filesystem::path& path, const FoldAssignment& folds) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write fold file " + path.string());
  out << folds.to_json().dump(2) << '\n';
}

namespace {

// Lemmas with at least two distinct gold frames.
std::set<std::string> polysemous_lemmas(const Dataset& dataset) {
  std::map<std::string, std::set<std::string>> frames_of;
  for (const auto& inst : dataset.instances()) {
    auto& frames = frames_of[inst.lemma];
    if (inst.gold_frame) frames.insert(*inst.gold_frame);
  }
  std::set<std::string> out;
  for (const auto& [lemma, frames] : frames_of) {
    if (frames.size() >= 2) out.insert(lemma);
  }
  return out;
}

struct SplitUnit {
  std::vector<std::string> lemmas;
  std::size_t instances = 0;
  std::size_t polysemous = 0;  // polysemous lemmas in the unit
};

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

std::vector<SplitUnit> split_units(const Dataset& dataset, const FoldOptions& options) {
  std::map<std::string, std::size_t> lemma_index;
  std::vector<std::string> lemmas;
  std::vector<std::size_t> counts;
  for (const auto& inst : dataset.instances()) {
    auto [it, fresh] = lemma_index.emplace(inst.lemma, lemmas.size());
    if (fresh) {
      lemmas.push_back(inst.lemma);
      counts.push_back(0);
    }
    ++counts[it->second];
  }

  UnionFind groups(lemmas.size());
  if (options.policy == SplitPolicy::frame_disjoint) {
    std::map<std::string, std::set<std::size_t>> lemmas_of_frame;
    for (const auto& inst : dataset.instances()) {
      if (inst.gold_frame) lemmas_of_frame[*inst.gold_frame].insert(lemma_index.at(inst.lemma));
    }
    for (const auto& [frame, members] : lemmas_of_frame) {
      if (members.size() >= options.shared_frame_min_lemmas) continue;
      for (auto m : members) groups.unite(*members.begin(), m);
    }
  }

  const auto poly = polysemous_lemmas(dataset);
  std::map<std::size_t, SplitUnit> by_root;
  for (std::size_t i = 0; i < lemmas.size(); ++i) {
    auto& unit = by_root[groups.find(i)];
    unit.lemmas.push_back(lemmas[i]);
    unit.instances += counts[i];
    if (poly.count(lemmas[i])) ++unit.polysemous;
  }
  std::vector<SplitUnit> units;
  units.reserve(by_root.size());
  for (auto& [root, unit] : by_root) units.push_back(std::move(unit));
  return units;
}

}  // namespace

FoldAssignment make_folds(const Dataset& dataset, const FoldOptions& options) {
  if (options.n_folds < 2) throw std::invalid_argument("n_folds must be at least 2");
  auto units = split_units(dataset, options);
  const auto n_folds = static_cast<std::size_t>(options.n_folds);
  if (units.size() < n_folds) {
    throw DataError("cannot form " + std::to_string(n_folds) + " nonempty folds from " +
                    std::to_string(units.size()) + " lemma group(s)");
  }

  Rng rng(derive_seed(options.seed, "folds"));
  rng.shuffle(units);
  std::stable_sort(units.begin(), units.end(), [](const SplitUnit& a, const SplitUnit& b) {
    return a.instances > b.instances;
  });

  // Greedy bin packing. With polysemy balancing, a unit may only go to a fold
  // holding the fewest lemmas of its own class; among those the smallest fold wins.
  std::vector<std::size_t> fold_instances(n_folds, 0);
  std::vector<std::size_t> fold_poly(n_folds, 0);
  std::vector<std::size_t> fold_mono(n_folds, 0);
  std::map<std::string, int> fold_of;
  for (const auto& unit : units) {
    const bool poly = unit.polysemous > 0;
    const auto& class_count = poly ? fold_poly : fold_mono;
    std::size_t min_class = *std::min_element(class_count.begin(), class_count.end());
    std::size_t best = n_folds;
    for (std::size_t f = 0; f < n_folds; ++f) {
      if (options.balance_polysemy && class_count[f] != min_class) continue;
      if (best == n_folds || fold_instances[f] < fold_instances[best]) best = f;
    }
    fold_instances[best] += unit.instances;
    fold_poly[best] += unit.polysemous;
    fold_mono[best] += unit.lemmas.size() - unit.polysemous;
    for (const auto& lemma : unit.lemmas) fold_of[lemma] = static_cast<int>(best);
  }

  std::map<std::string, int> by_id;
  for (const auto& inst : dataset.instances()) by_id[inst.id] = fold_of.at(inst.lemma);
  return FoldAssignment(options.n_folds, options.seed, std::move(by_id));
}

// ---------------------------------------------------------------------------

namespace {

struct Summary {
  std::size_t n_instances = 0;
  std::set<std::string> frames;
  std::size_t n_verbs = 0;
  std::size_t n_polysemous = 0;
};

Summary summarize(const Dataset& dataset, std::span<const std::size_t> indices) {
  Summary s;
  std::map<std::string, std::set<std::string>> frames_of;
  for (auto i : indices) {
    const auto& inst = dataset[i];
    ++s.n_instances;
    auto& frames = frames_of[inst.lemma];
    if (inst.gold_frame) {
      frames.insert(*inst.gold_frame);
      s.frames.insert(*inst.gold_frame);
    }
  }
  s.n_verbs = frames_of.size();
  for (const auto& [lemma, frames] : frames_of) {
    if (frames.size() >= 2) ++s.n_polysemous;
  }
  return s;
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

DatasetStats compute_stats(const Dataset& dataset, const FoldAssignment* folds) {
  std::vector<std::size_t> all(dataset.size());
  std::iota(all.begin(), all.end(), 0);
  const auto total = summarize(dataset, all);

  DatasetStats stats;
  stats.n_instances = total.n_instances;
  stats.n_frames = total.frames.size();
  stats.n_verbs = total.n_verbs;
  stats.n_polysemous_verbs = total.n_polysemous;
  stats.polysemy_rate = ratio(total.n_polysemous, total.n_verbs);
  if (folds == nullptr) return stats;

  std::vector<Summary> per_fold;
  for (int f = 0; f < folds->n_folds(); ++f) {
    const auto members = folds->members(dataset, f);
    per_fold.push_back(summarize(dataset, members));
    const auto& s = per_fold.back();
    stats.folds.push_back(FoldStats{f, s.n_instances, s.frames.size(), s.n_verbs,
                                    ratio(s.n_polysemous, s.n_verbs)});
  }
  for (int r = 0; r < folds->n_folds(); ++r) {
    const auto roles = folds->roles(r);
    std::set<std::string> seen;
    for (int f : roles.train) seen.insert(per_fold[f].frames.begin(), per_fold[f].frames.end());
    const auto& test_frames = per_fold[roles.test].frames;
    std::size_t unseen = 0;
    for (const auto& frame : test_frames) {
      if (!seen.count(frame)) ++unseen;
    }
    stats.unseen.push_back(
        UnseenFrameStats{r, test_frames.size(), unseen, ratio(unseen, test_frames.size())});
  }
  return stats;
}

ordered_json stats_to_json(const DatasetStats& stats) {
  ordered_json j;
  j["n_instances"] = stats.n_instances;
  j["n_frames"] = stats.n_frames;
  j["n_verbs"] = stats.n_verbs;
  j["n_polysemous_verbs"] = stats.n_polysemous_verbs;
  j["polysemy_rate"] = stats.polysemy_rate;
  if (!stats.folds.empty()) {
    ordered_json folds = ordered_json::array();
    for (const auto& f : stats.folds) {
      folds.push_back({{"fold", f.fold},
                       {"n_instances", f.n_instances},
                       {"n_frames", f.n_frames},
                       {"n_verbs", f.n_verbs},
                       {"polysemy_rate", f.polysemy_rate}});
    }
    j["folds"] = std::move(folds);
    ordered_json unseen = ordered_json::array();
    for (const auto& u : stats.unseen) {
      unseen.push_back({{"round", u.round},
                        {"test_frames", u.test_frames},
                        {"unseen_frames", u.unseen_frames},
                        {"unseen_rate", u.unseen_rate}});
    }
    j["unseen"] = std::move(unseen);
  }
  return j;
}

}  // namespace frameind
