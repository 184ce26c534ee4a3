// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#include "frameind/clustering.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "frameind/errors.hpp"
#include "frameind/rng.hpp"

namespace frameind {

Labels canonical_labels(std::span<const int> labels) {
  std::unordered_map<int, int> remap;
  Labels out;
  out.reserve(labels.size());
  for (int l : labels) {
    auto [it, fresh] = remap.emplace(l, static_cast<int>(remap.size()));
    out.push_back(it->second);
  }
  return out;
}

int count_clusters(std::span<const int> labels) {
  std::unordered_map<int, int> seen;
  for (int l : labels) seen.emplace(l, 0);
  return static_cast<int>(seen.size());
}

ClusterAssignment::ClusterAssignment(std::vector<std::string> ids, std::span<const int> labels)
    : ids_(std::move(ids)), labels_(canonical_labels(labels)) {
  if (ids_.size() != labels_.size()) {
    throw std::invalid_argument("cluster assignment: " + std::to_string(ids_.size()) + " ids but " +
                                std::to_string(labels_.size()) + " labels");
  }
  n_clusters_ = count_clusters(labels_);
}

std::string ClusterAssignment::to_jsonl() const {
  std::string out;
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    out += nlohmann::ordered_json{{"instance_id", ids_[i]}, {"cluster", labels_[i]}}.dump();
    out += '\n';
  }
  return out;
}

ClusterAssignment ClusterAssignment::from_jsonl(std::string_view text) {
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  std::unordered_map<std::string, int> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ids.push_back(j.at("instance_id").get<std::string>());
      labels.push_back(j.at("cluster").get<int>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, std::string("bad assignment line: ") + e.what());
    }
    if (!seen.emplace(ids.back(), 0).second) {
      throw ParseError(line_no, "duplicate instance id '" + ids.back() + "'");
    }
  }
  return ClusterAssignment(std::move(ids), labels);
}

std::string MergeTrace::to_jsonl() const {
  std::string out;
  for (const auto& s : steps) {
    out += nlohmann::ordered_json{{"left", s.left},
                                  {"right", s.right},
                                  {"linkage", s.linkage},
                                  {"merged", s.merged}}
               .dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Agglomerator

namespace {

void check_points(std::span<const EmbeddingVector> points) {
  if (points.empty()) throw std::invalid_argument("clustering: no points");
  const std::size_t dim = points.front().dim();
  for (const auto& p : points) {
    if (p.dim() != dim) throw std::invalid_argument("clustering: mixed embedding dimensions");
  }
}

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

}  // namespace

Agglomerator::Agglomerator(std::span<const EmbeddingVector> points) {
  check_points(points);
  std::vector<std::vector<std::size_t>> singletons(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) singletons[i] = {i};
  init(points, singletons);
}

Agglomerator::Agglomerator(std::span<const EmbeddingVector> points,
                           std::span<const std::vector<std::size_t>> groups) {
  check_points(points);
  std::vector<bool> covered(points.size(), false);
  for (const auto& g : groups) {
    if (g.empty()) throw std::invalid_argument("clustering: empty initial group");
    for (std::size_t p : g) {
      if (p >= points.size() || covered[p]) {
        throw std::invalid_argument("clustering: initial groups are not a partition");
      }
      covered[p] = true;
    }
  }
  for (bool c : covered) {
    if (!c) throw std::invalid_argument("clustering: initial groups are not a partition");
  }
  init(points, groups);
}

double& Agglomerator::sum(std::size_t a, std::size_t b) {
  if (a > b) std::swap(a, b);
  // Row-major upper triangle without the diagonal.
  return sums_[a * n_slots_ - a * (a + 1) / 2 + (b - a - 1)];
}

double Agglomerator::sum(std::size_t a, std::size_t b) const {
  return const_cast<Agglomerator*>(this)->sum(a, b);
}

void Agglomerator::init(std::span<const EmbeddingVector> points,
                        std::span<const std::vector<std::size_t>> groups) {
  n_points_ = points.size();
  n_slots_ = groups.size();
  active_ = n_slots_;
  sums_.assign(n_slots_ * (n_slots_ - 1) / 2, 0.0);
  size_.resize(n_slots_);
  id_.resize(n_slots_);
  alive_.assign(n_slots_, true);
  members_.assign(groups.begin(), groups.end());
  slot_of_id_.resize(n_slots_);
  merged_into_.assign(n_slots_, kNone);
  trace_.n_initial = n_slots_;
  trace_.steps.clear();

  std::vector<std::size_t> group_of(n_points_);
  for (std::size_t g = 0; g < n_slots_; ++g) {
    size_[g] = groups[g].size();
    id_[g] = g;
    slot_of_id_[g] = g;
    for (std::size_t p : groups[g]) group_of[p] = g;
  }
  for (std::size_t i = 0; i < n_points_; ++i) {
    for (std::size_t j = i + 1; j < n_points_; ++j) {
      if (group_of[i] == group_of[j]) continue;
      sum(group_of[i], group_of[j]) += distance(points[i], points[j]);
    }
  }
  neighbor_.assign(n_slots_, kNone);
  neighbor_linkage_.assign(n_slots_, std::numeric_limits<double>::infinity());
  for (std::size_t s = 0; s < n_slots_; ++s) refresh_neighbor(s);
}

bool Agglomerator::better(double linkage, std::size_t a, std::size_t b, double best_linkage,
                          std::size_t best_a, std::size_t best_b) const {
  if (linkage != best_linkage) return linkage < best_linkage;
  const std::size_t lo = std::min(id_[a], id_[b]);
  const std::size_t hi = std::max(id_[a], id_[b]);
  const std::size_t best_lo = std::min(id_[best_a], id_[best_b]);
  const std::size_t best_hi = std::max(id_[best_a], id_[best_b]);
  if (lo != best_lo) return lo < best_lo;
  return hi < best_hi;
}

void Agglomerator::refresh_neighbor(std::size_t slot) {
  std::size_t best = kNone;
  double best_linkage = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < n_slots_; ++t) {
    if (t == slot || !alive_[t]) continue;
    const double linkage = sum(slot, t) / static_cast<double>(size_[slot] * size_[t]);
    if (best == kNone || better(linkage, slot, t, best_linkage, slot, best)) {
      best = t;
      best_linkage = linkage;
    }
  }
  neighbor_[slot] = best;
  neighbor_linkage_[slot] = best_linkage;
}

std::optional<Agglomerator::Candidate> Agglomerator::closest() const {
  std::size_t best = kNone;
  for (std::size_t s = 0; s < n_slots_; ++s) {
    if (!alive_[s] || neighbor_[s] == kNone) continue;
    if (best == kNone || better(neighbor_linkage_[s], s, neighbor_[s], neighbor_linkage_[best],
                                best, neighbor_[best])) {
      best = s;
    }
  }
  if (best == kNone) return std::nullopt;
  std::size_t a = best;
  std::size_t b = neighbor_[best];
  if (id_[a] > id_[b]) std::swap(a, b);
  return Candidate{id_[a], id_[b], neighbor_linkage_[best]};
}

MergeStep Agglomerator::merge_closest() {
  const auto candidate = closest();
  if (!candidate) throw std::logic_error("merge_closest: a single cluster is left");
  const std::size_t a = slot_of_id_[candidate->left];
  const std::size_t b = slot_of_id_[candidate->right];
  const std::size_t new_id = trace_.n_initial + trace_.steps.size();

  // The merged cluster lives in slot a; slot b retires.
  for (std::size_t t = 0; t < n_slots_; ++t) {
    if (t == a || t == b || !alive_[t]) continue;
    sum(a, t) += sum(b, t);
  }
  alive_[b] = false;
  size_[a] += size_[b];
  members_[a].insert(members_[a].end(), members_[b].begin(), members_[b].end());
  members_[b].clear();
  members_[b].shrink_to_fit();
  merged_into_[candidate->left] = new_id;
  merged_into_[candidate->right] = new_id;
  merged_into_.push_back(kNone);
  id_[a] = new_id;
  slot_of_id_.push_back(a);
  --active_;

  for (std::size_t s = 0; s < n_slots_; ++s) {
    if (!alive_[s] || s == a) continue;
    if (neighbor_[s] == a || neighbor_[s] == b) {
      refresh_neighbor(s);
      continue;
    }
    // Every other pair of s is unchanged, so only the new cluster can win.
    const double linkage = sum(s, a) / static_cast<double>(size_[s] * size_[a]);
    if (better(linkage, s, a, neighbor_linkage_[s], s, neighbor_[s])) {
      neighbor_[s] = a;
      neighbor_linkage_[s] = linkage;
    }
  }
  refresh_neighbor(a);

  MergeStep step{candidate->left, candidate->right, candidate->linkage, new_id};
  trace_.steps.push_back(step);
  return step;
}

const std::vector<std::size_t>& Agglomerator::members_of(std::size_t cluster_id) const {
  if (cluster_id >= merged_into_.size()) {
    throw std::out_of_range("unknown cluster id " + std::to_string(cluster_id));
  }
  while (merged_into_[cluster_id] != kNone) cluster_id = merged_into_[cluster_id];
  return members_[slot_of_id_[cluster_id]];
}

Labels Agglomerator::labels() const {
  std::vector<int> raw(n_points_, 0);
  for (std::size_t s = 0; s < n_slots_; ++s) {
    if (!alive_[s]) continue;
    for (std::size_t p : members_[s]) raw[p] = static_cast<int>(s);
  }
  return canonical_labels(raw);
}

ClusteringResult group_average_cluster(std::span<const EmbeddingVector> points, StopRule stop) {
  check_points(points);
  if (const auto* count = std::get_if<StopAtCount>(&stop)) {
    if (count->k < 1 || count->k > points.size()) {
      throw std::invalid_argument("stop count " + std::to_string(count->k) + " outside [1, " +
                                  std::to_string(points.size()) + "]");
    }
  }
  Agglomerator agg(points);
  if (const auto* count = std::get_if<StopAtCount>(&stop)) {
    while (agg.n_clusters() > count->k) agg.merge_closest();
  } else {
    const double threshold = std::get<StopBelowThreshold>(stop).threshold;
    for (auto c = agg.closest(); c && c->linkage < threshold; c = agg.closest()) {
      agg.merge_closest();
    }
  }
  return {agg.labels(), agg.trace()};
}

namespace {

// Smallest threshold under which the strict stop rule still performs a merge
// at this linkage.
double just_above(double linkage) {
  return std::nextafter(linkage, std::numeric_limits<double>::infinity());
}

}  // namespace

OneStepCalibration calibrate_one_step(std::span<const EmbeddingVector> dev_points,
                                      std::size_t dev_frame_count, ThresholdRule rule) {
  check_points(dev_points);
  if (dev_frame_count < 1 || dev_frame_count > dev_points.size()) {
    throw std::invalid_argument("dev frame count " + std::to_string(dev_frame_count) +
                                " outside [1, " + std::to_string(dev_points.size()) + "]");
  }
  OneStepCalibration calib;
  calib.dev_frame_count = dev_frame_count;
  Agglomerator agg(dev_points);
  while (agg.n_clusters() > dev_frame_count) agg.merge_closest();
  const auto& steps = agg.trace().steps;
  if (steps.empty()) return calib;
  calib.threshold = just_above(steps.back().linkage);
  if (rule == ThresholdRule::next_merge) {
    if (const auto next = agg.closest()) calib.threshold = next->linkage;
  }
  return calib;
}

// ---------------------------------------------------------------------------
// Same-lemma statistics

namespace {

struct PairCounts {
  double same_lemma_same_cluster = 0.0;
  double same_lemma = 0.0;
  double same_cluster = 0.0;
};

PairCounts count_pairs(std::span<const int> labels, std::span<const std::string> lemmas) {
  if (labels.size() != lemmas.size()) {
    throw std::invalid_argument("same-lemma statistic: label and lemma counts differ");
  }
  auto choose2 = [](double n) { return n * (n - 1.0) / 2.0; };
  std::map<std::pair<int, std::string_view>, double> cell;
  std::unordered_map<int, double> per_cluster;
  std::unordered_map<std::string_view, double> per_lemma;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    cell[{labels[i], lemmas[i]}] += 1.0;
    per_cluster[labels[i]] += 1.0;
    per_lemma[lemmas[i]] += 1.0;
  }
  PairCounts c;
  for (const auto& [key, n] : cell) c.same_lemma_same_cluster += choose2(n);
  for (const auto& [key, n] : per_cluster) c.same_cluster += choose2(n);
  for (const auto& [key, n] : per_lemma) c.same_lemma += choose2(n);
  return c;
}

}  // namespace

double same_lemma_proportion(std::span<const int> labels, std::span<const std::string> lemmas) {
  const auto c = count_pairs(labels, lemmas);
  return c.same_lemma == 0.0 ? 1.0 : c.same_lemma_same_cluster / c.same_lemma;
}

double same_lemma_share(std::span<const int> labels, std::span<const std::string> lemmas) {
  const auto c = count_pairs(labels, lemmas);
  return c.same_cluster == 0.0 ? 1.0 : c.same_lemma_same_cluster / c.same_cluster;
}

// ---------------------------------------------------------------------------
// Two-step clustering

namespace {

double lemma_statistic(LemmaCriterion criterion, std::span<const int> labels,
                       std::span<const std::string> lemmas) {
  return criterion == LemmaCriterion::share ? same_lemma_share(labels, lemmas)
                                            : same_lemma_proportion(labels, lemmas);
}

// Share falls as clusters merge across lemmas; proportion rises.
bool reaches(LemmaCriterion criterion, double value, double target) {
  return criterion == LemmaCriterion::share ? value <= target : value >= target;
}

struct StepOne {
  Labels labels;
  std::vector<std::vector<std::size_t>> groups;
};

StepOne per_lemma_xmeans(std::span<const std::string> lemmas,
                         std::span<const EmbeddingVector> points, std::size_t k_max,
                         XMeansConfig config) {
  if (lemmas.size() != points.size()) {
    throw std::invalid_argument("two-step clustering: " + std::to_string(lemmas.size()) +
                                " lemmas but " + std::to_string(points.size()) + " embeddings");
  }
  check_points(points);
  config.k_max = k_max;
  std::vector<std::string_view> order;
  std::unordered_map<std::string_view, std::vector<std::size_t>> by_lemma;
  for (std::size_t i = 0; i < lemmas.size(); ++i) {
    auto& bucket = by_lemma[lemmas[i]];
    if (bucket.empty()) order.push_back(lemmas[i]);
    bucket.push_back(i);
  }
  StepOne out;
  out.labels.assign(points.size(), -1);
  for (std::string_view lemma : order) {
    const auto& idx = by_lemma[lemma];
    std::vector<EmbeddingVector> subset;
    subset.reserve(idx.size());
    for (std::size_t i : idx) subset.push_back(points[i]);
    // Keyed by lemma so the result does not depend on input order.
    XMeansConfig local = config;
    local.seed = derive_seed(config.seed, "xmeans/" + std::string(lemma));
    const Labels sub = xmeans(subset, local);
    const std::size_t base = out.groups.size();
    out.groups.resize(base + static_cast<std::size_t>(count_clusters(sub)));
    for (std::size_t j = 0; j < idx.size(); ++j) {
      out.groups[base + static_cast<std::size_t>(sub[j])].push_back(idx[j]);
      out.labels[idx[j]] = static_cast<int>(base) + sub[j];
    }
  }
  return out;
}

}  // namespace

TwoStepResult two_step_cluster(std::span<const std::string> lemmas,
                               std::span<const EmbeddingVector> points,
                               const TwoStepCalibration& calibration, XMeansConfig config) {
  if (calibration.k_max < 1) throw std::invalid_argument("two-step clustering: k_max < 1");
  auto step1 = per_lemma_xmeans(lemmas, points, calibration.k_max, config);
  Agglomerator agg(points, step1.groups);
  for (auto c = agg.closest(); c && c->linkage < calibration.second_stage_threshold;
       c = agg.closest()) {
    agg.merge_closest();
  }
  return {canonical_labels(step1.labels), agg.labels(), agg.trace()};
}

TwoStepCalibration calibrate_two_step(std::span<const std::string> lemmas,
                                      std::span<const EmbeddingVector> points,
                                      std::span<const std::string> gold_frames,
                                      XMeansConfig config, LemmaCriterion criterion) {
  if (gold_frames.size() != lemmas.size()) {
    throw std::invalid_argument("two-step calibration: gold frame and lemma counts differ");
  }
  TwoStepCalibration calib;
  calib.criterion = criterion;

  std::unordered_map<std::string_view, std::unordered_map<std::string_view, int>> frames_of;
  std::unordered_map<std::string_view, int> frame_id;
  Labels gold(gold_frames.size());
  for (std::size_t i = 0; i < gold_frames.size(); ++i) {
    frames_of[lemmas[i]].emplace(gold_frames[i], 0);
    gold[i] = frame_id.emplace(gold_frames[i], static_cast<int>(frame_id.size())).first->second;
  }
  for (const auto& [lemma, frames] : frames_of) {
    calib.k_max = std::max(calib.k_max, frames.size());
  }
  calib.target_same_lemma_proportion = lemma_statistic(criterion, gold, lemmas);

  auto step1 = per_lemma_xmeans(lemmas, points, calib.k_max, config);
  if (reaches(criterion, lemma_statistic(criterion, step1.labels, lemmas),
              calib.target_same_lemma_proportion)) {
    return calib;
  }
  Agglomerator agg(points, step1.groups);
  while (agg.n_clusters() > 1) {
    const auto step = agg.merge_closest();
    calib.second_stage_threshold = just_above(step.linkage);
    if (reaches(criterion, lemma_statistic(criterion, agg.labels(), lemmas),
                calib.target_same_lemma_proportion)) {
      break;
    }
  }
  return calib;
}

nlohmann::ordered_json to_json(const OneStepCalibration& c) {
  return {{"threshold", c.threshold}, {"dev_frame_count", c.dev_frame_count}};
}

nlohmann::ordered_json to_json(const TwoStepCalibration& c) {
  return {{"k_max", c.k_max},
          {"target_same_lemma_proportion", c.target_same_lemma_proportion},
          {"second_stage_threshold", c.second_stage_threshold},
          {"criterion", c.criterion == LemmaCriterion::share ? "share" : "proportion"}};
}

}  // namespace frameind
