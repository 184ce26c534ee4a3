// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#include "frameind/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <unordered_map>

#include "frameind/errors.hpp"

namespace frameind {

double harmonic_mean(double a, double b) {
  if (a <= 0.0 || b <= 0.0) return 0.0;
  return 2.0 * a * b / (a + b);
}

EvalReport bcubed(std::span<const int> pred, std::span<const int> gold) {
  if (pred.size() != gold.size()) {
    throw std::invalid_argument("bcubed: " + std::to_string(pred.size()) + " predictions for " +
                                std::to_string(gold.size()) + " gold labels");
  }
  EvalReport r;
  if (pred.empty()) return r;
  std::unordered_map<int, double> pred_size;
  std::unordered_map<int, double> gold_size;
  std::map<std::pair<int, int>, double> overlap;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    pred_size[pred[i]] += 1.0;
    gold_size[gold[i]] += 1.0;
    overlap[{pred[i], gold[i]}] += 1.0;
  }
  // Every item in a (pred, gold) cell shares the same per-item scores.
  for (const auto& [cell, n] : overlap) {
    r.bcp += n * n / pred_size[cell.first];
    r.bcr += n * n / gold_size[cell.second];
  }
  const double total = static_cast<double>(pred.size());
  r.bcp /= total;
  r.bcr /= total;
  r.bcf = harmonic_mean(r.bcp, r.bcr);
  return r;
}

EvalReport bcubed(const ClusterAssignment& pred, const ClusterAssignment& gold) {
  std::unordered_map<std::string_view, int> gold_of;
  for (std::size_t i = 0; i < gold.size(); ++i) gold_of.emplace(gold.ids()[i], gold.labels()[i]);
  if (gold_of.size() != pred.size()) {
    throw DataError("bcubed: prediction covers " + std::to_string(pred.size()) +
                    " instances, gold covers " + std::to_string(gold_of.size()));
  }
  std::vector<int> aligned(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    auto it = gold_of.find(pred.ids()[i]);
    if (it == gold_of.end()) {
      throw DataError("bcubed: instance '" + pred.ids()[i] + "' has no gold label");
    }
    aligned[i] = it->second;
  }
  return bcubed(pred.labels(), aligned);
}

EvalReport mean_report(std::span<const EvalReport> reports) {
  EvalReport m;
  if (reports.empty()) return m;
  for (const auto& r : reports) {
    m.bcp += r.bcp;
    m.bcr += r.bcr;
    m.bcf += r.bcf;
  }
  const double n = static_cast<double>(reports.size());
  m.bcp /= n;
  m.bcr /= n;
  m.bcf /= n;
  return m;
}

ClusterAssignment gold_assignment(const Dataset& dataset) {
  dataset.require_labels("gold assignment");
  std::unordered_map<std::string, int> frame_id;
  std::vector<int> labels;
  labels.reserve(dataset.size());
  for (const auto& f : dataset.gold_frames()) {
    labels.push_back(frame_id.emplace(f, static_cast<int>(frame_id.size())).first->second);
  }
  return ClusterAssignment(dataset.ids(), labels);
}

CVResult run_cv(const Dataset& dataset, const FoldAssignment& folds, const RoundRunner& runner,
                RunMetadata meta) {
  if (meta.seeds.empty()) throw std::invalid_argument("run_cv: no seeds");
  dataset.require_labels("cross-validation");
  folds.check_covers(dataset);

  CVResult result;
  result.meta = std::move(meta);
  std::vector<EvalReport> round_means;
  for (int r = 0; r < folds.n_folds(); ++r) {
    RoundResult round_result;
    round_result.round = r;
    try {
      const CvRound round = folds.round(dataset, r);
      const ClusterAssignment gold = gold_assignment(round.test);
      for (std::uint64_t seed : result.meta.seeds) {
        round_result.per_seed.push_back(bcubed(runner(round, seed), gold));
      }
    } catch (const BackendError& e) {
      throw BackendError("round " + std::to_string(r) + ": " + e.what(), e.prompt_index());
    } catch (const std::exception& e) {
      throw DataError("round " + std::to_string(r) + ": " + e.what());
    }
    round_result.mean = mean_report(round_result.per_seed);
    round_means.push_back(round_result.mean);
    result.rounds.push_back(std::move(round_result));
  }
  result.mean = mean_report(round_means);
  return result;
}

std::string format_score(double score) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.1f", score * 100.0);
  return buffer;
}

std::string report_table(std::span<const CVResult> results) {
  struct Row {
    const EvalReport* one = nullptr;
    const EvalReport* two = nullptr;
  };
  std::map<std::string, Row> rows;
  for (const auto& r : results) {
    auto& row = rows[r.meta.config_name];
    (r.meta.mode == "two-step" ? row.two : row.one) = &r.mean;
  }
  std::size_t width = 6;
  for (const auto& [name, row] : rows) width = std::max(width, name.size());

  auto pad = [](std::string s, std::size_t w, bool left) {
    if (s.size() >= w) return s;
    const std::string fill(w - s.size(), ' ');
    return left ? s + fill : fill + s;
  };
  const char* columns[] = {"1s-BcP", "1s-BcR", "1s-BcF", "2s-BcP", "2s-BcR", "2s-BcF"};
  std::string out = pad("config", width, true);
  for (const char* c : columns) out += "  " + pad(c, 6, false);
  out += '\n';
  for (const auto& [name, row] : rows) {
    out += pad(name, width, true);
    for (const EvalReport* report : {row.one, row.two}) {
      if (report == nullptr) {
        for (int i = 0; i < 3; ++i) out += "  " + pad("-", 6, false);
        continue;
      }
      for (double v : {report->bcp, report->bcr, report->bcf}) {
        out += "  " + pad(format_score(v), 6, false);
      }
    }
    out += '\n';
  }
  return out;
}

nlohmann::ordered_json to_json(const EvalReport& r) {
  return {{"bcp", r.bcp}, {"bcr", r.bcr}, {"bcf", r.bcf}};
}

nlohmann::ordered_json to_json(const CVResult& r) {
  nlohmann::ordered_json rounds = nlohmann::ordered_json::array();
  for (const auto& round : r.rounds) {
    nlohmann::ordered_json per_seed = nlohmann::ordered_json::array();
    for (const auto& s : round.per_seed) per_seed.push_back(to_json(s));
    rounds.push_back({{"round", round.round}, {"per_seed", per_seed}, {"mean", to_json(round.mean)}});
  }
  return {{"meta",
           {{"config_name", r.meta.config_name},
            {"model_id", r.meta.model_id},
            {"prompt_variant", r.meta.prompt_variant},
            {"shots", r.meta.shots},
            {"mode", r.meta.mode},
            {"seeds", r.meta.seeds}}},
          {"rounds", rounds},
          {"mean", to_json(r.mean)}};
}

}  // namespace frameind
