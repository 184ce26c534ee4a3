// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "frameind/corpus.hpp"
#include "frameind/errors.hpp"
#include "frameind/synthetic.hpp"
#include "support/oracles.hpp"

using namespace frameind;

namespace {

const char* kTwoRecords =
    R"({"id":"a","lemma":"lose","sentence":"He lost the gold medal by just .02 points.","target_begin":3,"target_end":7,"gold_frame":"Finish_competition","language":"en"})"
    "\n\n"
    R"({"id":"b","lemma":"lose","sentence":"He lost his gold medal at the restaurant.","target_begin":3,"target_end":7,"gold_frame":"Losing","language":"en"})"
    "\n";

Dataset polysemous_corpus() {
  SyntheticSpec spec;
  spec.n_frames = 10;
  spec.lemmas_per_frame = 4;
  spec.instances_per_lemma = 3;
  spec.dim = 4;
  spec.nuisance_rank = 2;
  auto base = make_synthetic_corpus(spec).dataset;
  // Make a few lemmas polysemous by relabeling one instance each.
  std::vector<Instance> instances(base.instances().begin(), base.instances().end());
  for (std::size_t i = 0; i < instances.size(); i += 9) instances[i].gold_frame = "Frame_shared";
  return Dataset("poly", std::move(instances));
}

}  // namespace

TEST_CASE("instances parse, skipping blank lines") {
  std::istringstream in(kTwoRecords);
  const Dataset d = parse_instances(in, "lost");
  REQUIRE(d.size() == 2);
  CHECK(d[0].target_text() == "lost");
  CHECK(d[1].gold_frame == "Losing");
  CHECK(d.index_of("b") == 1u);
  CHECK(d.find("zzz") == nullptr);
  CHECK(d.fully_labeled());

  std::ostringstream out;
  write_instances(out, d);
  std::istringstream again(out.str());
  const Dataset e = parse_instances(again);
  CHECK(e.ids() == d.ids());
  CHECK(e[0].sentence == d[0].sentence);
}

TEST_CASE("Japanese spans count code points") {
  std::istringstream in(
      R"({"id":"j","lemma":"逃す","sentence":"彼は金メダルを逃した。","target_begin":7,"target_end":10,"gold_frame":null,"language":"ja"})");
  const Dataset d = parse_instances(in);
  CHECK(d[0].target_text() == "逃した");
  CHECK_FALSE(d[0].gold_frame.has_value());
  CHECK_FALSE(d.fully_labeled());
  CHECK_THROWS_AS(d.require_labels("evaluation"), DataError);
}

TEST_CASE("parse errors carry the line number") {
  auto line_of = [](const std::string& text) -> std::size_t {
    std::istringstream in(text);
    try {
      parse_instances(in);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  const std::string good =
      R"({"id":"a","lemma":"x","sentence":"abc","target_begin":0,"target_end":1,"gold_frame":null,"language":"en"})";
  CHECK(line_of(good + "\n{not json\n") == 2);
  CHECK(line_of(good + "\n\n" + good + "\n") == 3);  // duplicate id
  CHECK(line_of(R"({"id":"a","lemma":"x","sentence":"abc","target_begin":2,"target_end":9,"gold_frame":null,"language":"en"})") == 1);
  CHECK(line_of(R"({"id":"a","lemma":"x","sentence":"abc","target_begin":0,"target_end":1,"gold_frame":null,"language":"fr"})") == 1);
  CHECK(line_of(R"({"lemma":"x"})") == 1);
}

TEST_CASE("lemma folds keep every lemma in one fold and cover the dataset") {
  const Dataset d = polysemous_corpus();
  FoldOptions options;
  options.seed = 5;
  const FoldAssignment folds = make_folds(d, options);
  CHECK(folds.n_folds() == 3);
  CHECK_NOTHROW(folds.check_covers(d));
  std::map<std::string, std::set<int>> folds_of_lemma;
  std::vector<std::size_t> sizes(3);
  for (const auto& inst : d.instances()) {
    folds_of_lemma[inst.lemma].insert(folds.fold(inst.id));
    ++sizes[folds.fold(inst.id)];
  }
  for (const auto& [lemma, fs] : folds_of_lemma) CHECK(fs.size() == 1);
  for (std::size_t s : sizes) CHECK(s > 0);

  const FoldAssignment again = make_folds(d, options);
  CHECK(again.fold_of() == folds.fold_of());

  const RoundRoles roles = folds.roles(1);
  CHECK(roles.test == 1);
  CHECK(roles.dev == 2);
  CHECK(roles.train == std::vector<int>{0});
  const CvRound round = folds.round(d, 1);
  CHECK(round.train.size() + round.dev.size() + round.test.size() == d.size());

  const auto copy = FoldAssignment::from_json(nlohmann::json::parse(folds.to_json().dump()));
  CHECK(copy.fold_of() == folds.fold_of());
  CHECK(copy.seed() == folds.seed());
}

TEST_CASE("folds balance size and polysemy") {
  // 300 lemmas of 2 to 4 instances, 30% polysemous.
  std::vector<Instance> instances;
  for (int l = 0; l < 300; ++l) {
    const bool polysemous = l % 10 < 3;
    for (int i = 0; i < 2 + l % 3; ++i) {
      Instance inst;
      inst.id = "l" + std::to_string(l) + "-" + std::to_string(i);
      inst.lemma = "lemma" + std::to_string(l);
      inst.sentence = "x " + inst.lemma;
      inst.target = Span{2, inst.sentence.size()};
      inst.gold_frame = "F" + std::to_string(l % 40) + (polysemous && i == 0 ? "b" : "");
      instances.push_back(inst);
    }
  }
  const Dataset d("balance", instances);
  for (std::uint64_t seed : {0, 1, 2}) {
    FoldOptions options;
    options.seed = seed;
    const auto folds = make_folds(d, options);
    const auto stats = compute_stats(d, &folds);
    CHECK(stats.polysemy_rate == doctest::Approx(0.3));
    std::size_t smallest = d.size();
    std::size_t largest = 0;
    for (const auto& f : stats.folds) {
      CHECK(f.polysemy_rate >= 0.28);
      CHECK(f.polysemy_rate <= 0.32);
      smallest = std::min(smallest, f.n_instances);
      largest = std::max(largest, f.n_instances);
    }
    CHECK(static_cast<double>(largest) <= 1.1 * static_cast<double>(smallest));
  }

  std::vector<Instance> six;
  for (int l = 0; l < 6; ++l) {
    Instance inst;
    inst.id = "s" + std::to_string(l);
    inst.lemma = "v" + std::to_string(l);
    inst.sentence = "a " + inst.lemma;
    inst.target = Span{2, 4};
    six.push_back(inst);
  }
  const auto six_folds = make_folds(Dataset("six", six), FoldOptions{});
  for (int f = 0; f < 3; ++f) CHECK(six_folds.members(Dataset("six", six), f).size() == 2);

  CHECK_THROWS(make_folds(Dataset("one", {six[0]}), FoldOptions{}));
}

TEST_CASE("frame-disjoint folds keep small frames together") {
  const Dataset d = polysemous_corpus();
  FoldOptions options;
  options.policy = SplitPolicy::frame_disjoint;
  options.shared_frame_min_lemmas = 5;
  const FoldAssignment folds = make_folds(d, options);
  std::map<std::string, std::set<int>> folds_of_frame;
  std::map<std::string, std::set<std::string>> lemmas_of_frame;
  for (const auto& inst : d.instances()) {
    folds_of_frame[*inst.gold_frame].insert(folds.fold(inst.id));
    lemmas_of_frame[*inst.gold_frame].insert(inst.lemma);
  }
  for (const auto& [frame, fs] : folds_of_frame) {
    if (lemmas_of_frame[frame].size() < 5) CHECK(fs.size() == 1);
  }
}

TEST_CASE("fold coverage errors") {
  std::istringstream in(kTwoRecords);
  const Dataset d = parse_instances(in);
  const FoldAssignment partial(2, 0, {{"a", 0}});
  CHECK_THROWS_AS(partial.check_covers(d), DataError);
  CHECK_THROWS_AS(partial.fold("b"), DataError);
  CHECK_THROWS_AS(FoldAssignment(2, 0, {{"a", 3}}), DataError);
  // One lemma cannot fill three folds.
  CHECK_THROWS_AS(make_folds(d, FoldOptions{}), DataError);
}

TEST_CASE("statistics match set-difference counting") {
  const Dataset d = polysemous_corpus();
  const FoldAssignment folds = make_folds(d, FoldOptions{});
  const DatasetStats stats = compute_stats(d, &folds);
  CHECK(stats.n_instances == d.size());
  CHECK(stats.n_verbs == 40);
  CHECK(stats.n_frames == 11);
  std::map<std::string, std::set<std::string>> frames_of_lemma;
  for (const auto& inst : d.instances()) frames_of_lemma[inst.lemma].insert(*inst.gold_frame);
  std::size_t poly = 0;
  for (const auto& [l, f] : frames_of_lemma) poly += f.size() > 1;
  CHECK(stats.n_polysemous_verbs == poly);

  REQUIRE(stats.unseen.size() == 3);
  for (int r = 0; r < 3; ++r) {
    const CvRound round = folds.round(d, r);
    const auto want = oracle::unseen_frames(round.train.gold_frames(), round.test.gold_frames());
    CHECK(stats.unseen[r].unseen_frames == want);
  }
  const auto j = stats_to_json(stats);
  CHECK(j["folds"].size() == 3);
}
