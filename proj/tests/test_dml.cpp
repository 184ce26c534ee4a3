// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <set>

#include "doctest.h"
#include "frameind/dml.hpp"
#include "frameind/errors.hpp"
#include "frameind/rng.hpp"
#include "frameind/synthetic.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace frameind;

namespace {

std::vector<double> random_vector(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  for (double& x : v) x = rng.normal();
  return v;
}

LabeledEmbeddings labeled(const SyntheticCorpus& corpus, std::size_t begin, std::size_t end) {
  LabeledEmbeddings out;
  for (std::size_t i = begin; i < end; ++i) {
    out.vectors.push_back(normalize(corpus.embeddings[i]));
    out.frames.push_back(*corpus.dataset[i].gold_frame);
  }
  return out;
}

}  // namespace

TEST_CASE("head shape and identity start") {
  CHECK_THROWS_AS(ProjectionHead(4, 0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(ProjectionHead(4, 5, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(ProjectionHead(4, 2, 0.0), std::invalid_argument);

  const auto head = ProjectionHead::lora_init(6, 2, 4.0, 11);
  CHECK(head.parameters().size() == 24);
  CHECK(head.scale() == 2.0);
  bool nonzero_a = false;
  for (double v : head.a()) nonzero_a |= v != 0.0;
  CHECK(nonzero_a);
  for (double v : head.b()) CHECK(v == 0.0);

  Rng rng(1);
  const auto x = random_vector(rng, 6);
  const auto y = head.apply(x);
  for (std::size_t i = 0; i < 6; ++i) CHECK(y[i] == doctest::Approx(x[i]));
}

// The oracle normalizes its output; apply does not.
TEST_CASE("apply matches the longhand formula") {
  Rng rng(2);
  ProjectionHead head(5, 3, 6.0);
  for (double& p : head.parameters()) p = rng.normal();
  const std::vector<double> params(head.parameters().begin(), head.parameters().end());
  for (int c = 0; c < 10; ++c) {
    const auto x = random_vector(rng, 5);
    const auto normalized = normalize(EmbeddingVector(head.apply(x)));
    const auto got = normalized.values();
    const auto want = oracle::head_forward(params, 5, 3, head.scale(), x);
    for (std::size_t i = 0; i < 5; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("checkpoint round trip") {
  fixtures::TempDir dir("dml");
  Rng rng(3);
  auto head = ProjectionHead::lora_init(7, 2, 16.0, 5);
  for (double& p : head.b()) p = rng.normal();
  head.save(dir / "head.bin", {{"round", 1}});
  const auto loaded = ProjectionHead::load(dir / "head.bin");
  CHECK(loaded.dim() == 7);
  CHECK(loaded.rank() == 2);
  CHECK(loaded.alpha() == 16.0);
  auto rounded = head;
  rounded.round_to_f32();
  for (std::size_t i = 0; i < head.parameters().size(); ++i) {
    CHECK(loaded.parameters()[i] == rounded.parameters()[i]);
  }
  const std::string bytes = fixtures::slurp(dir / "head.bin");
  CHECK(bytes.substr(0, bytes.find('\n')) == R"({"dim":7,"rank":2,"alpha":16.0,"round":1})");
  CHECK(bytes.size() == bytes.find('\n') + 1 + 4 * 28);

  {
    std::ofstream out(dir / "short.bin", std::ios::binary);
    out << bytes.substr(0, bytes.size() - 1);
  }
  CHECK_THROWS_AS(ProjectionHead::load(dir / "short.bin"), DataError);
  {
    std::ofstream out(dir / "bad.bin", std::ios::binary);
    out << "{\"dim\":7}\n";
  }
  CHECK_THROWS_AS(ProjectionHead::load(dir / "bad.bin"), DataError);
  CHECK_THROWS_AS(ProjectionHead::load(dir / "missing.bin"), DataError);
}

TEST_CASE("triplet loss") {
  const std::vector<double> a{1, 0};
  const std::vector<double> p{1, 0};
  const std::vector<double> n{0, 1};
  // D(a,p) = 0, D(a,n) = sqrt 2.
  CHECK(triplet_loss(a, p, n, 0.5) == 0.0);
  CHECK(triplet_loss(a, p, n, 2.0) == doctest::Approx(2.0 - std::sqrt(2.0)));
  CHECK(triplet_loss(a, n, p, 0.1) == doctest::Approx(std::sqrt(2.0) + 0.1));
  // Inputs are normalized first.
  CHECK(triplet_loss(std::vector<double>{3, 0}, p, std::vector<double>{0, 5}, 2.0) ==
        doctest::Approx(2.0 - std::sqrt(2.0)));
}

TEST_CASE("gradient matches central differences") {
  Rng rng(4);
  const std::size_t dim = 6;
  const std::size_t rank = 2;
  for (int c = 0; c < 10; ++c) {
    ProjectionHead head(dim, rank, 4.0);
    for (double& p : head.parameters()) p = 0.3 * rng.normal();
    std::vector<EmbeddingVector> inputs;
    for (int i = 0; i < 3; ++i) inputs.push_back(normalize(EmbeddingVector(random_vector(rng, dim))));
    const std::vector<Triplet> batch{{0, 1, 2}};
    const double margin = 1.5;
    const auto g = loss_gradient(head, inputs, batch, margin);
    const std::vector<double> params(head.parameters().begin(), head.parameters().end());
    const auto v = [&](int i) {
      const auto s = inputs[i].values();
      return std::vector<double>(s.begin(), s.end());
    };
    const auto want =
        oracle::numeric_gradient(params, dim, rank, head.scale(), v(0), v(1), v(2), margin);
    CHECK(g.mean_loss ==
          doctest::Approx(oracle::triplet_objective(params, dim, rank, head.scale(), v(0), v(1),
                                                    v(2), margin)));
    for (std::size_t i = 0; i < want.size(); ++i) {
      CHECK(g.values[i] == doctest::Approx(want[i]).epsilon(1e-5).scale(1e-6));
    }
  }
}

TEST_CASE("clamped triplets contribute nothing") {
  ProjectionHead head(2, 1, 1.0);
  const std::vector<EmbeddingVector> inputs{EmbeddingVector(std::vector<double>{1, 0}),
                                            EmbeddingVector(std::vector<double>{1, 0.01}),
                                            EmbeddingVector(std::vector<double>{-1, 0})};
  const std::vector<Triplet> batch{{0, 1, 2}};
  const auto g = loss_gradient(head, inputs, batch, 0.1);
  CHECK(g.mean_loss == 0.0);
  for (double v : g.values) CHECK(v == 0.0);
}

TEST_CASE("adamw") {
  OptimizerState state;
  std::vector<double> params{1.0, -2.0};
  const std::vector<double> grads{0.5, -0.25};
  adamw_step(state, params, grads, 0.1, 0.0);
  // First bias-corrected step moves each parameter by lr * sign(g).
  CHECK(params[0] == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(params[1] == doctest::Approx(-1.9).epsilon(1e-6));
  CHECK(state.step == 1);
  CHECK_THROWS_AS(adamw_step(state, params, std::vector<double>{1.0}, 0.1, 0.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(adamw_step(state, params, std::vector<double>{NAN, 0.0}, 0.1, 0.0),
                  std::invalid_argument);
}

TEST_CASE("triplet sampling") {
  const std::vector<int> frames{0, 0, 0, 1, 1, 2};
  const auto batches = sample_triplets(frames, 9, 2);
  // Five valid anchors (frame 2 is a singleton), batched by two.
  REQUIRE(batches.size() == 3);
  CHECK(batches[2].size() == 1);
  std::set<std::size_t> anchors;
  for (const auto& batch : batches) {
    for (const auto& t : batch) {
      anchors.insert(t.anchor);
      CHECK(t.positive != t.anchor);
      CHECK(frames[t.positive] == frames[t.anchor]);
      CHECK(frames[t.negative] != frames[t.anchor]);
    }
  }
  CHECK(anchors == std::set<std::size_t>{0, 1, 2, 3, 4});
  CHECK(sample_triplets(frames, 9, 2) == batches);
  CHECK(sample_triplets(frames, 10, 2) != batches);
  CHECK_THROWS_AS(sample_triplets(std::vector<int>{0, 0}, 1, 2), DataError);
  CHECK_THROWS_AS(sample_triplets(std::vector<int>{0, 1}, 1, 2), DataError);
  CHECK_THROWS_AS(sample_triplets(frames, 1, 0), std::invalid_argument);
}

TEST_CASE("grid") {
  TrainGrid grid;
  grid.base.rank = 4;
  const auto configs = grid.expand();
  REQUIRE(configs.size() == 12);
  std::set<std::pair<double, double>> seen;
  for (const auto& c : configs) {
    seen.emplace(c.margin, c.learning_rate);
    CHECK(c.rank == 4);
  }
  CHECK(seen.size() == 12);
}

TEST_CASE("training is deterministic and keeps the best grid point") {
  SyntheticSpec spec;
  spec.n_frames = 6;
  spec.lemmas_per_frame = 2;
  spec.instances_per_lemma = 6;
  spec.dim = 24;
  spec.nuisance_rank = 2;
  spec.noise_ratio = 0.1;
  spec.seed = 7;
  const auto corpus = make_synthetic_corpus(spec);
  const auto train = labeled(corpus, 0, 48);
  const auto dev = labeled(corpus, 48, corpus.dataset.size());

  TrainGrid grid;
  grid.margins = {0.2, 0.5};
  grid.learning_rates = {1e-3};
  grid.base.epochs = 3;
  grid.base.rank = 2;
  grid.base.seed = 3;
  const auto a = train_head(train, dev, grid);
  const auto b = train_head(train, dev, grid);
  REQUIRE(a.runs.size() == 2);
  CHECK(a.runs[0].epochs.size() == 3);
  for (std::size_t i = 0; i < a.head.parameters().size(); ++i) {
    CHECK(a.head.parameters()[i] == b.head.parameters()[i]);
  }
  for (const auto& run : a.runs) CHECK(run.dev_bcf <= a.runs[a.selected].dev_bcf);
  CHECK(a.baseline_dev_bcf == doctest::Approx(dev_bcubed_f(nullptr, dev)));
  const std::string log = training_log_jsonl(a, 0);
  CHECK(std::count(log.begin(), log.end(), '\n') >= 6);

  grid.margins.clear();
  CHECK_THROWS_AS(train_head(train, dev, grid), std::invalid_argument);
}
