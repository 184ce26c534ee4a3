// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#include <sstream>

#include "doctest.h"
#include "frameind/cli.hpp"
#include "frameind/stub_server.hpp"
#include "frameind/synthetic.hpp"
#include "json.hpp"
#include "support/fixtures.hpp"

using namespace frameind;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::vector<const char*> argv{"frameind"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

SyntheticCorpus corpus() {
  SyntheticSpec spec;
  spec.n_frames = 4;
  spec.lemmas_per_frame = 3;
  spec.instances_per_lemma = 5;
  spec.dim = 16;
  spec.nuisance_rank = 2;
  return make_synthetic_corpus(spec);
}

}  // namespace

TEST_CASE("usage errors exit 1") {
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"frobnicate"}).code == kExitUsage);
  CHECK(run({"pipeline", "--dataset", "x.jsonl", "--shots", "two"}).code == kExitUsage);
  const auto both = run({"pipeline", "--dataset", "x.jsonl", "--cache", "c", "--backend", "http://h/x"});
  CHECK(both.code == kExitUsage);
  CHECK(both.err.find("exactly one") != std::string::npos);
  CHECK(run({"cluster", "--dataset", "x.jsonl"}).code == kExitUsage);
  CHECK(run({"pipeline", "--dataset", "x.jsonl", "--cache", "c", "--language", "ja",
             "--framenet-token", "off"})
            .code == kExitUsage);
  CHECK(run({"--help"}).code == kExitOk);
}

TEST_CASE("ingest writes stats and folds") {
  fixtures::TempDir dir("cli-ingest");
  const auto c = corpus();
  fixtures::write_dataset(dir / "in.jsonl", c.dataset);
  const auto r = run({"ingest", "--dataset", (dir / "in.jsonl").string(), "--n-folds", "3", "--out",
                      (dir / "out").string()});
  REQUIRE(r.code == kExitOk);
  const auto stats = nlohmann::json::parse(r.out);
  CHECK(stats["n_instances"] == 60);
  CHECK(stats["n_frames"] == 4);
  CHECK(stats["n_verbs"] == 12);
  CHECK(fixtures::slurp(dir / "out/dataset.jsonl") == fixtures::slurp(dir / "in.jsonl"));
  const auto folds = load_folds(dir / "out/folds.json");
  CHECK(folds.n_folds() == 3);
  CHECK_NOTHROW(folds.check_covers(c.dataset));
  const auto manifest = nlohmann::json::parse(fixtures::slurp(dir / "out/ingest.manifest.json"));
  CHECK(manifest["command"] == "ingest");
  CHECK(manifest["outputs"].contains("stats.json"));
}

TEST_CASE("bad input exits 2 naming the line") {
  fixtures::TempDir dir("cli-bad");
  {
    std::ofstream out(dir / "in.jsonl");
    out << R"({"id":"a","lemma":"run","sentence":"I run.","target_begin":2,"target_end":5,"gold_frame":null,"language":"en"})"
        << "\n{\"id\":\"b\"}\n";
  }
  const auto r = run({"ingest", "--dataset", (dir / "in.jsonl").string(), "--out", (dir / "out").string()});
  CHECK(r.code == kExitData);
  CHECK(r.err.find("line 2") != std::string::npos);

  const auto missing = run({"pipeline", "--dataset", (dir / "in.jsonl").string(), "--cache",
                            (dir / "nope.cache").string(), "--out", (dir / "o").string()});
  CHECK(missing.code == kExitData);
}

TEST_CASE("eval names a missing artifact") {
  fixtures::TempDir dir("cli-eval");
  const auto c = corpus();
  fixtures::write_dataset(dir / "in.jsonl", c.dataset);
  const auto r = run({"eval", "--dataset", (dir / "in.jsonl").string(), "--clusters",
                      (dir / "run/clusters").string(), "--out", (dir / "run").string()});
  CHECK(r.code == kExitData);
  CHECK(r.err.find("folds.json") != std::string::npos);
}

TEST_CASE("an unreachable backend exits 3") {
  fixtures::TempDir dir("cli-backend");
  const auto c = corpus();
  fixtures::write_dataset(dir / "in.jsonl", c.dataset);
  StubEmbeddingServer probe;
  probe.start();
  const std::string url = probe.url();
  probe.stop();
  const auto r = run({"embed", "--dataset", (dir / "in.jsonl").string(), "--backend", url,
                      "--retries", "1", "--cache", (dir / "c.cache").string()});
  CHECK(r.code == kExitBackend);
  CHECK(r.err.find("backend error") != std::string::npos);
}

TEST_CASE("pipeline then eval agree") {
  fixtures::TempDir dir("cli-pipeline");
  const auto c = corpus();
  fixtures::write_dataset(dir / "in.jsonl", c.dataset);
  StubEmbeddingServer server(fixtures::table_of(c));
  server.start();
  const auto p = run({"pipeline", "--dataset", (dir / "in.jsonl").string(), "--backend",
                      server.url(), "--out", (dir / "run").string()});
  REQUIRE(p.code == kExitOk);
  CHECK(p.out.find("1s-BcF") != std::string::npos);
  for (const char* f : {"folds.json", "embeddings.cache", "clusters/index.json", "results.json",
                        "report.txt", "manifest.json"}) {
    CHECK_MESSAGE(fs::exists(dir / "run" / f), f);
  }
  const auto e = run({"eval", "--dataset", (dir / "in.jsonl").string(), "--clusters",
                      (dir / "run/clusters").string(), "--out", (dir / "eval").string()});
  REQUIRE(e.code == kExitOk);
  CHECK(e.out == p.out);
  CHECK(fixtures::slurp(dir / "eval/results.json") == fixtures::slurp(dir / "run/results.json"));

  // The cache alone reproduces the run.
  const auto again = run({"pipeline", "--dataset", (dir / "in.jsonl").string(), "--cache",
                          (dir / "run/embeddings.cache").string(), "--out", (dir / "again").string()});
  REQUIRE(again.code == kExitOk);
  CHECK(again.out == p.out);
}
