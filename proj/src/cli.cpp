// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#include "frameind/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "frameind/errors.hpp"
#include "frameind/pipeline.hpp"
#include "frameind/rng.hpp"
#include "frameind/stub_server.hpp"
#include "frameind/synthetic.hpp"

namespace frameind {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string dataset;
  std::string folds;
  int n_folds = 3;
  std::string policy = "lemma";
  std::string language = "en";
  std::string framenet_token = "on";
  std::size_t shots = 0;
  std::uint64_t demo_seed = 0;
  std::size_t icl_runs = 4;
  std::string token_counter;
  std::string backend;
  std::string model = "default";
  std::size_t parallelism = 4;
  std::size_t batch_size = 16;
  int retries = 3;
  std::string cache;
  std::string heads;
  bool dml = false;
  std::vector<double> margins;
  std::vector<double> lrs;
  int epochs = 20;
  std::size_t rank = 8;
  double alpha = 32.0;
  std::string mode = "one-step";
  std::string threshold_rule = "final-merge";
  std::string lemma_criterion = "share";
  std::uint64_t seed = 0;
  std::string out = "out";
  std::string config_name = "run";
  std::string clusters;

  // synth
  SyntheticSpec synth;
  // serve-stub
  std::string table;
  int port = 8080;
  int latency_ms = 0;
};

void add_prompt_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--dataset", o.dataset, "Instance file (JSONL)")->required();
  cmd->add_option("--folds", o.folds, "Fold file; generated from --seed when absent");
  cmd->add_option("--n-folds", o.n_folds, "Folds to generate")->check(CLI::Range(2, 100));
  cmd->add_option("--split", o.policy, "Fold policy")
      ->check(CLI::IsMember({"lemma", "frame-disjoint"}));
  cmd->add_option("--language", o.language, "Prompt language")->check(CLI::IsMember({"en", "ja"}));
  cmd->add_option("--framenet-token", o.framenet_token, "Mention FrameNet in the prompt")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--shots", o.shots, "Demonstrations per prompt");
  cmd->add_option("--demo-seed", o.demo_seed, "First demonstration seed");
  cmd->add_option("--icl-runs", o.icl_runs, "Demonstration seeds per round")
      ->check(CLI::Range(1, 1000));
  cmd->add_option("--token-counter", o.token_counter,
                  "Token counter command (line protocol); default ceil(bytes/4)");
  cmd->add_option("--seed", o.seed, "Global seed");
  cmd->add_option("--out", o.out, "Output directory");
}

void add_backend_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--backend", o.backend, "Embedding endpoint URL");
  cmd->add_option("--model", o.model, "Model id sent to the backend and stored in the cache");
  cmd->add_option("--parallelism", o.parallelism, "Concurrent requests")->check(CLI::Range(1, 256));
  cmd->add_option("--batch-size", o.batch_size, "Prompts per request")->check(CLI::Range(1, 4096));
  cmd->add_option("--retries", o.retries, "Attempts per request")->check(CLI::Range(1, 100));
  cmd->add_option("--cache", o.cache, "Embedding cache file");
}

void add_dml_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--margin", o.margins, "Triplet margins to search");
  cmd->add_option("--lr", o.lrs, "Learning rates to search");
  cmd->add_option("--epochs", o.epochs, "Epochs per grid point")->check(CLI::Range(1, 100000));
  cmd->add_option("--rank", o.rank, "LoRA rank")->check(CLI::Range(1, 4096));
  cmd->add_option("--alpha", o.alpha, "LoRA alpha")->check(CLI::PositiveNumber);
}

void add_cluster_options(CLI::App* cmd, Options& o) {
  cmd->add_option("--mode", o.mode, "Clustering mode")
      ->check(CLI::IsMember({"one-step", "two-step"}));
  cmd->add_option("--threshold-rule", o.threshold_rule, "One-step threshold reading")
      ->check(CLI::IsMember({"final-merge", "next-merge"}));
  cmd->add_option("--lemma-criterion", o.lemma_criterion, "Two-step calibration criterion")
      ->check(CLI::IsMember({"share", "proportion"}));
  cmd->add_option("--config-name", o.config_name, "Row label in the report");
}

RunConfig make_config(const Options& o) {
  RunConfig c;
  c.config_name = o.config_name;
  c.dataset = o.dataset;
  c.folds = o.folds;
  c.fold_options.n_folds = o.n_folds;
  c.fold_options.seed = derive_seed(o.seed, "folds");
  c.fold_options.policy = o.policy == "lemma" ? SplitPolicy::lemma : SplitPolicy::frame_disjoint;
  c.prompt.language = parse_language(o.language);
  c.prompt.framenet_token = o.framenet_token == "on";
  if (c.prompt.language == Language::japanese && !c.prompt.framenet_token) {
    throw UsageError("--framenet-token off is only defined for --language en");
  }
  c.prompt.shots = o.shots;
  c.prompt.demo_seed = o.demo_seed;
  c.prompt.icl_runs = o.icl_runs;
  c.prompt.token_counter = o.token_counter;
  c.cache = o.cache;
  if (!o.backend.empty()) {
    BackendConfig b;
    b.endpoint = o.backend;
    b.model_id = o.model;
    b.parallelism = o.parallelism;
    b.batch_size = o.batch_size;
    b.retry.max_attempts = o.retries;
    try {
      b.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    c.backend = b;
  }
  c.dml = o.dml;
  if (!o.margins.empty()) c.grid.margins = o.margins;
  if (!o.lrs.empty()) c.grid.learning_rates = o.lrs;
  c.grid.base.epochs = o.epochs;
  c.grid.base.rank = o.rank;
  c.grid.base.alpha = o.alpha;
  c.heads = o.heads;
  c.mode = parse_mode(o.mode);
  c.threshold_rule =
      o.threshold_rule == "final-merge" ? ThresholdRule::final_merge : ThresholdRule::next_merge;
  c.lemma_criterion = o.lemma_criterion == "share" ? LemmaCriterion::share : LemmaCriterion::proportion;
  c.seed = o.seed;
  return c;
}

// Exactly one embedding source.
void require_one_source(const Options& o) {
  if (o.backend.empty() == o.cache.empty()) {
    throw UsageError("give exactly one of --backend or --cache");
  }
}

void report_fetch(std::ostream& err, const Experiment& exp) {
  err << "prompts: " << exp.fetch.distinct << " distinct, " << exp.fetch.cached << " cached, "
      << exp.fetch.fetched << " fetched\n";
}

void add_common_inputs(RunManifest& manifest, const RunConfig& config) {
  manifest.add_input("dataset", config.dataset);
  if (!config.folds.empty()) manifest.add_input("folds", config.folds);
  manifest.add_seed("seed", config.seed);
  manifest.add_seed("fold_seed", config.fold_options.seed);
  for (std::uint64_t s : config.prompt.run_seeds()) {
    manifest.add_seed("demo_seed/" + std::to_string(s), s);
  }
}

// Folds used by the run, saved next to the outputs so later stages can
// reuse them.
std::string save_run_folds(const Experiment& exp, const fs::path& out) {
  fs::create_directories(out);
  save_folds(out / "folds.json", exp.folds);
  return "folds.json";
}

int cmd_ingest(const Options& o, std::ostream& out) {
  const Dataset dataset = load_instances(o.dataset);
  const fs::path dir = o.out;
  fs::create_directories(dir);
  std::ostringstream canonical;
  write_instances(canonical, dataset);
  write_text_file(dir / "dataset.jsonl", canonical.str());
  std::vector<std::string> written{"dataset.jsonl"};

  std::optional<FoldAssignment> folds;
  if (o.n_folds > 0) {
    FoldOptions fo;
    fo.n_folds = o.n_folds;
    fo.seed = derive_seed(o.seed, "folds");
    fo.policy = o.policy == "lemma" ? SplitPolicy::lemma : SplitPolicy::frame_disjoint;
    folds = make_folds(dataset, fo);
    save_folds(dir / "folds.json", *folds);
    written.push_back("folds.json");
  }
  const auto stats = stats_to_json(compute_stats(dataset, folds ? &*folds : nullptr));
  write_text_file(dir / "stats.json", stats.dump(2) + "\n");
  written.push_back("stats.json");

  RunManifest manifest("ingest", {{"dataset", o.dataset}, {"n_folds", o.n_folds},
                                  {"split", o.policy}, {"seed", o.seed}});
  manifest.add_input("dataset", o.dataset);
  manifest.add_seed("seed", o.seed);
  manifest.add_outputs(dir, written);
  manifest.write(dir / "ingest.manifest.json");
  out << stats.dump(2) << '\n';
  return kExitOk;
}

int cmd_prompts(const Options& o, std::ostream& out, std::ostream& err) {
  const RunConfig config = make_config(o);
  const Dataset dataset = load_instances(config.dataset);
  const FoldAssignment folds =
      config.folds.empty() ? make_folds(dataset, config.fold_options) : load_folds(config.folds);
  folds.check_covers(dataset);
  const PromptPlan plan = PromptPlan::build(dataset, &folds, config.prompt);
  const fs::path dir = o.out;
  std::ostringstream manifest_text;
  write_prompts_manifest(manifest_text, plan);
  write_text_file(dir / "prompts.jsonl", manifest_text.str());
  std::vector<std::string> written{"prompts.jsonl"};
  if (config.folds.empty()) {
    save_folds(dir / "folds.json", folds);
    written.push_back("folds.json");
  }
  RunManifest manifest("prompts", config.to_json());
  add_common_inputs(manifest, config);
  manifest.add_outputs(dir, written);
  manifest.write(dir / "prompts.manifest.json");
  err << "largest prompt: " << plan.max_prompt_tokens << " tokens\n";
  out << (dir / "prompts.jsonl").string() << '\n';
  return kExitOk;
}

int cmd_embed(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.backend.empty()) throw UsageError("embed needs --backend");
  const RunConfig config = make_config(o);
  const fs::path dir = o.out;
  const fs::path default_cache = dir / "embeddings.cache";
  const Experiment exp = load_experiment(config, default_cache);
  report_fetch(err, exp);
  std::vector<std::string> written{save_run_folds(exp, dir)};
  RunManifest manifest("embed", config.to_json());
  add_common_inputs(manifest, config);
  if (config.cache.empty()) {
    written.push_back("embeddings.cache");
  } else {
    manifest.add_input("cache", config.cache);
  }
  manifest.add_outputs(dir, written);
  manifest.write(dir / "embed.manifest.json");
  out << exp.cache->path().string() << '\t' << exp.cache->size() << " records\n";
  return kExitOk;
}

int cmd_train(Options o, std::ostream& out, std::ostream& err) {
  require_one_source(o);
  o.dml = true;
  const RunConfig config = make_config(o);
  const fs::path dir = o.out;
  const Experiment exp = load_experiment(config, dir / "embeddings.cache");
  report_fetch(err, exp);
  std::vector<std::string> written{save_run_folds(exp, dir)};
  for (const auto& rel : train_heads(exp, config, dir / "heads")) written.push_back("heads/" + rel);
  RunManifest manifest("train", config.to_json());
  add_common_inputs(manifest, config);
  if (!config.cache.empty()) manifest.add_input("cache", config.cache);
  manifest.add_outputs(dir, written);
  manifest.write(dir / "train.manifest.json");
  out << (dir / "heads").string() << '\n';
  return kExitOk;
}

int cmd_cluster(const Options& o, std::ostream& out, std::ostream& err) {
  require_one_source(o);
  const RunConfig config = make_config(o);
  const fs::path dir = o.out;
  if (!config.heads.empty() && !fs::is_directory(config.heads)) {
    throw DataError("missing head directory " + config.heads.string());
  }
  const Experiment exp = load_experiment(config, dir / "embeddings.cache");
  report_fetch(err, exp);
  std::vector<std::string> written{save_run_folds(exp, dir)};
  for (const auto& rel : cluster_rounds(exp, config, config.heads, dir)) written.push_back(rel);
  RunManifest manifest("cluster", config.to_json());
  add_common_inputs(manifest, config);
  if (!config.cache.empty()) manifest.add_input("cache", config.cache);
  if (!config.heads.empty()) {
    for (const auto& entry : fs::directory_iterator(config.heads)) {
      if (entry.path().extension() == ".bin") {
        manifest.add_input("head/" + entry.path().filename().string(), entry.path());
      }
    }
  }
  manifest.add_outputs(dir, written);
  manifest.write(dir / "cluster.manifest.json");
  out << (dir / "clusters").string() << '\n';
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const fs::path dir = o.out;
  const fs::path clusters = o.clusters.empty() ? dir / "clusters" : fs::path(o.clusters);
  const fs::path folds_path =
      o.folds.empty() ? clusters.parent_path() / "folds.json" : fs::path(o.folds);
  if (!fs::exists(folds_path)) throw DataError("missing fold file " + folds_path.string());
  const Dataset dataset = load_instances(o.dataset);
  const FoldAssignment folds = load_folds(folds_path);
  const CVResult result = evaluate_assignments(dataset, folds, clusters);
  const auto written = write_results(result, dir);

  RunManifest manifest("eval", {{"dataset", o.dataset},
                                {"folds", folds_path.string()},
                                {"clusters", clusters.string()}});
  manifest.add_input("dataset", o.dataset);
  manifest.add_input("folds", folds_path);
  manifest.add_input("cluster_index", clusters / "index.json");
  manifest.add_outputs(dir, written);
  manifest.write(dir / "eval.manifest.json");
  out << report_table(std::span<const CVResult>(&result, 1));
  return kExitOk;
}

int cmd_pipeline(const Options& o, std::ostream& out, std::ostream& err) {
  require_one_source(o);
  const RunConfig config = make_config(o);
  const fs::path dir = o.out;
  const Experiment exp = load_experiment(config, dir / "embeddings.cache");
  report_fetch(err, exp);
  std::vector<std::string> written{save_run_folds(exp, dir)};
  if (config.cache.empty()) written.push_back("embeddings.cache");

  fs::path heads;
  if (config.dml) {
    heads = dir / "heads";
    err << "training heads\n";
    for (const auto& rel : train_heads(exp, config, heads)) written.push_back("heads/" + rel);
  } else if (!config.heads.empty()) {
    heads = config.heads;
  }
  err << "clustering (" << to_string(config.mode) << ")\n";
  for (const auto& rel : cluster_rounds(exp, config, heads, dir)) written.push_back(rel);
  const CVResult result = evaluate_assignments(exp.dataset, exp.folds, dir / "clusters");
  for (const auto& rel : write_results(result, dir)) written.push_back(rel);

  RunManifest manifest("pipeline", config.to_json());
  add_common_inputs(manifest, config);
  if (!config.cache.empty()) manifest.add_input("cache", config.cache);
  manifest.add_outputs(dir, written);
  manifest.write(dir / "manifest.json");
  out << report_table(std::span<const CVResult>(&result, 1));
  return kExitOk;
}

int cmd_synth(const Options& o, std::ostream& out) {
  SyntheticSpec spec = o.synth;
  spec.seed = o.seed;
  const SyntheticCorpus corpus = make_synthetic_corpus(spec);
  const fs::path dir = o.out;
  fs::create_directories(dir);
  std::ostringstream instances;
  write_instances(instances, corpus.dataset);
  write_text_file(dir / "dataset.jsonl", instances.str());
  write_embedding_table(dir / "embeddings.jsonl", corpus);
  out << corpus.dataset.size() << " instances, noise sigma " << corpus.noise_sigma << '\n';
  return kExitOk;
}

int cmd_serve_stub(const Options& o, std::ostream& out) {
  EmbeddingTable table;
  if (!o.table.empty()) table = EmbeddingTable::load(o.table);
  StubOptions options;
  options.latency = std::chrono::milliseconds(o.latency_ms);
  StubEmbeddingServer server(std::move(table), options);
  server.start(o.port);
  out << server.url() << std::endl;
  server.wait();
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Frame induction from frame-evoking-token embeddings", "frameind"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "frameind 0.1.0");
  Options o;

  auto* ingest = app.add_subcommand("ingest", "Validate instances, write stats and folds");
  ingest->add_option("--dataset", o.dataset, "Instance file (JSONL)")->required();
  ingest->add_option("--n-folds", o.n_folds, "Folds to emit (0: none)")->check(CLI::Range(0, 100));
  ingest->add_option("--split", o.policy, "Fold policy")
      ->check(CLI::IsMember({"lemma", "frame-disjoint"}));
  ingest->add_option("--seed", o.seed, "Global seed");
  ingest->add_option("--out", o.out, "Output directory");

  auto* prompts = app.add_subcommand("prompts", "Write the prompts manifest for external exporters");
  add_prompt_options(prompts, o);

  auto* embed = app.add_subcommand("embed", "Fetch missing embeddings into the cache");
  add_prompt_options(embed, o);
  add_backend_options(embed, o);

  auto* train = app.add_subcommand("train", "Train projection heads per round");
  add_prompt_options(train, o);
  add_backend_options(train, o);
  add_dml_options(train, o);

  auto* cluster = app.add_subcommand("cluster", "Calibrate on dev and cluster test per round");
  add_prompt_options(cluster, o);
  add_backend_options(cluster, o);
  add_cluster_options(cluster, o);
  cluster->add_option("--heads", o.heads, "Directory of trained heads");

  auto* eval = app.add_subcommand("eval", "Score cluster assignments against gold");
  eval->add_option("--dataset", o.dataset, "Instance file (JSONL)")->required();
  eval->add_option("--folds", o.folds, "Fold file; default <clusters>/../folds.json");
  eval->add_option("--clusters", o.clusters, "Cluster directory; default <out>/clusters");
  eval->add_option("--out", o.out, "Output directory");

  auto* pipeline = app.add_subcommand("pipeline", "Embed, train, cluster and evaluate");
  add_prompt_options(pipeline, o);
  add_backend_options(pipeline, o);
  add_dml_options(pipeline, o);
  add_cluster_options(pipeline, o);
  pipeline->add_flag("--dml", o.dml, "Train projection heads before clustering");
  pipeline->add_option("--heads", o.heads, "Directory of trained heads")->excludes("--dml");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic frame corpus");
  synth->add_option("--frames", o.synth.n_frames)->check(CLI::Range(1, 100000));
  synth->add_option("--lemmas-per-frame", o.synth.lemmas_per_frame)->check(CLI::Range(1, 100000));
  synth->add_option("--instances-per-lemma", o.synth.instances_per_lemma)
      ->check(CLI::Range(1, 100000));
  synth->add_option("--dim", o.synth.dim)->check(CLI::Range(1, 100000));
  synth->add_option("--noise", o.synth.noise_ratio, "Noise deviation / mean centroid distance")
      ->check(CLI::NonNegativeNumber);
  synth->add_option("--nuisance-rank", o.synth.nuisance_rank);
  synth->add_option("--nuisance-scale", o.synth.nuisance_scale)->check(CLI::NonNegativeNumber);
  synth->add_option("--seed", o.seed, "Generator seed");
  synth->add_option("--out", o.out, "Output directory");

  auto* serve = app.add_subcommand("serve-stub", "Serve a local embedding endpoint");
  serve->add_option("--table", o.table, "Embedding table (JSONL)");
  serve->add_option("--port", o.port, "Port (0: any free port)")->check(CLI::Range(0, 65535));
  serve->add_option("--latency-ms", o.latency_ms)->check(CLI::Range(0, 600000));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (ingest->parsed()) return cmd_ingest(o, out);
    if (prompts->parsed()) return cmd_prompts(o, out, err);
    if (embed->parsed()) return cmd_embed(o, out, err);
    if (train->parsed()) return cmd_train(o, out, err);
    if (cluster->parsed()) return cmd_cluster(o, out, err);
    if (eval->parsed()) return cmd_eval(o, out);
    if (pipeline->parsed()) return cmd_pipeline(o, out, err);
    if (synth->parsed()) return cmd_synth(o, out);
    if (serve->parsed()) return cmd_serve_stub(o, out);
  } catch (const UsageError& e) {
    err << "frameind: " << e.what() << "\nRun with --help for usage.\n";
    return kExitUsage;
  } catch (const BackendError& e) {
    err << "frameind: backend error: " << e.what() << '\n';
    return kExitBackend;
  } catch (const std::exception& e) {
    err << "frameind: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace frameind
