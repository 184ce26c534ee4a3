// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#include "frameind/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "frameind/digest.hpp"
#include "frameind/errors.hpp"
#include "frameind/rng.hpp"
#include "frameind/text.hpp"

namespace frameind {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string stem_for(int round, std::uint64_t seed) {
  return "round" + std::to_string(round) + "-seed" + std::to_string(seed);
}

IclBudget make_budget(const PromptOptions& options) {
  IclBudget budget;
  budget.max_total_tokens = options.max_total_tokens;
  budget.max_demo_tokens = options.max_demo_tokens;
  if (!options.token_counter.empty()) {
    budget.counter = make_subprocess_token_counter(options.token_counter);
  }
  budget.validate();
  return budget;
}

std::size_t distinct_frames(const Dataset& part) {
  const auto frames = part.gold_frames();
  return std::set<std::string>(frames.begin(), frames.end()).size();
}

std::vector<EmbeddingVector> project(std::vector<EmbeddingVector> points,
                                     const ProjectionHead* head) {
  if (head == nullptr) return points;
  for (auto& p : points) p = normalize(head->apply(p));
  return points;
}

}  // namespace

// ---------------------------------------------------------------------------
// Prompts

std::vector<std::uint64_t> PromptOptions::run_seeds() const {
  if (shots == 0) return {demo_seed};
  std::vector<std::uint64_t> seeds;
  for (std::size_t j = 0; j < icl_runs; ++j) seeds.push_back(demo_seed + j);
  return seeds;
}

PromptTemplate PromptOptions::make_template() const {
  return PromptTemplate(language, framenet_token);
}

ordered_json PromptOptions::to_json() const {
  return {{"language", std::string(to_string(language))},
          {"framenet_token", framenet_token},
          {"variant", make_template().variant_name()},
          {"shots", shots},
          {"demo_seed", demo_seed},
          {"icl_runs", shots == 0 ? 1 : icl_runs},
          {"token_counter", token_counter},
          {"max_total_tokens", max_total_tokens},
          {"max_demo_tokens", max_demo_tokens}};
}

PromptPlan PromptPlan::build(const Dataset& dataset, const FoldAssignment* folds,
                             const PromptOptions& options) {
  const PromptTemplate tmpl = options.make_template();
  const IclBudget budget = make_budget(options);
  PromptPlan plan;
  plan.in_context_ = options.shots > 0;

  auto add = [&](const Instance& inst, int round, std::uint64_t seed,
                 std::span<const Demonstration> demos) {
    PlannedPrompt p;
    p.instance_id = inst.id;
    p.round = round;
    p.seed = seed;
    p.text = build_icl_prompt(demos, inst, tmpl, budget);
    p.digest = prompt_digest(p.text);
    plan.max_prompt_tokens = std::max(plan.max_prompt_tokens, budget.count(p.text));
    plan.index_.emplace(std::make_tuple(p.instance_id, round, seed), plan.prompts_.size());
    plan.prompts_.push_back(std::move(p));
  };

  if (!plan.in_context_) {
    for (const Instance& inst : dataset.instances()) add(inst, -1, options.demo_seed, {});
    return plan;
  }
  if (folds == nullptr) throw DataError("k-shot prompts need a fold assignment");
  if (options.icl_runs == 0) throw std::invalid_argument("icl_runs must be positive");
  for (int r = 0; r < folds->n_folds(); ++r) {
    const CvRound round = folds->round(dataset, r);
    for (std::uint64_t seed : options.run_seeds()) {
      const auto demos = sample_demonstrations(round.train, options.shots,
                                               derive_seed(seed, "round", static_cast<std::uint64_t>(r)),
                                               budget, tmpl);
      for (const auto& d : demos) {
        plan.max_demo_tokens =
            std::max(plan.max_demo_tokens, budget.count(render_demonstration(tmpl, d)));
      }
      for (const Instance& inst : dataset.instances()) add(inst, r, seed, demos);
    }
  }
  return plan;
}

const PlannedPrompt& PromptPlan::lookup(std::string_view instance_id, int round,
                                        std::uint64_t seed) const {
  auto key = std::make_tuple(std::string(instance_id), round, seed);
  if (!in_context_ && !prompts_.empty()) {
    std::get<1>(key) = -1;
    std::get<2>(key) = prompts_.front().seed;
  }
  const auto it = index_.find(key);
  if (it == index_.end()) {
    throw DataError("no prompt planned for instance " + std::string(instance_id) + " (round " +
                    std::to_string(round) + ", seed " + std::to_string(seed) + ")");
  }
  return prompts_[it->second];
}

void write_prompts_manifest(std::ostream& out, const PromptPlan& plan) {
  std::unordered_set<Digest, DigestHash> seen;
  for (const auto& p : plan.prompts()) {
    if (!seen.insert(p.digest).second) continue;
    out << ordered_json{{"instance_id", p.instance_id}, {"prompt", base64_encode(p.text)}}.dump()
        << '\n';
  }
}

std::vector<ManifestPrompt> read_prompts_manifest(std::istream& in) {
  std::vector<ManifestPrompt> prompts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      prompts.push_back({j.at("instance_id").get<std::string>(),
                         base64_decode(j.at("prompt").get<std::string>())});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, std::string("bad manifest line: ") + e.what());
    } catch (const std::invalid_argument& e) {
      throw ParseError(line_no, std::string("bad prompt encoding: ") + e.what());
    }
  }
  return prompts;
}

// ---------------------------------------------------------------------------
// Cache population

FetchReport populate_cache(const PromptPlan& plan, EmbeddingCache& cache,
                           const BackendConfig* backend) {
  FetchReport report;
  std::unordered_set<Digest, DigestHash> seen;
  std::vector<const PlannedPrompt*> missing;
  for (const auto& p : plan.prompts()) {
    if (!seen.insert(p.digest).second) continue;
    ++report.distinct;
    if (cache.contains(p.digest)) {
      ++report.cached;
    } else {
      missing.push_back(&p);
    }
  }
  if (missing.empty()) return report;
  if (backend == nullptr) {
    throw DataError("cache " + cache.path().string() + " lacks " +
                    std::to_string(missing.size()) + " of " + std::to_string(report.distinct) +
                    " prompts (first missing: instance " + missing.front()->instance_id + ")");
  }
  backend->validate();
  const std::size_t chunk = std::max<std::size_t>(1, backend->batch_size * backend->parallelism * 4);
  for (std::size_t begin = 0; begin < missing.size(); begin += chunk) {
    const std::size_t end = std::min(missing.size(), begin + chunk);
    std::vector<std::string> texts;
    for (std::size_t i = begin; i < end; ++i) texts.push_back(missing[i]->text);
    std::vector<EmbeddingVector> vectors;
    try {
      vectors = fetch_embeddings(*backend, texts);
    } catch (const BackendError& e) {
      std::optional<std::size_t> index;
      if (e.prompt_index()) index = begin + *e.prompt_index();
      throw BackendError(std::string(e.what()) + " (" + std::to_string(report.fetched) +
                             " new embeddings kept in cache)",
                         index);
    }
    for (std::size_t i = begin; i < end; ++i) {
      EmbeddingRecord record;
      record.instance_id = missing[i]->instance_id;
      record.model_id = cache.model_id();
      record.prompt_digest = missing[i]->digest;
      record.values = vectors[i - begin].to_f32();
      cache.put(record);
      ++report.fetched;
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Configuration

std::string_view to_string(ClusteringMode mode) {
  return mode == ClusteringMode::one_step ? "one-step" : "two-step";
}

ClusteringMode parse_mode(std::string_view text) {
  if (text == "one-step") return ClusteringMode::one_step;
  if (text == "two-step") return ClusteringMode::two_step;
  throw std::invalid_argument("unknown clustering mode: " + std::string(text));
}

ordered_json RunConfig::to_json() const {
  ordered_json j;
  j["config_name"] = config_name;
  j["dataset"] = dataset.string();
  if (folds.empty()) {
    j["folds"] = {{"n_folds", fold_options.n_folds},
                  {"seed", fold_options.seed},
                  {"balance_polysemy", fold_options.balance_polysemy},
                  {"policy", fold_options.policy == SplitPolicy::lemma ? "lemma" : "frame-disjoint"},
                  {"shared_frame_min_lemmas", fold_options.shared_frame_min_lemmas}};
  } else {
    j["folds"] = folds.string();
  }
  j["prompt"] = prompt.to_json();
  j["cache"] = cache.string();
  // Transport settings do not change any output; only the model does.
  j["model_id"] = backend ? ordered_json(backend->model_id) : ordered_json(nullptr);
  if (dml) {
    j["dml"] = {{"margins", grid.margins},
                {"learning_rates", grid.learning_rates},
                {"epochs", grid.base.epochs},
                {"batch_size", grid.base.batch_size},
                {"weight_decay", grid.base.weight_decay},
                {"rank", grid.base.rank},
                {"alpha", grid.base.alpha}};
  } else {
    j["dml"] = nullptr;
  }
  j["heads"] = heads.string();
  j["mode"] = std::string(to_string(mode));
  j["threshold_rule"] = threshold_rule == ThresholdRule::final_merge ? "final-merge" : "next-merge";
  j["lemma_criterion"] = lemma_criterion == LemmaCriterion::share ? "share" : "proportion";
  j["xmeans"] = {{"restarts", xmeans.restarts},
                 {"max_iterations", xmeans.max_iterations},
                 {"tolerance", xmeans.tolerance}};
  j["seed"] = seed;
  return j;
}

// ---------------------------------------------------------------------------
// Experiment

std::vector<EmbeddingVector> Experiment::embeddings(const Dataset& part, int round,
                                                    std::uint64_t seed) const {
  if (!cache) throw DataError("no embedding cache is open");
  std::vector<EmbeddingVector> out;
  out.reserve(part.size());
  for (const Instance& inst : part.instances()) {
    const PlannedPrompt& p = plan.lookup(inst.id, round, seed);
    const auto record = cache->get(cache->model_id(), p.digest);
    if (!record) {
      throw DataError("cache " + cache->path().string() + " has no embedding for instance " +
                      inst.id);
    }
    out.push_back(normalize(record->vector()));
  }
  return out;
}

Experiment load_experiment(const RunConfig& config, const fs::path& default_cache) {
  Experiment exp;
  exp.dataset = load_instances(config.dataset);
  if (config.folds.empty()) {
    exp.folds = make_folds(exp.dataset, config.fold_options);
  } else {
    if (!fs::exists(config.folds)) throw DataError("missing fold file " + config.folds.string());
    exp.folds = load_folds(config.folds);
  }
  exp.folds.check_covers(exp.dataset);
  exp.plan = PromptPlan::build(exp.dataset, &exp.folds, config.prompt);

  const fs::path path = config.cache.empty() ? default_cache : config.cache;
  if (path.empty()) throw DataError("no embedding cache path given");
  if (config.backend) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    exp.cache.emplace(EmbeddingCache::open(path, config.backend->model_id));
    exp.fetch = populate_cache(exp.plan, *exp.cache, &*config.backend);
  } else {
    if (!fs::exists(path)) throw DataError("missing embedding cache " + path.string());
    exp.cache.emplace(EmbeddingCache::open_existing(path));
    exp.fetch = populate_cache(exp.plan, *exp.cache, nullptr);
  }
  return exp;
}

// ---------------------------------------------------------------------------
// Stages

std::vector<std::string> train_heads(const Experiment& experiment, const RunConfig& config,
                                     const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<std::string> written;
  for (int r = 0; r < experiment.folds.n_folds(); ++r) {
    const CvRound round = experiment.folds.round(experiment.dataset, r);
    round.train.require_labels("head training");
    round.dev.require_labels("head selection");
    for (std::uint64_t s : config.prompt.run_seeds()) {
      LabeledEmbeddings train{experiment.embeddings(round.train, r, s), round.train.gold_frames()};
      LabeledEmbeddings dev{experiment.embeddings(round.dev, r, s), round.dev.gold_frames()};
      TrainGrid grid = config.grid;
      grid.base.seed = derive_seed(derive_seed(config.seed, "dml", static_cast<std::uint64_t>(r)),
                                   "dml/run", s);
      const TrainResult result = train_head(train, dev, grid);
      const GridRunLog& chosen = result.runs[result.selected];
      const std::string stem = stem_for(r, s);
      result.head.save(dir / (stem + ".bin"),
                       {{"round", r},
                        {"seed", s},
                        {"margin", chosen.config.margin},
                        {"learning_rate", chosen.config.learning_rate},
                        {"dev_bcf", chosen.dev_bcf},
                        {"baseline_dev_bcf", result.baseline_dev_bcf}});
      write_text_file(dir / (stem + ".log.jsonl"), training_log_jsonl(result, r));
      written.push_back(stem + ".bin");
      written.push_back(stem + ".log.jsonl");
    }
  }
  return written;
}

std::vector<std::string> cluster_rounds(const Experiment& experiment, const RunConfig& config,
                                        const fs::path& heads_dir, const fs::path& out) {
  const fs::path dir = out / "clusters";
  fs::create_directories(dir);
  const auto seeds = config.prompt.run_seeds();
  const bool two_step = config.mode == ClusteringMode::two_step;
  std::vector<std::string> written;
  ordered_json entries = ordered_json::array();

  for (int r = 0; r < experiment.folds.n_folds(); ++r) {
    const CvRound round = experiment.folds.round(experiment.dataset, r);
    if (!round.dev.fully_labeled()) {
      throw DataError(std::string(two_step ? "two-step" : "one-step") +
                      " calibration needs gold frames on every dev instance (round " +
                      std::to_string(r) + ")");
    }
    for (std::uint64_t s : seeds) {
      const std::string stem = stem_for(r, s);
      std::optional<ProjectionHead> head;
      if (!heads_dir.empty()) {
        const fs::path head_path = heads_dir / (stem + ".bin");
        if (!fs::exists(head_path)) throw DataError("missing head checkpoint " + head_path.string());
        head = ProjectionHead::load(head_path);
      }
      const ProjectionHead* h = head ? &*head : nullptr;
      const auto dev = project(experiment.embeddings(round.dev, r, s), h);
      const auto test = project(experiment.embeddings(round.test, r, s), h);

      Labels labels;
      std::string trace;
      ordered_json calibration;
      if (two_step) {
        XMeansConfig xcfg = config.xmeans;
        xcfg.seed = derive_seed(derive_seed(config.seed, "xmeans", static_cast<std::uint64_t>(r)),
                                "xmeans/run", s);
        const auto cal = calibrate_two_step(round.dev.lemmas(), dev, round.dev.gold_frames(), xcfg,
                                            config.lemma_criterion);
        const auto result = two_step_cluster(round.test.lemmas(), test, cal, xcfg);
        labels = result.labels;
        trace = result.trace.to_jsonl();
        calibration = to_json(cal);
      } else {
        const auto cal = calibrate_one_step(dev, distinct_frames(round.dev), config.threshold_rule);
        const auto result = group_average_cluster(test, StopBelowThreshold{cal.threshold});
        labels = result.labels;
        trace = result.trace.to_jsonl();
        calibration = to_json(cal);
      }
      const ClusterAssignment assignment(round.test.ids(), labels);
      write_text_file(dir / (stem + ".assignment.jsonl"), assignment.to_jsonl());
      write_text_file(dir / (stem + ".trace.jsonl"), trace);
      write_text_file(dir / (stem + ".calibration.json"), calibration.dump(2) + "\n");
      for (const char* suffix : {".assignment.jsonl", ".trace.jsonl", ".calibration.json"}) {
        written.push_back("clusters/" + stem + suffix);
      }
      entries.push_back({{"round", r},
                         {"seed", s},
                         {"assignment", stem + ".assignment.jsonl"},
                         {"clusters", assignment.n_clusters()}});
    }
  }

  ordered_json index;
  index["meta"] = {{"config_name", config.config_name},
                   {"model_id", experiment.cache ? experiment.cache->model_id() : std::string()},
                   {"prompt_variant", config.prompt.make_template().variant_name()},
                   {"shots", config.prompt.shots},
                   {"mode", std::string(to_string(config.mode))},
                   {"seeds", seeds},
                   {"n_folds", experiment.folds.n_folds()}};
  index["entries"] = std::move(entries);
  write_text_file(dir / "index.json", index.dump(2) + "\n");
  written.push_back("clusters/index.json");
  return written;
}

CVResult evaluate_assignments(const Dataset& dataset, const FoldAssignment& folds,
                              const fs::path& clusters_dir) {
  const fs::path index_path = clusters_dir / "index.json";
  if (!fs::exists(index_path)) throw DataError("missing cluster index " + index_path.string());
  ordered_json index;
  try {
    index = ordered_json::parse(read_text_file(index_path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad cluster index " + index_path.string() + ": " + e.what());
  }

  RunMetadata meta;
  std::map<std::pair<int, std::uint64_t>, std::string> files;
  try {
    const auto& m = index.at("meta");
    meta.config_name = m.at("config_name").get<std::string>();
    meta.model_id = m.at("model_id").get<std::string>();
    meta.prompt_variant = m.at("prompt_variant").get<std::string>();
    meta.shots = m.at("shots").get<int>();
    meta.mode = m.at("mode").get<std::string>();
    meta.seeds = m.at("seeds").get<std::vector<std::uint64_t>>();
    if (m.at("n_folds").get<int>() != folds.n_folds()) {
      throw DataError("cluster index was written for " + std::to_string(m.at("n_folds").get<int>()) +
                      " folds, fold file has " + std::to_string(folds.n_folds()));
    }
    for (const auto& e : index.at("entries")) {
      files[{e.at("round").get<int>(), e.at("seed").get<std::uint64_t>()}] =
          e.at("assignment").get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad cluster index " + index_path.string() + ": " + e.what());
  }

  auto runner = [&](const CvRound& round, std::uint64_t seed) {
    const auto it = files.find({round.index, seed});
    if (it == files.end()) {
      throw DataError("cluster index lists no assignment for seed " + std::to_string(seed));
    }
    const fs::path path = clusters_dir / it->second;
    if (!fs::exists(path)) throw DataError("missing assignment file " + path.string());
    return ClusterAssignment::from_jsonl(read_text_file(path));
  };
  return run_cv(dataset, folds, runner, std::move(meta));
}

std::vector<std::string> write_results(const CVResult& result, const fs::path& out) {
  fs::create_directories(out);
  write_text_file(out / "results.json", to_json(result).dump(2) + "\n");
  write_text_file(out / "report.txt", report_table(std::span<const CVResult>(&result, 1)));
  return {"results.json", "report.txt"};
}

// ---------------------------------------------------------------------------
// Manifest

RunManifest::RunManifest(std::string command, ordered_json config)
    : command_(std::move(command)), config_(std::move(config)) {}

void RunManifest::add_input(const std::string& role, const fs::path& path) {
  if (!fs::exists(path)) throw DataError("missing input " + path.string());
  inputs_[role] = {{"path", path.string()}, {"sha256", Digest::of_file(path).hex()}};
}

void RunManifest::add_seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }

void RunManifest::add_outputs(const fs::path& root, const std::vector<std::string>& relative) {
  for (const auto& rel : relative) outputs_[rel] = Digest::of_file(root / rel).hex();
}

ordered_json RunManifest::to_json() const {
  ordered_json j;
  j["tool"] = "frameind";
  j["command"] = command_;
  j["config"] = config_;
  j["config_hash"] = Digest::of(config_.dump()).hex();
  j["seeds"] = seeds_;
  j["inputs"] = inputs_;
  ordered_json outputs = ordered_json::object();
  for (const auto& [path, digest] : outputs_) outputs[path] = digest;
  j["outputs"] = std::move(outputs);
  return j;
}

void RunManifest::write(const fs::path& path) const {
  write_text_file(path, to_json().dump(2) + "\n");
}

void write_text_file(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace frameind
