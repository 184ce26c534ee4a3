// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#include "frameind/dml.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include "frameind/clustering.hpp"
#include "frameind/errors.hpp"
#include "frameind/eval.hpp"
#include "frameind/rng.hpp"

namespace frameind {

ProjectionHead::ProjectionHead(std::size_t dim, std::size_t rank, double alpha)
    : dim_(dim), rank_(rank), alpha_(alpha) {
  if (rank < 1 || rank > dim) {
    throw std::invalid_argument("projection head needs 1 <= rank <= dim, got rank " +
                                std::to_string(rank) + " for dim " + std::to_string(dim));
  }
  if (!(alpha > 0.0)) throw std::invalid_argument("projection head alpha must be positive");
  params_.assign(2 * rank * dim, 0.0);
}

ProjectionHead ProjectionHead::lora_init(std::size_t dim, std::size_t rank, double alpha,
                                         std::uint64_t seed) {
  ProjectionHead head(dim, rank, alpha);
  Rng rng(seed);
  for (double& v : head.a()) v = rng.normal(0.0, 0.02);
  return head;
}

std::vector<double> ProjectionHead::apply(std::span<const double> x) const {
  if (x.size() != dim_) {
    throw std::invalid_argument("projection head of dim " + std::to_string(dim_) +
                                " applied to a vector of dim " + std::to_string(x.size()));
  }
  const auto a_mat = a();
  const auto b_mat = b();
  std::vector<double> u(rank_, 0.0);
  for (std::size_t k = 0; k < rank_; ++k) u[k] = dot(a_mat.subspan(k * dim_, dim_), x);
  std::vector<double> out(x.begin(), x.end());
  const double s = scale();
  for (std::size_t i = 0; i < dim_; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < rank_; ++k) acc += b_mat[i * rank_ + k] * u[k];
    out[i] += s * acc;
  }
  return out;
}

EmbeddingVector ProjectionHead::apply(const EmbeddingVector& x) const {
  return EmbeddingVector(apply(x.values()));
}

void ProjectionHead::round_to_f32() {
  for (double& v : params_) v = static_cast<double>(static_cast<float>(v));
}

void ProjectionHead::save(const std::filesystem::path& path,
                          const nlohmann::ordered_json& extra) const {
  nlohmann::ordered_json header{{"dim", dim_}, {"rank", rank_}, {"alpha", alpha_}};
  if (extra.is_object()) {
    for (const auto& [key, value] : extra.items()) header[key] = value;
  }
  std::string payload;
  payload.reserve(params_.size() * 4);
  for (double v : params_) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int i = 0; i < 4; ++i) payload.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write head checkpoint " + path.string());
  out << header.dump() << '\n';
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw DataError("failed writing head checkpoint " + path.string());
}

ProjectionHead ProjectionHead::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open head checkpoint " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("head checkpoint " + path.string() + " is empty");
  ProjectionHead head;
  try {
    const auto header = nlohmann::json::parse(line);
    head = ProjectionHead(header.at("dim").get<std::size_t>(), header.at("rank").get<std::size_t>(),
                          header.at("alpha").get<double>());
  } catch (const std::exception& e) {
    throw DataError("head checkpoint " + path.string() + ": bad header: " + e.what());
  }
  std::string payload(head.params_.size() * 4, '\0');
  if (!in.read(payload.data(), static_cast<std::streamsize>(payload.size())) ||
      in.peek() != std::char_traits<char>::eof()) {
    throw DataError("head checkpoint " + path.string() + ": payload size does not match header");
  }
  for (std::size_t i = 0; i < head.params_.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 3; b >= 0; --b) bits = (bits << 8) | static_cast<unsigned char>(payload[4 * i + b]);
    head.params_[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return head;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> unit(std::span<const double> v) {
  const double n = std::sqrt(dot(v, v));
  if (n == 0.0) throw std::invalid_argument("cannot normalize a zero vector");
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

}  // namespace

double triplet_loss(std::span<const double> anchor, std::span<const double> positive,
                    std::span<const double> negative, double margin) {
  if (anchor.size() != positive.size() || anchor.size() != negative.size()) {
    throw std::invalid_argument("triplet_loss: dimension mismatch");
  }
  const auto a = unit(anchor);
  const auto p = unit(positive);
  const auto n = unit(negative);
  return std::max(distance(a, p) - distance(a, n) + margin, 0.0);
}

double triplet_loss(const EmbeddingVector& anchor, const EmbeddingVector& positive,
                    const EmbeddingVector& negative, double margin) {
  return triplet_loss(anchor.values(), positive.values(), negative.values(), margin);
}

HeadGradient loss_gradient(const ProjectionHead& head, std::span<const EmbeddingVector> inputs,
                           std::span<const Triplet> batch, double margin) {
  const std::size_t d = head.dim();
  const std::size_t r = head.rank();
  const double s = head.scale();
  const auto a_mat = head.a();
  const auto b_mat = head.b();
  HeadGradient grad;
  grad.values.assign(head.parameters().size(), 0.0);
  if (batch.empty()) return grad;
  double* g_a = grad.values.data();
  double* g_b = grad.values.data() + r * d;

  struct Forward {
    std::span<const double> x;
    std::vector<double> u;  // A x
    std::vector<double> h;  // head output
    std::vector<double> y;  // h / |h|
    double norm = 0.0;
  };
  auto forward = [&](std::size_t index) {
    if (index >= inputs.size()) throw std::invalid_argument("loss_gradient: triplet index out of range");
    Forward f;
    f.x = inputs[index].values();
    if (f.x.size() != d) throw std::invalid_argument("loss_gradient: input dimension mismatch");
    f.u.resize(r);
    for (std::size_t k = 0; k < r; ++k) f.u[k] = dot(a_mat.subspan(k * d, d), f.x);
    f.h.assign(f.x.begin(), f.x.end());
    for (std::size_t i = 0; i < d; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < r; ++k) acc += b_mat[i * r + k] * f.u[k];
      f.h[i] += s * acc;
    }
    f.norm = std::sqrt(dot(f.h, f.h));
    if (f.norm == 0.0) throw std::invalid_argument("loss_gradient: head output is zero");
    f.y = f.h;
    for (double& v : f.y) v /= f.norm;
    return f;
  };
  // Accumulates dL/dy of one input into the parameter gradient.
  auto backward = [&](const Forward& f, const std::vector<double>& g_y) {
    const double proj = dot(f.y, g_y);
    std::vector<double> g_h(d);
    for (std::size_t i = 0; i < d; ++i) g_h[i] = (g_y[i] - f.y[i] * proj) / f.norm;
    std::vector<double> bt_gh(r, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t k = 0; k < r; ++k) {
        g_b[i * r + k] += s * g_h[i] * f.u[k];
        bt_gh[k] += b_mat[i * r + k] * g_h[i];
      }
    }
    for (std::size_t k = 0; k < r; ++k) {
      const double c = s * bt_gh[k];
      if (c == 0.0) continue;
      for (std::size_t j = 0; j < d; ++j) g_a[k * d + j] += c * f.x[j];
    }
  };

  double loss_sum = 0.0;
  for (const auto& t : batch) {
    const Forward fa = forward(t.anchor);
    const Forward fp = forward(t.positive);
    const Forward fn = forward(t.negative);
    const double d_ap = distance(fa.y, fp.y);
    const double d_an = distance(fa.y, fn.y);
    const double loss = d_ap - d_an + margin;
    if (loss <= 0.0) continue;
    loss_sum += loss;
    // Unit difference vectors; a zero distance contributes no direction.
    std::vector<double> e_ap(d, 0.0);
    std::vector<double> e_an(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      if (d_ap > 0.0) e_ap[i] = (fa.y[i] - fp.y[i]) / d_ap;
      if (d_an > 0.0) e_an[i] = (fa.y[i] - fn.y[i]) / d_an;
    }
    std::vector<double> g(d);
    for (std::size_t i = 0; i < d; ++i) g[i] = e_ap[i] - e_an[i];
    backward(fa, g);
    for (std::size_t i = 0; i < d; ++i) g[i] = -e_ap[i];
    backward(fp, g);
    backward(fn, e_an);
  }
  const double n = static_cast<double>(batch.size());
  for (double& v : grad.values) v /= n;
  grad.mean_loss = loss_sum / n;
  return grad;
}

std::vector<std::vector<Triplet>> sample_triplets(std::span<const int> frame_of,
                                                  std::uint64_t epoch_seed,
                                                  std::size_t batch_size) {
  if (batch_size == 0) throw std::invalid_argument("sample_triplets: batch size 0");
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < frame_of.size(); ++i) members[frame_of[i]].push_back(i);
  std::vector<std::size_t> anchors;
  for (std::size_t i = 0; i < frame_of.size(); ++i) {
    if (members[frame_of[i]].size() >= 2) anchors.push_back(i);
  }
  if (members.size() < 2 || anchors.empty()) {
    throw DataError("no valid triplet: need a frame with two instances and another frame");
  }
  Rng rng(epoch_seed);
  rng.shuffle(anchors);

  std::vector<std::vector<Triplet>> batches;
  for (std::size_t start = 0; start < anchors.size(); start += batch_size) {
    std::vector<Triplet> batch;
    for (std::size_t j = start; j < std::min(anchors.size(), start + batch_size); ++j) {
      const std::size_t anchor = anchors[j];
      const auto& same = members[frame_of[anchor]];
      // Uniform over the frame minus the anchor.
      std::size_t pick = rng.uniform_index(same.size() - 1);
      if (same[pick] >= anchor) ++pick;
      std::size_t negative = 0;
      do {
        negative = rng.uniform_index(frame_of.size());
      } while (frame_of[negative] == frame_of[anchor]);
      batch.push_back(Triplet{anchor, same[pick], negative});
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

void adamw_step(OptimizerState& state, std::span<double> params, std::span<const double> grads,
                double lr, double weight_decay) {
  if (params.size() != grads.size()) throw std::invalid_argument("adamw_step: shape mismatch");
  for (double g : grads) {
    if (!std::isfinite(g)) throw std::invalid_argument("adamw_step: non-finite gradient");
  }
  if (state.first_moment.empty() && state.second_moment.empty()) {
    state.first_moment.assign(params.size(), 0.0);
    state.second_moment.assign(params.size(), 0.0);
  }
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw std::invalid_argument("adamw_step: optimizer state shape mismatch");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * grads[i];
    v = state.beta2 * v + (1.0 - state.beta2) * grads[i] * grads[i];
    const double m_hat = m / c1;
    const double v_hat = v / c2;
    params[i] -= lr * (m_hat / (std::sqrt(v_hat) + state.epsilon) + weight_decay * params[i]);
  }
}

// ---------------------------------------------------------------------------

std::vector<TrainConfig> TrainGrid::expand() const {
  std::vector<TrainConfig> out;
  for (double m : margins) {
    for (double lr : learning_rates) {
      TrainConfig c = base;
      c.margin = m;
      c.learning_rate = lr;
      out.push_back(c);
    }
  }
  return out;
}

namespace {

std::vector<int> frame_ids(std::span<const std::string> frames) {
  std::map<std::string_view, int> id;
  std::vector<int> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    out.push_back(id.emplace(f, static_cast<int>(id.size())).first->second);
  }
  return out;
}

void check_labeled(const LabeledEmbeddings& set, std::string_view what) {
  if (set.vectors.size() != set.frames.size()) {
    throw std::invalid_argument(std::string(what) + ": embedding and frame counts differ");
  }
  if (set.vectors.empty()) throw DataError(std::string(what) + " set is empty");
}

}  // namespace

double dev_bcubed_f(const ProjectionHead* head, const LabeledEmbeddings& dev) {
  check_labeled(dev, "dev");
  std::vector<EmbeddingVector> points;
  points.reserve(dev.vectors.size());
  for (const auto& v : dev.vectors) points.push_back(normalize(head ? head->apply(v) : v));
  const auto gold = frame_ids(dev.frames);
  const auto k = static_cast<std::size_t>(count_clusters(gold));
  const auto result = group_average_cluster(points, StopAtCount{k});
  return bcubed(result.labels, gold).bcf;
}

TrainResult train_head(const LabeledEmbeddings& train, const LabeledEmbeddings& dev,
                       const TrainGrid& grid) {
  const auto configs = grid.expand();
  if (configs.empty()) throw std::invalid_argument("train_head: empty hyperparameter grid");
  check_labeled(train, "train");
  check_labeled(dev, "dev");
  const std::size_t dim = train.vectors.front().dim();
  const auto frames = frame_ids(train.frames);

  TrainResult result;
  result.baseline_dev_bcf = dev_bcubed_f(nullptr, dev);
  double best = -1.0;
  for (const auto& config : configs) {
    if (config.epochs < 0) throw std::invalid_argument("train_head: negative epoch count");
    auto head = ProjectionHead::lora_init(dim, config.rank, config.alpha,
                                          derive_seed(config.seed, "dml/init"));
    OptimizerState state;
    GridRunLog log;
    log.config = config;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      const auto batches = sample_triplets(
          frames, derive_seed(config.seed, "dml/epoch", static_cast<std::uint64_t>(epoch)),
          config.batch_size);
      double loss_sum = 0.0;
      std::size_t triplets = 0;
      for (const auto& batch : batches) {
        const auto g = loss_gradient(head, train.vectors, batch, config.margin);
        adamw_step(state, head.parameters(), g.values, config.learning_rate, config.weight_decay);
        loss_sum += g.mean_loss * static_cast<double>(batch.size());
        triplets += batch.size();
      }
      log.epochs.push_back(EpochLog{epoch + 1, loss_sum / static_cast<double>(triplets),
                                    dev_bcubed_f(&head, dev)});
    }
    log.dev_bcf = log.epochs.empty() ? result.baseline_dev_bcf : log.epochs.back().dev_bcf;
    if (log.dev_bcf > best) {
      best = log.dev_bcf;
      result.selected = result.runs.size();
      result.head = head;
    }
    result.runs.push_back(std::move(log));
  }
  return result;
}

std::string training_log_jsonl(const TrainResult& result, int round) {
  std::string out;
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    const auto& run = result.runs[i];
    for (const auto& e : run.epochs) {
      out += nlohmann::ordered_json{{"round", round},
                                    {"run", i},
                                    {"margin", run.config.margin},
                                    {"lr", run.config.learning_rate},
                                    {"epoch", e.epoch},
                                    {"mean_loss", e.mean_loss},
                                    {"dev_bcf", e.dev_bcf}}
                 .dump();
      out += '\n';
    }
  }
  out += nlohmann::ordered_json{{"round", round},
                                {"selected", result.selected},
                                {"baseline_dev_bcf", result.baseline_dev_bcf},
                                {"selected_dev_bcf", result.runs.empty()
                                                         ? result.baseline_dev_bcf
                                                         : result.runs[result.selected].dev_bcf}}
             .dump();
  out += '\n';
  return out;
}

}  // namespace frameind
