// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#include "frameind/stub_server.hpp"

#include <cstring>
#include <fstream>
#include <thread>

#include "frameind/digest.hpp"
#include "frameind/errors.hpp"
#include "frameind/rng.hpp"
#include "httplib.h"
#include "json.hpp"

namespace frameind {

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding table " + path.string());
  EmbeddingTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      table.sentences.push_back(j.at("sentence").get<std::string>());
      table.vectors.push_back(j.at("embedding").get<std::vector<double>>());
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line_no, std::string("bad embedding table row: ") + e.what());
    }
    if (table.vectors.back().size() != table.vectors.front().size()) {
      throw ParseError(line_no, "embedding table rows differ in dimension");
    }
  }
  return table;
}

struct StubEmbeddingServer::Impl {
  EmbeddingTable table;
  StubOptions options;
  httplib::Server server;
  std::thread thread;
  std::atomic<int> failures_left{0};
};

StubEmbeddingServer::StubEmbeddingServer(EmbeddingTable table, StubOptions options)
    : impl_(std::make_unique<Impl>()) {
  impl_->table = std::move(table);
  impl_->options = std::move(options);
  impl_->failures_left = impl_->options.fail_first;
}

StubEmbeddingServer::~StubEmbeddingServer() { stop(); }

std::string StubEmbeddingServer::url() const {
  return "http://127.0.0.1:" + std::to_string(port_) + "/v1/embeddings";
}

void StubEmbeddingServer::reset_counters() {
  requests_ = 0;
  prompts_ = 0;
  max_in_flight_ = 0;
  impl_->failures_left = impl_->options.fail_first;
}

std::vector<double> StubEmbeddingServer::embed(const std::string& prompt) const {
  const auto cut = prompt.rfind('\n');
  const std::string_view last =
      cut == std::string::npos ? std::string_view(prompt) : std::string_view(prompt).substr(cut + 1);
  const auto& table = impl_->table;
  std::vector<double> out;
  std::size_t best_len = 0;
  for (std::size_t i = 0; i < table.sentences.size(); ++i) {
    const auto& s = table.sentences[i];
    if (s.size() > best_len && last.find(s) != std::string_view::npos) {
      best_len = s.size();
      out = table.vectors[i];
    }
  }
  if (best_len == 0) {
    const std::size_t dim =
        table.vectors.empty() ? impl_->options.fallback_dim : table.vectors.front().size();
    const auto digest = Digest::of(last);
    std::uint64_t seed = 0;
    std::memcpy(&seed, digest.bytes().data(), sizeof seed);
    Rng rng(seed);
    out.resize(dim);
    for (double& x : out) x = rng.normal();
  }
  if (impl_->options.wrong_dim_marker &&
      prompt.find(*impl_->options.wrong_dim_marker) != std::string::npos) {
    out.push_back(0.5);
  }
  return out;
}

void StubEmbeddingServer::start(int port) {
  auto& server = impl_->server;
  server.new_task_queue = [] { return new httplib::ThreadPool(32); };
  server.Post("/v1/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
    const std::size_t now = ++in_flight_;
    std::size_t seen = max_in_flight_.load();
    while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
    }
    ++requests_;
    const auto& options = impl_->options;
    if (options.latency.count() > 0) std::this_thread::sleep_for(options.latency);
    auto finish = [this] { --in_flight_; };

    if (impl_->failures_left.fetch_sub(1) > 0) {
      res.status = options.fail_status;
      res.set_content(R"({"error":"injected failure"})", "application/json");
      finish();
      return;
    }
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception&) {
      res.status = 400;
      finish();
      return;
    }
    std::vector<std::string> inputs;
    if (body.contains("input") && body["input"].is_array()) {
      inputs = body["input"].get<std::vector<std::string>>();
    } else if (body.contains("input") && body["input"].is_string()) {
      inputs.push_back(body["input"].get<std::string>());
    } else {
      res.status = 400;
      finish();
      return;
    }
    prompts_ += inputs.size();
    if (options.fail_marker) {
      for (const auto& p : inputs) {
        if (p.find(*options.fail_marker) != std::string::npos) {
          res.status = 500;
          finish();
          return;
        }
      }
    }
    nlohmann::json reply;
    if (options.embeddings_format) {
      reply["embeddings"] = nlohmann::json::array();
      for (const auto& p : inputs) reply["embeddings"].push_back(embed(p));
    } else {
      reply["data"] = nlohmann::json::array();
      for (std::size_t i = 0; i < inputs.size(); ++i) {
        const std::size_t k = options.reverse_data ? inputs.size() - 1 - i : i;
        reply["data"].push_back({{"index", k}, {"embedding", embed(inputs[k])}});
      }
    }
    res.set_content(reply.dump(), "application/json");
    finish();
  });

  port_ = port == 0 ? server.bind_to_any_port("127.0.0.1")
                    : (server.bind_to_port("127.0.0.1", port) ? port : -1);
  if (port_ <= 0) throw std::runtime_error("stub backend: cannot bind 127.0.0.1:" + std::to_string(port));
  impl_->thread = std::thread([&server] { server.listen_after_bind(); });
  server.wait_until_ready();
}

void StubEmbeddingServer::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

void StubEmbeddingServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace frameind
