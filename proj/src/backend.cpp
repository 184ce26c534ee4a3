// Copyright 2026 The frameind Authors
// SPDX-License-Identifier: Apache-2.0

#include "frameind/backend.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "frameind/errors.hpp"
#include "httplib.h"
#include "json.hpp"

namespace frameind {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw std::invalid_argument("backend endpoint '" + url + "' lacks a scheme");
  }
  // The client is built without TLS.
  if (url.compare(0, scheme_end, "http") != 0) {
    throw std::invalid_argument("backend endpoint '" + url + "' is not http");
  }
  const auto path_begin = url.find('/', scheme_end + 3);
  if (path_begin == std::string::npos) return {url, "/"};
  return {url.substr(0, path_begin), url.substr(path_begin)};
}

enum class Outcome { ok, retry, fail };

struct Attempt {
  Outcome outcome = Outcome::fail;
  std::string error;
  std::vector<EmbeddingVector> vectors;
};

std::vector<EmbeddingVector> parse_response(const std::string& body, std::size_t expected) {
  const auto j = nlohmann::json::parse(body);
  std::vector<std::vector<double>> raw(expected);
  if (j.contains("data")) {
    const auto& data = j.at("data");
    if (!data.is_array() || data.size() != expected) {
      throw std::invalid_argument("expected " + std::to_string(expected) + " embeddings, got " +
                                  std::to_string(data.is_array() ? data.size() : 0));
    }
    std::vector<bool> filled(expected, false);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const std::size_t slot = data[i].contains("index") ? data[i].at("index").get<std::size_t>() : i;
      if (slot >= expected || filled[slot]) throw std::invalid_argument("bad embedding index");
      filled[slot] = true;
      raw[slot] = data[i].at("embedding").get<std::vector<double>>();
    }
  } else if (j.contains("embeddings")) {
    const auto& data = j.at("embeddings");
    if (!data.is_array() || data.size() != expected) {
      throw std::invalid_argument("expected " + std::to_string(expected) + " embeddings, got " +
                                  std::to_string(data.is_array() ? data.size() : 0));
    }
    for (std::size_t i = 0; i < expected; ++i) raw[i] = data[i].get<std::vector<double>>();
  } else {
    throw std::invalid_argument("response has neither 'data' nor 'embeddings'");
  }
  std::vector<EmbeddingVector> out;
  out.reserve(expected);
  for (auto& v : raw) out.emplace_back(std::move(v));
  return out;
}

Attempt post_once(httplib::Client& client, const std::string& path, const std::string& body,
                  std::size_t expected) {
  Attempt attempt;
  auto res = client.Post(path, body, "application/json");
  if (!res) {
    attempt.outcome = Outcome::retry;
    attempt.error = "transport error: " + httplib::to_string(res.error());
    return attempt;
  }
  if (res->status != 200) {
    const bool transient = res->status == 408 || res->status == 429 || res->status >= 500;
    attempt.outcome = transient ? Outcome::retry : Outcome::fail;
    attempt.error = "HTTP " + std::to_string(res->status);
    return attempt;
  }
  try {
    attempt.vectors = parse_response(res->body, expected);
    attempt.outcome = Outcome::ok;
  } catch (const std::exception& e) {
    attempt.outcome = Outcome::fail;
    attempt.error = std::string("malformed response: ") + e.what();
  }
  return attempt;
}

}  // namespace

void BackendConfig::validate() const {
  if (endpoint.empty()) throw std::invalid_argument("backend endpoint is empty");
  split_endpoint(endpoint);
  if (model_id.empty()) throw std::invalid_argument("backend model id is empty");
  if (parallelism < 1) throw std::invalid_argument("backend parallelism must be at least 1");
  if (batch_size < 1) throw std::invalid_argument("backend batch size must be at least 1");
  if (retry.max_attempts < 1) throw std::invalid_argument("retry max_attempts must be at least 1");
}

std::vector<EmbeddingVector> fetch_embeddings(const BackendConfig& backend,
                                              std::span<const std::string> prompts) {
  backend.validate();
  if (prompts.empty()) return {};

  // Identical prompt bytes are fetched once and fanned back out.
  std::vector<std::size_t> unique_of(prompts.size());
  std::vector<std::size_t> first_index;  // per unique prompt, its first input index
  {
    std::unordered_map<std::string_view, std::size_t> seen;
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      auto [it, fresh] = seen.emplace(prompts[i], first_index.size());
      if (fresh) first_index.push_back(i);
      unique_of[i] = it->second;
    }
  }

  const std::size_t n_unique = first_index.size();
  const std::size_t n_batches = (n_unique + backend.batch_size - 1) / backend.batch_size;
  const auto endpoint = split_endpoint(backend.endpoint);
  std::vector<std::vector<EmbeddingVector>> results(n_batches);

  std::atomic<std::size_t> next_batch{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  std::optional<std::size_t> error_batch;
  std::string error_text;

  auto worker = [&] {
    httplib::Client client(endpoint.origin);
    const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(backend.timeout);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    client.set_keep_alive(true);
    while (!failed.load()) {
      const std::size_t b = next_batch.fetch_add(1);
      if (b >= n_batches) return;
      const std::size_t lo = b * backend.batch_size;
      const std::size_t hi = std::min(n_unique, lo + backend.batch_size);
      nlohmann::json body;
      body["model"] = backend.model_id;
      body["input"] = nlohmann::json::array();
      for (std::size_t u = lo; u < hi; ++u) body["input"].push_back(prompts[first_index[u]]);
      const std::string payload = body.dump();

      Attempt attempt;
      auto backoff = std::chrono::duration<double, std::milli>(backend.retry.initial_backoff);
      for (int k = 1; k <= backend.retry.max_attempts; ++k) {
        attempt = post_once(client, endpoint.path, payload, hi - lo);
        if (attempt.outcome != Outcome::retry || k == backend.retry.max_attempts) break;
        std::this_thread::sleep_for(backoff);
        backoff *= backend.retry.backoff_multiplier;
      }
      if (attempt.outcome != Outcome::ok) {
        std::lock_guard lock(error_mutex);
        if (!error_batch || b < *error_batch) {
          error_batch = b;
          error_text = attempt.error;
        }
        failed.store(true);
        return;
      }
      results[b] = std::move(attempt.vectors);
    }
  };

  const std::size_t n_workers = std::min(backend.parallelism, n_batches);
  std::vector<std::thread> threads;
  threads.reserve(n_workers);
  for (std::size_t w = 0; w < n_workers; ++w) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  if (error_batch) {
    const std::size_t index = first_index[*error_batch * backend.batch_size];
    throw BackendError("embedding request for prompt " + std::to_string(index) + " failed: " +
                           error_text,
                       index);
  }

  std::vector<const EmbeddingVector*> unique_vectors;
  unique_vectors.reserve(n_unique);
  for (const auto& batch : results) {
    for (const auto& v : batch) unique_vectors.push_back(&v);
  }
  const std::size_t dim = unique_vectors.front()->dim();
  for (std::size_t u = 0; u < n_unique; ++u) {
    if (unique_vectors[u]->dim() != dim) {
      throw BackendError("embedding dimension mismatch: prompt " + std::to_string(first_index[u]) +
                             " has " + std::to_string(unique_vectors[u]->dim()) + ", expected " +
                             std::to_string(dim),
                         first_index[u]);
    }
  }

  std::vector<EmbeddingVector> out;
  out.reserve(prompts.size());
  for (std::size_t i = 0; i < prompts.size(); ++i) out.push_back(*unique_vectors[unique_of[i]]);
  return out;
}

}  // namespace frameind
