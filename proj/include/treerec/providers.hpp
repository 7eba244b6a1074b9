//
// Copyright 2026 The treerec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// Remote providers speaking JSON over HTTP(S):
//
//   embeddings:  POST <endpoint>  {"model": ..., "input": [texts]}
//                -> {"data": [{"embedding": [...]}, ...]} or {"embeddings": [[...], ...]}
//   chat:        POST <base>/chat/completions
//                {"model": ..., "temperature": 0, "messages": [{"role": "user", "content": ...}]}
//                -> {"choices": [{"message": {"content": ...}}]}
//
// Credentials are read from the environment at request time and are never
// logged or stored.

#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

// Before httplib: <resolv.h> defines a _res macro that breaks Eigen.
#include <Eigen/Core>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "treerec/detail/parallel.hpp"
#include "treerec/embed.hpp"
#include "treerec/errors.hpp"
#include "treerec/llm.hpp"
#include "treerec/log.hpp"

namespace treerec {

namespace http {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;    // starts with '/'
};

inline Url split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("URL must include a scheme: '" + url + "'");
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

inline std::optional<std::string> env(const std::string& name) {
  if (name.empty()) return std::nullopt;
  const char* v = std::getenv(name.c_str());
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

inline bool retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

/// POSTs JSON, retrying transport failures and 408/429/5xx with exponential backoff.
inline nlohmann::json post_json(const std::string& url, const nlohmann::json& body,
                                const std::optional<std::string>& bearer, const RetryPolicy& retry,
                                std::chrono::seconds timeout = std::chrono::seconds(120)) {
  auto target = split_url(url);
  httplib::Headers headers;
  if (bearer) headers.emplace("Authorization", "Bearer " + *bearer);
  const std::string payload = body.dump();
  auto delay = retry.base_delay;
  std::string last_error;
  for (int attempt = 1; attempt <= std::max(1, retry.max_attempts); ++attempt) {
    httplib::Client client(target.origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    auto res = client.Post(target.path, headers, payload, "application/json");
    if (res && res->status >= 200 && res->status < 300) {
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::parse_error&) {
        throw TransportError("non-JSON response from " + target.origin + target.path);
      }
    }
    if (res) {
      last_error = "HTTP " + std::to_string(res->status);
      if (!retryable_status(res->status))
        throw TransportError(target.origin + target.path + " failed: " + last_error);
    } else {
      last_error = httplib::to_string(res.error());
    }
    if (attempt < retry.max_attempts) {
      log().warn("{}{}: {} (attempt {}/{}), retrying", target.origin, target.path, last_error, attempt,
                 retry.max_attempts);
      std::this_thread::sleep_for(delay);
      delay = std::chrono::milliseconds(static_cast<std::int64_t>(static_cast<double>(delay.count()) * retry.multiplier));
    }
  }
  throw TransportError(target.origin + target.path + " failed after " + std::to_string(retry.max_attempts) +
                       " attempts: " + last_error);
}

}  // namespace http

enum class EmbedProvider { remote, hashed_local };

struct EmbedderConfig {
  EmbedProvider provider = EmbedProvider::hashed_local;
  std::size_t dim = 256;
  std::string endpoint;  // empty means $EMBED_API_BASE
  std::string model = "all-mpnet-base-v2";
  std::string credential_env = "EMBED_API_KEY";
  std::uint64_t seed = 0;
  std::size_t batch_size = 64;
  std::size_t max_in_flight = 4;
  RetryPolicy retry;
};

class RemoteEmbedder final : public Embedder {
 public:
  explicit RemoteEmbedder(EmbedderConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.endpoint.empty())
      if (auto base = http::env("EMBED_API_BASE")) cfg_.endpoint = *base;
    if (cfg_.endpoint.empty()) throw std::invalid_argument("remote embedder: no endpoint configured");
    if (cfg_.dim == 0 || cfg_.batch_size == 0) throw std::invalid_argument("remote embedder: dim and batch size must be positive");
  }

  std::size_t dim() const override { return cfg_.dim; }

  nlohmann::json describe() const override {
    return {{"provider", "remote"}, {"dim", cfg_.dim}, {"model", cfg_.model}, {"endpoint", cfg_.endpoint}};
  }

  std::vector<Embedding> embed(std::span<const std::string> texts) const override {
    if (texts.empty()) return {};
    auto key = http::env(cfg_.credential_env);
    std::size_t batches = (texts.size() + cfg_.batch_size - 1) / cfg_.batch_size;
    auto results = detail::bounded_map(batches, cfg_.max_in_flight, [&](std::size_t b) {
      auto first = b * cfg_.batch_size;
      auto chunk = texts.subspan(first, std::min(cfg_.batch_size, texts.size() - first));
      return embed_batch(chunk, key);
    });
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (auto& batch : results)
      for (auto& e : batch) out.push_back(std::move(e));
    return out;
  }

 private:
  std::vector<Embedding> embed_batch(std::span<const std::string> chunk, const std::optional<std::string>& key) const {
    nlohmann::json body = {{"model", cfg_.model}, {"input", std::vector<std::string>(chunk.begin(), chunk.end())}};
    auto res = http::post_json(cfg_.endpoint, body, key, cfg_.retry);
    std::vector<nlohmann::json> rows;
    if (res.contains("data") && res["data"].is_array()) {
      for (auto& item : res["data"]) rows.push_back(item.at("embedding"));
    } else if (res.contains("embeddings") && res["embeddings"].is_array()) {
      for (auto& item : res["embeddings"]) rows.push_back(item);
    } else {
      throw TransportError("embedding response has neither 'data' nor 'embeddings'");
    }
    if (rows.size() != chunk.size())
      throw TransportError("embedding response has " + std::to_string(rows.size()) + " vectors for " +
                           std::to_string(chunk.size()) + " inputs");
    std::vector<Embedding> out;
    out.reserve(rows.size());
    for (auto& row : rows) {
      auto values = row.get<std::vector<double>>();
      if (values.size() != cfg_.dim) throw DimensionMismatch(cfg_.dim, values.size());
      out.push_back(Embedding::normalized(std::move(values)));
    }
    return out;
  }

  EmbedderConfig cfg_;
};

inline std::unique_ptr<Embedder> make_embedder(const EmbedderConfig& cfg) {
  if (cfg.provider == EmbedProvider::remote) return std::make_unique<RemoteEmbedder>(cfg);
  return std::make_unique<HashedEmbedder>(cfg.dim, cfg.seed);
}

inline std::vector<Embedding> embed_texts(std::span<const std::string> texts, const EmbedderConfig& cfg) {
  if (texts.empty()) throw std::invalid_argument("embed_texts: no texts");
  return make_embedder(cfg)->embed(texts);
}

class HttpChatModel final : public ChatModel {
 public:
  explicit HttpChatModel(LlmConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.endpoint.empty())
      if (auto base = http::env("LLM_API_BASE")) cfg_.endpoint = *base;
    if (cfg_.endpoint.empty()) throw std::invalid_argument("chat model: no endpoint configured");
    if (cfg_.temperature < 0) throw std::invalid_argument("chat model: temperature must be >= 0");
    url_ = cfg_.endpoint;
    while (!url_.empty() && url_.back() == '/') url_.pop_back();
    static constexpr std::string_view suffix = "/chat/completions";
    if (url_.size() < suffix.size() || url_.compare(url_.size() - suffix.size(), suffix.size(), suffix) != 0)
      url_ += suffix;
  }

  std::string complete(const std::string& prompt) override {
    nlohmann::json body = {{"model", cfg_.model},
                           {"temperature", cfg_.temperature},
                           {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})}};
    auto res = http::post_json(url_, body, http::env(cfg_.credential_env), cfg_.transport, cfg_.timeout);
    try {
      return res.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw TransportError("chat response missing choices[0].message.content");
    }
  }

  std::string identity() const override { return "chat:" + cfg_.model; }
  const LlmConfig& config() const { return cfg_; }

 private:
  LlmConfig cfg_;
  std::string url_;
};

}  // namespace treerec
