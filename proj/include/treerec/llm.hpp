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

// Chat-model abstraction shared by summarization, re-ranking and the LLM
// baseline. Record/replay stub files are JSON objects mapping the SHA-256 hex
// digest of a prompt to the recorded response text.

#pragma once

#include <chrono>
#include <cstddef>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <utility>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "treerec/errors.hpp"

namespace treerec {

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{500};
  double multiplier = 2.0;
};

struct LlmConfig {
  std::string endpoint;  // base URL; empty means $LLM_API_BASE
  std::string model = "gpt-4";
  std::string credential_env = "LLM_API_KEY";
  double temperature = 0.0;
  std::size_t max_in_flight = 4;
  // Re-asks allowed when a response cannot be parsed.
  int retry_budget = 2;
  RetryPolicy transport;
  std::chrono::seconds timeout{120};
};

class ChatModel {
 public:
  virtual ~ChatModel() = default;
  /// Sends one user message; returns the assistant text. Throws TransportError.
  virtual std::string complete(const std::string& prompt) = 0;
  virtual std::string identity() const = 0;
};

/// Adapts a callable; used for in-process stubs.
class FunctionChatModel final : public ChatModel {
 public:
  explicit FunctionChatModel(std::function<std::string(const std::string&)> fn, std::string id = "function-stub")
      : fn_(std::move(fn)), id_(std::move(id)) {}
  std::string complete(const std::string& prompt) override {
    std::lock_guard lock(mu_);
    ++calls_;
    return fn_(prompt);
  }
  std::string identity() const override { return id_; }
  std::size_t calls() const { return calls_; }

 private:
  std::function<std::string(const std::string&)> fn_;
  std::string id_;
  std::mutex mu_;
  std::size_t calls_ = 0;
};

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

/// Answers prompts from a stub file; an unknown prompt is a TransportError.
class ReplayChatModel final : public ChatModel {
 public:
  explicit ReplayChatModel(std::map<std::string, std::string> responses, std::string source = "<memory>")
      : responses_(std::move(responses)), source_(std::move(source)) {}

  static ReplayChatModel from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open replay file '" + path + "'");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path, 0, std::string("invalid replay file: ") + e.what());
    }
    if (!j.is_object()) throw ParseError(path, 0, "replay file must be a JSON object");
    std::map<std::string, std::string> m;
    for (auto& [k, v] : j.items()) {
      if (!v.is_string()) throw ParseError(path, 0, "replay entry '" + k + "' is not a string");
      m[k] = v.get<std::string>();
    }
    return ReplayChatModel(std::move(m), path);
  }

  std::string complete(const std::string& prompt) override {
    auto it = responses_.find(sha256_hex(prompt));
    if (it == responses_.end())
      throw TransportError("replay miss in " + source_ + " for prompt hash " + sha256_hex(prompt));
    return it->second;
  }
  std::string identity() const override { return "replay:" + source_; }

 private:
  std::map<std::string, std::string> responses_;
  std::string source_;
};

/// Forwards to another model and remembers every exchange for `save`.
class RecordingChatModel final : public ChatModel {
 public:
  explicit RecordingChatModel(ChatModel& inner) : inner_(inner) {}

  std::string complete(const std::string& prompt) override {
    auto response = inner_.complete(prompt);
    std::lock_guard lock(mu_);
    recorded_[sha256_hex(prompt)] = response;
    return response;
  }
  std::string identity() const override { return inner_.identity(); }

  nlohmann::json recording() const {
    std::lock_guard lock(mu_);
    return nlohmann::json(recorded_);
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write replay file '" + path + "'");
    out << recording().dump(2) << '\n';
  }

 private:
  ChatModel& inner_;
  mutable std::mutex mu_;
  std::map<std::string, std::string> recorded_;
};

}  // namespace treerec
