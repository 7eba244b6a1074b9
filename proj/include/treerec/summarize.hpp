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

#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "treerec/embed.hpp"
#include "treerec/errors.hpp"
#include "treerec/llm.hpp"
#include "treerec/log.hpp"
#include "treerec/text.hpp"

namespace treerec {

struct FeatureSummary {
  std::string name;
  std::string description;

  std::string format() const { return name + ": " + description; }
  bool operator==(const FeatureSummary&) const = default;
};

inline constexpr std::string_view kOfflineDescriptionPrefix = "Common feature covering: ";
inline constexpr std::size_t kMaxPromptChildChars = 4000;

inline std::string render_summary_prompt(std::span<const std::string> children) {
  if (children.empty()) throw std::invalid_argument("render_summary_prompt: no children");
  std::string out =
      "Based on the following sub-features, please generate a parent common feature that can cover these "
      "sub-features.\n"
      "The sub-features are:\n";
  for (const auto& c : children) {
    out += c;
    out += '\n';
  }
  out += "Please only output the common feature in the format of 'feature name: feature description:'.";
  return out;
}

/// Splits on the first ':'. Surrounding quotes and a trailing ':' on the
/// description are dropped.
inline FeatureSummary parse_feature_line(std::string_view line) {
  auto s = text::trim(line);
  if (s.size() >= 2 && (s.front() == '\'' || s.front() == '"') && s.back() == s.front())
    s = text::trim(s.substr(1, s.size() - 2));
  auto colon = s.find(':');
  if (colon == std::string_view::npos) throw ParseError("feature line", 0, "missing ':' separator");
  auto name = text::trim(s.substr(0, colon));
  auto desc = text::trim(s.substr(colon + 1));
  while (!desc.empty() && desc.back() == ':') desc = text::trim(desc.substr(0, desc.size() - 1));
  if (name.empty() || desc.empty()) throw ParseError("feature line", 0, "empty feature name or description");
  return {std::string(name), std::string(desc)};
}

/// Keeps leading child lines until `max_chars` (newlines included) is reached;
/// the line that crosses the limit is cut.
inline std::vector<std::string> cap_children(std::span<const std::string> lines, std::size_t max_chars) {
  std::vector<std::string> out;
  std::size_t used = 0;
  for (const auto& l : lines) {
    std::size_t cost = l.size() + (out.empty() ? 0 : 1);
    if (used + cost <= max_chars) {
      out.push_back(l);
      used += cost;
      continue;
    }
    std::size_t room = max_chars > used + (out.empty() ? 0 : 1) ? max_chars - used - (out.empty() ? 0 : 1) : 0;
    if (room > 0) out.push_back(l.substr(0, room));
    break;
  }
  return out;
}

namespace detail {

inline bool is_stopword(std::string_view t) {
  static const std::unordered_set<std::string_view> words = {
      "a",    "an",   "and",  "are",  "as",   "at",    "be",    "by",   "can",  "for",   "from", "has",
      "have", "in",   "into", "is",   "it",   "its",   "of",    "on",   "or",   "that",  "the",  "their",
      "this", "to",   "was",  "were", "will", "with",  "which", "you",  "your", "these", "those", "using",
      "use",  "used", "via",  "all",  "any",  "other", "such",  "than", "then", "also",  "not",  "but",
      "common", "feature", "covering"};
  return t.size() < 2 || words.count(t) != 0;
}

inline std::string child_description(const std::string& child) {
  try {
    return parse_feature_line(child).description;
  } catch (const ParseError&) {
    return std::string(text::trim(child));
  }
}

}  // namespace detail

/// Extractive summary: name = the two content tokens with the highest
/// document frequency across children (first occurrence breaks ties);
/// description = the child nearest the children's embedding centroid.
inline FeatureSummary summarize_offline(std::span<const std::string> children, const Embedder& embedder) {
  if (children.empty()) throw std::invalid_argument("summarize_offline: no children");

  std::vector<std::string> order;
  std::unordered_map<std::string, std::size_t> df;
  for (const auto& c : children) {
    std::unordered_set<std::string> seen;
    for (auto& t : text::tokenize(c)) {
      if (detail::is_stopword(t) || !seen.insert(t).second) continue;
      if (df[t]++ == 0) order.push_back(t);
    }
  }
  std::stable_sort(order.begin(), order.end(), [&](const auto& a, const auto& b) { return df[a] > df[b]; });
  std::string name;
  for (std::size_t i = 0; i < std::min<std::size_t>(2, order.size()); ++i) name += (i ? " " : "") + order[i];
  if (name.empty()) name = "feature";

  std::size_t nearest = 0;
  if (children.size() > 1) {
    auto vecs = embedder.embed(children);
    std::vector<double> centroid(embedder.dim(), 0.0);
    for (const auto& v : vecs)
      for (std::size_t j = 0; j < centroid.size(); ++j) centroid[j] += v[j];
    auto c = Embedding::raw(std::move(centroid));
    double best = -2;
    for (std::size_t i = 0; i < vecs.size(); ++i) {
      double s = cosine(c, vecs[i]);
      if (s > best) {
        best = s;
        nearest = i;
      }
    }
  }
  auto desc = detail::child_description(children[nearest]);
  if (!text::starts_with(desc, kOfflineDescriptionPrefix)) desc = std::string(kOfflineDescriptionPrefix) + desc;
  return {std::move(name), std::move(desc)};
}

/// Produces parent features for clusters. With a chat model the summary comes
/// from the rendered prompt (first response line); unparseable responses are
/// retried `cfg.retry_budget` times, then the offline path is used.
/// Transport errors propagate.
class Summarizer {
 public:
  explicit Summarizer(const Embedder& embedder, ChatModel* llm = nullptr, LlmConfig cfg = {})
      : embedder_(embedder), llm_(llm), cfg_(std::move(cfg)) {}

  FeatureSummary summarize(std::span<const std::string> children) const {
    if (children.empty()) throw std::invalid_argument("summarize: no children");
    if (!llm_) return summarize_offline(children, embedder_);
    auto prompt = render_summary_prompt(children);
    for (int attempt = 0; attempt <= cfg_.retry_budget; ++attempt) {
      auto response = llm_->complete(prompt);
      try {
        return parse_feature_line(first_line(response));
      } catch (const ParseError&) {
        log().debug("unparseable summary response (attempt {})", attempt + 1);
      }
    }
    log().warn("summary response unparseable after {} attempts; using offline summary", cfg_.retry_budget + 1);
    return summarize_offline(children, embedder_);
  }

  bool uses_llm() const { return llm_ != nullptr; }
  std::size_t max_in_flight() const { return llm_ ? std::max<std::size_t>(1, cfg_.max_in_flight) : 1; }

  nlohmann::json describe() const {
    if (!llm_) return {{"provider", "offline"}};
    return {{"provider", "llm"}, {"model", llm_->identity()}, {"temperature", cfg_.temperature}};
  }

 private:
  static std::string first_line(const std::string& s) {
    std::size_t pos = 0;
    while (pos <= s.size()) {
      auto end = s.find('\n', pos);
      auto line = text::trim(std::string_view(s).substr(pos, end == std::string::npos ? std::string::npos : end - pos));
      if (!line.empty()) return std::string(line);
      if (end == std::string::npos) break;
      pos = end + 1;
    }
    return {};
  }

  const Embedder& embedder_;
  ChatModel* llm_;
  LlmConfig cfg_;
};

inline FeatureSummary summarize_cluster(std::span<const std::string> children, const Embedder& embedder,
                                        ChatModel* llm = nullptr, const LlmConfig& cfg = {}) {
  return Summarizer(embedder, llm, cfg).summarize(children);
}

}  // namespace treerec
