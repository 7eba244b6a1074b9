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
#include <chrono>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "treerec/embed.hpp"
#include "treerec/errors.hpp"
#include "treerec/llm.hpp"
#include "treerec/log.hpp"
#include "treerec/ranking.hpp"
#include "treerec/text.hpp"
#include "treerec/tree.hpp"

namespace treerec {

struct SearchConfig {
  std::size_t beam_width = 10;
  std::size_t final_k = 10;
  bool rerank = false;
  int rerank_retry_budget = 2;

  /// Beam of max(k, 10) and final_k = k.
  static SearchConfig for_k(std::size_t k, bool rerank = false) {
    return {std::max<std::size_t>(k, 10), k, rerank};
  }

  void validate() const {
    if (beam_width == 0 || final_k == 0) throw std::invalid_argument("search: beam width and k must be positive");
    if (final_k > beam_width) throw std::invalid_argument("search: final_k must not exceed the beam width");
  }
};

/// Top-down beam search over the index. Each round scores the frontier
/// against the intent, keeps the best `beam_width` nodes (ties by ascending
/// node id) and stops once all kept nodes are leaves. Otherwise the next
/// frontier is the deduplicated union of the kept nodes' children plus the
/// kept leaves themselves.
inline RankedList tree_search(const TreeIndex& t, std::string_view intent, const SearchConfig& cfg,
                              const Embedder& embedder) {
  if (t.empty()) throw IndexError("tree_search: empty index");
  if (cfg.beam_width == 0) throw std::invalid_argument("tree_search: beam width must be positive");
  if (embedder.dim() != t.dim()) throw DimensionMismatch(t.dim(), embedder.dim());
  auto started = std::chrono::steady_clock::now();

  RankedList out;
  out.intent = std::string(intent);
  const Embedding query = embedder.embed_one(out.intent);

  std::vector<const TreeNode*> frontier;
  for (const auto& r : t.roots()) frontier.push_back(&t.node(r));

  const int max_rounds = t.layer_count() + 1;
  for (int round = 0; round < max_rounds && !frontier.empty(); ++round) {
    std::vector<PoolEntry> pool;
    pool.reserve(frontier.size());
    for (auto* n : frontier) pool.push_back({n->id, n->embedding});
    out.node_evaluations += pool.size();
    auto kept = top_k_sim(query, pool, cfg.beam_width);

    bool all_leaves = std::all_of(kept.begin(), kept.end(), [&](const auto& s) { return t.node(s.id).is_leaf(); });
    if (all_leaves) {
      for (const auto& s : kept) out.entries.push_back({*t.node(s.id).artifact_id, s.score});
      break;
    }
    std::vector<const TreeNode*> next;
    std::unordered_set<std::string_view> seen;
    for (const auto& s : kept) {
      const auto& n = t.node(s.id);
      if (n.is_leaf()) {
        if (seen.insert(n.id).second) next.push_back(&n);
        continue;
      }
      for (const auto& c : n.children) {
        const auto& child = t.node(c);
        if (seen.insert(child.id).second) next.push_back(&child);
      }
    }
    frontier = std::move(next);
  }
  out.elapsed = std::chrono::steady_clock::now() - started;
  return out;
}

struct RerankCandidate {
  std::string id;
  std::string description;
};

inline std::string render_rerank_prompt(std::string_view intent, std::span<const RerankCandidate> candidates) {
  if (candidates.empty()) throw std::invalid_argument("render_rerank_prompt: no candidates");
  std::string out =
      "Given a user requirement and a list of candidate artifacts, rank the artifacts from best match to worst match "
      "according to how well each artifact satisfies the requirement.\n"
      "\n"
      "User Requirements: ";
  out += text::flatten_line(intent);
  out += "\n\nCandidate Artifacts:\n";
  for (const auto& c : candidates) {
    out += '<';
    out += text::flatten_line(c.id);
    out += ", ";
    out += text::flatten_line(c.description);
    out += ">\n";
  }
  out += "\nPlease only output the ID of the sorted artifact in a list format.";
  return out;
}

/// Extracts candidate ids, in order, from a bracketed, comma- or
/// newline-separated list. Unknown ids and repeats are dropped.
inline std::vector<std::string> parse_id_list(std::string_view response, std::span<const std::string> candidates) {
  std::unordered_set<std::string_view> known(candidates.begin(), candidates.end());
  std::unordered_set<std::string> emitted;
  std::vector<std::string> out;
  auto take = [&](std::string_view tok) {
    static constexpr std::string_view strip = " \t\r\n'\"`<>()*[]{}";
    while (!tok.empty() && strip.find(tok.front()) != std::string_view::npos) tok.remove_prefix(1);
    while (!tok.empty() && strip.find(tok.back()) != std::string_view::npos) tok.remove_suffix(1);
    // Numbered list items: "1. id" or "1) id".
    if (auto sp = tok.find_first_of(".)"); sp != std::string_view::npos && sp > 0 &&
                                            std::all_of(tok.begin(), tok.begin() + static_cast<std::ptrdiff_t>(sp), [](char c) { return c >= '0' && c <= '9'; }) &&
                                            !known.count(tok)) {
      tok = text::trim(tok.substr(sp + 1));
    }
    if (tok.empty() || !known.count(tok)) return;
    std::string id(tok);
    if (emitted.insert(id).second) out.push_back(std::move(id));
  };
  std::size_t start = 0;
  for (std::size_t i = 0; i <= response.size(); ++i) {
    if (i == response.size() || response[i] == ',' || response[i] == '\n' || response[i] == '[' || response[i] == ']') {
      take(response.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

/// Orders `candidates` by the model's ranking. Hallucinated ids are dropped and
/// omitted candidates are appended in their original order. When no response
/// yields a single known id within the retry budget, the original order is kept.
inline RankedList rerank(std::string_view intent, const RankedList& candidates,
                         std::span<const RerankCandidate> descriptions, ChatModel& llm, std::size_t final_k,
                         int retry_budget = 2) {
  if (candidates.entries.empty()) throw std::invalid_argument("rerank: no candidates");
  std::vector<std::string> ids = candidates.ids();
  std::unordered_map<std::string, const RankedEntry*> by_id;
  for (const auto& e : candidates.entries) by_id[e.artifact_id] = &e;

  auto prompt = render_rerank_prompt(intent, descriptions);
  std::vector<std::string> order;
  for (int attempt = 0; attempt <= retry_budget && order.empty(); ++attempt) order = parse_id_list(llm.complete(prompt), ids);

  RankedList out = candidates;
  out.entries.clear();
  if (order.empty()) {
    log().warn("re-rank response had no candidate ids after {} attempts; keeping similarity order", retry_budget + 1);
    out.entries = candidates.entries;
    out.truncate(final_k);
    return out;
  }
  std::unordered_set<std::string> placed(order.begin(), order.end());
  for (const auto& id : ids)
    if (!placed.count(id)) order.push_back(id);
  for (const auto& id : order) out.entries.push_back(*by_id.at(id));
  out.reranked = true;
  out.truncate(final_k);
  return out;
}

inline std::vector<RerankCandidate> rerank_candidates(const TreeIndex& t, const RankedList& list) {
  std::unordered_map<std::string, const TreeNode*> leaf_by_artifact;
  for (const auto& n : t.nodes())
    if (n.is_leaf()) leaf_by_artifact[*n.artifact_id] = &n;
  std::vector<RerankCandidate> out;
  out.reserve(list.entries.size());
  for (const auto& e : list.entries) out.push_back({e.artifact_id, leaf_by_artifact.at(e.artifact_id)->summary});
  return out;
}

/// tree_search, then optional re-ranking, truncated to final_k. `elapsed`
/// covers the whole pipeline.
inline RankedList recommend(const TreeIndex& t, std::string_view intent, const SearchConfig& cfg, const Embedder& embedder,
                            ChatModel* llm = nullptr) {
  cfg.validate();
  auto started = std::chrono::steady_clock::now();
  auto result = tree_search(t, intent, cfg, embedder);
  if (cfg.rerank && !result.entries.empty()) {
    if (!llm) throw std::invalid_argument("recommend: re-ranking requested without a chat model");
    auto candidates = rerank_candidates(t, result);
    result = rerank(intent, result, candidates, *llm, cfg.final_k, cfg.rerank_retry_budget);
  }
  result.truncate(cfg.final_k);
  result.elapsed = std::chrono::steady_clock::now() - started;
  return result;
}

}  // namespace treerec
