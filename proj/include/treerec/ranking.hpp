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
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace treerec {

struct RankedEntry {
  std::string artifact_id;
  double score = 0;

  bool operator==(const RankedEntry&) const = default;
};

/// Ranked recommendation for one intent.
struct RankedList {
  std::string intent;
  std::vector<RankedEntry> entries;
  std::size_t node_evaluations = 0;
  std::chrono::duration<double> elapsed{0};
  // Re-ranked lists follow the model's order; scores stay the original similarities.
  bool reranked = false;

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.artifact_id);
    return out;
  }

  void truncate(std::size_t k) {
    if (entries.size() > k) entries.resize(k);
  }
};

inline nlohmann::json to_json(const RankedList& r) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : r.entries) entries.push_back({{"artifact_id", e.artifact_id}, {"score", e.score}});
  return {{"intent", r.intent},
          {"entries", std::move(entries)},
          {"node_evaluations", r.node_evaluations},
          {"elapsed_seconds", r.elapsed.count()},
          {"reranked", r.reranked}};
}

/// Full ranking of `ids` by `scores`: descending score, ties by ascending id.
inline RankedList rank_by_scores(std::string_view intent, std::span<const std::string> ids, std::span<const double> scores) {
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids[a] < ids[b];
  });
  RankedList out;
  out.intent = std::string(intent);
  out.entries.reserve(order.size());
  for (auto i : order) out.entries.push_back({ids[i], scores[i]});
  return out;
}

/// A recommendation solution evaluated by the benchmark runner.
class Retriever {
 public:
  virtual ~Retriever() = default;
  virtual std::string name() const = 0;
  virtual RankedList retrieve(std::string_view intent) const = 0;
};

}  // namespace treerec
