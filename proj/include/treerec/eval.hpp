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

// Evaluation with a single relevant artifact per intent:
//
//   P@K   = mean over intents of [target within the first K]
//   DCG@K = mean over intents of [target within the first K] / log2(rank + 1)
//
// and the silhouette score of sibling groups in an index, using cosine
// distance between node embeddings.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "treerec/catalog.hpp"
#include "treerec/detail/parallel.hpp"
#include "treerec/embed.hpp"
#include "treerec/errors.hpp"
#include "treerec/log.hpp"
#include "treerec/ranking.hpp"
#include "treerec/tree.hpp"

namespace treerec::eval {

/// 1-based position of `target`, nullopt when absent.
inline std::optional<std::size_t> rank_of(const RankedList& ranked, std::string_view target) {
  for (std::size_t i = 0; i < ranked.entries.size(); ++i)
    if (ranked.entries[i].artifact_id == target) return i + 1;
  return std::nullopt;
}

inline double precision_at_k(std::optional<std::size_t> rank, std::size_t k) {
  if (k < 1) throw std::invalid_argument("precision_at_k: k must be >= 1");
  return rank && *rank <= k ? 1.0 : 0.0;
}

inline double precision_at_k(const RankedList& ranked, std::string_view target, std::size_t k) {
  return precision_at_k(rank_of(ranked, target), k);
}

inline double dcg_at_k(std::optional<std::size_t> rank, std::size_t k) {
  if (k < 1) throw std::invalid_argument("dcg_at_k: k must be >= 1");
  if (!rank || *rank > k) return 0.0;
  return 1.0 / std::log2(static_cast<double>(*rank) + 1.0);
}

inline double dcg_at_k(const RankedList& ranked, std::string_view target, std::size_t k) {
  return dcg_at_k(rank_of(ranked, target), k);
}

inline double mean_precision_at_k(std::span<const std::optional<std::size_t>> ranks, std::size_t k) {
  if (ranks.empty()) return 0;
  double s = 0;
  for (auto r : ranks) s += precision_at_k(r, k);
  return s / static_cast<double>(ranks.size());
}

inline double mean_dcg_at_k(std::span<const std::optional<std::size_t>> ranks, std::size_t k) {
  if (ranks.empty()) return 0;
  double s = 0;
  for (auto r : ranks) s += dcg_at_k(r, k);
  return s / static_cast<double>(ranks.size());
}

// ---------------------------------------------------------------------------
// Silhouette
// ---------------------------------------------------------------------------

inline double cosine_distance(const Embedding& a, const Embedding& b) { return 1.0 - cosine(a, b); }

/// Mean silhouette over every (cluster, member) pair. Singleton clusters score 0,
/// as does a member with a = b = 0.
inline double silhouette(std::span<const std::vector<Embedding>> clusters) {
  std::size_t nonempty = 0;
  for (const auto& c : clusters) nonempty += !c.empty();
  if (nonempty < 2) throw UndefinedMetric("silhouette: need at least two non-empty clusters");

  double total = 0;
  std::size_t count = 0;
  for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
    const auto& own = clusters[ci];
    for (std::size_t i = 0; i < own.size(); ++i) {
      ++count;
      if (own.size() == 1) continue;
      double a = 0;
      for (std::size_t j = 0; j < own.size(); ++j)
        if (j != i) a += cosine_distance(own[i], own[j]);
      a /= static_cast<double>(own.size() - 1);

      double b = std::numeric_limits<double>::infinity();
      for (std::size_t cj = 0; cj < clusters.size(); ++cj) {
        if (cj == ci || clusters[cj].empty()) continue;
        double m = 0;
        for (const auto& other : clusters[cj]) m += cosine_distance(own[i], other);
        b = std::min(b, m / static_cast<double>(clusters[cj].size()));
      }
      double denom = std::max(a, b);
      if (denom > 0) total += (b - a) / denom;
    }
  }
  return std::clamp(total / static_cast<double>(count), -1.0, 1.0);
}

/// Silhouette of the child groups under the parents at `level`. A child with
/// several parents contributes once per membership.
inline double silhouette(const TreeIndex& t, int level) {
  std::vector<std::vector<Embedding>> clusters;
  for (const auto& n : t.nodes()) {
    if (n.level != level || n.is_leaf() || n.children.empty()) continue;
    std::vector<Embedding> members;
    for (const auto& c : n.children) members.push_back(t.node(c).embedding);
    clusters.push_back(std::move(members));
  }
  if (clusters.size() < 2)
    throw UndefinedMetric("silhouette: level " + std::to_string(level) + " has fewer than two parents");
  return silhouette(clusters);
}

// ---------------------------------------------------------------------------
// Benchmark runner
// ---------------------------------------------------------------------------

struct BenchConfig {
  std::vector<std::size_t> precision_ks{1, 4};
  std::vector<std::size_t> dcg_ks{2, 5};
  // Parallel runs overlap queries, so their timings are not comparable.
  bool parallel = false;
  std::size_t threads = 4;
};

struct QueryRecord {
  std::string intent;
  std::string target_id;
  std::optional<std::size_t> rank;  // nullopt: absent or failed
  double elapsed_seconds = 0;
  std::size_t node_evaluations = 0;
  std::optional<std::string> error;
};

struct Timing {
  double mean = 0;
  double std = 0;  // population
  double min = 0;
  double max = 0;
};

struct EvalReport {
  std::string solution;
  std::map<std::string, double> metrics;
  Timing timing;
  std::vector<QueryRecord> records;
  bool timing_comparable = true;
  // Reserved for externally defined tree-quality scores.
  std::optional<double> gvalue;

  std::vector<std::string> metric_names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : metrics) out.push_back(k);
    return out;
  }
};

inline std::string precision_key(std::size_t k) { return "p@" + std::to_string(k); }
inline std::string dcg_key(std::size_t k) { return "dcg@" + std::to_string(k); }

inline Timing timing_of(std::span<const QueryRecord> records) {
  Timing t;
  if (records.empty()) return t;
  t.min = std::numeric_limits<double>::infinity();
  t.max = -std::numeric_limits<double>::infinity();
  double sum = 0;
  for (const auto& r : records) {
    sum += r.elapsed_seconds;
    t.min = std::min(t.min, r.elapsed_seconds);
    t.max = std::max(t.max, r.elapsed_seconds);
  }
  t.mean = sum / static_cast<double>(records.size());
  double var = 0;
  for (const auto& r : records) var += (r.elapsed_seconds - t.mean) * (r.elapsed_seconds - t.mean);
  t.std = std::sqrt(var / static_cast<double>(records.size()));
  // Keep min <= mean <= max despite rounding in the sum.
  t.mean = std::clamp(t.mean, t.min, t.max);
  return t;
}

/// Aggregates metrics and timing from per-query records.
inline EvalReport report_from_records(std::string solution, std::vector<QueryRecord> records, const BenchConfig& cfg = {}) {
  EvalReport rep;
  rep.solution = std::move(solution);
  std::vector<std::optional<std::size_t>> ranks;
  ranks.reserve(records.size());
  for (const auto& r : records) ranks.push_back(r.rank);
  for (auto k : cfg.precision_ks) rep.metrics[precision_key(k)] = mean_precision_at_k(ranks, k);
  for (auto k : cfg.dcg_ks) rep.metrics[dcg_key(k)] = mean_dcg_at_k(ranks, k);
  rep.timing = timing_of(records);
  rep.timing_comparable = !cfg.parallel;
  rep.records = std::move(records);
  return rep;
}

/// Runs `solution` on every sample, timing each full retrieve call with a
/// monotonic clock. A failing sample is recorded with no rank and the run continues.
inline EvalReport run_benchmark(const Retriever& solution, std::span<const IntentSample> samples, const BenchConfig& cfg = {}) {
  auto run_one = [&](std::size_t i) {
    QueryRecord rec;
    rec.intent = samples[i].intent;
    rec.target_id = samples[i].target_id;
    auto started = std::chrono::steady_clock::now();
    try {
      RankedList ranked = solution.retrieve(samples[i].intent);
      rec.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      rec.rank = rank_of(ranked, samples[i].target_id);
      rec.node_evaluations = ranked.node_evaluations;
    } catch (const std::exception& e) {
      rec.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
      rec.error = e.what();
      log().warn("{}: sample {} failed: {}", solution.name(), i, e.what());
    }
    return rec;
  };
  std::vector<QueryRecord> records =
      detail::bounded_map(samples.size(), cfg.parallel ? std::max<std::size_t>(1, cfg.threads) : 1, run_one);
  return report_from_records(solution.name(), std::move(records), cfg);
}

inline nlohmann::json to_json(const QueryRecord& r) {
  nlohmann::json j = {{"intent", r.intent},
                      {"target_id", r.target_id},
                      {"rank", r.rank ? nlohmann::json(*r.rank) : nlohmann::json(nullptr)},
                      {"elapsed_seconds", r.elapsed_seconds},
                      {"node_evaluations", r.node_evaluations}};
  if (r.error) j["error"] = *r.error;
  return j;
}

inline nlohmann::json to_json(const EvalReport& rep) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : rep.records) records.push_back(to_json(r));
  nlohmann::json j = {{"solution", rep.solution},
                      {"metrics", rep.metrics},
                      {"timing", {{"mean", rep.timing.mean}, {"std", rep.timing.std}, {"min", rep.timing.min}, {"max", rep.timing.max}}},
                      {"timing_comparable", rep.timing_comparable},
                      {"samples", rep.records.size()},
                      {"records", std::move(records)}};
  if (rep.gvalue) j["gvalue"] = *rep.gvalue;
  return j;
}

inline EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport rep;
  rep.solution = j.at("solution").get<std::string>();
  rep.metrics = j.at("metrics").get<std::map<std::string, double>>();
  const auto& t = j.at("timing");
  rep.timing = {t.at("mean").get<double>(), t.at("std").get<double>(), t.at("min").get<double>(), t.at("max").get<double>()};
  rep.timing_comparable = j.value("timing_comparable", true);
  for (const auto& jr : j.at("records")) {
    QueryRecord r;
    r.intent = jr.at("intent").get<std::string>();
    r.target_id = jr.at("target_id").get<std::string>();
    if (!jr.at("rank").is_null()) r.rank = jr.at("rank").get<std::size_t>();
    r.elapsed_seconds = jr.at("elapsed_seconds").get<double>();
    r.node_evaluations = jr.value("node_evaluations", std::size_t{0});
    if (jr.contains("error")) r.error = jr.at("error").get<std::string>();
    rep.records.push_back(std::move(r));
  }
  if (j.contains("gvalue")) rep.gvalue = j.at("gvalue").get<double>();
  return rep;
}

/// One header plus one row per report; metric columns are the union of names.
inline void write_csv(std::ostream& out, std::span<const EvalReport> reports) {
  std::vector<std::string> names;
  for (const auto& r : reports)
    for (const auto& n : r.metric_names())
      if (std::find(names.begin(), names.end(), n) == names.end()) names.push_back(n);
  std::sort(names.begin(), names.end());
  out << "solution";
  for (const auto& n : names) out << ',' << n;
  out << ",time_mean,time_std,time_min,time_max,samples\n";
  for (const auto& r : reports) {
    out << r.solution;
    for (const auto& n : names) {
      out << ',';
      if (auto it = r.metrics.find(n); it != r.metrics.end()) out << nlohmann::json(it->second).dump();
    }
    out << ',' << nlohmann::json(r.timing.mean).dump() << ',' << nlohmann::json(r.timing.std).dump() << ','
        << nlohmann::json(r.timing.min).dump() << ',' << nlohmann::json(r.timing.max).dump() << ',' << r.records.size() << '\n';
  }
}

}  // namespace treerec::eval
