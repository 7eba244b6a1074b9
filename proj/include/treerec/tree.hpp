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

// Hierarchical semantic index. Leaves are artifacts (level 0); every round
// reduces the current level's embeddings, picks a mixture size by BIC,
// soft-assigns nodes to clusters and summarizes each cluster into a parent.
// Soft assignment lets a node have several parents, so the index is a DAG.
//
// Index file (JSON):
//   {"version": 1, "config": {...}, "provenance": {...}, "roots": [ids],
//    "nodes": [{"id", "level", "kind", "name", "summary", "embedding": [...],
//               "children": [...], "artifact_id"?}]}

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "treerec/catalog.hpp"
#include "treerec/cluster.hpp"
#include "treerec/detail/parallel.hpp"
#include "treerec/embed.hpp"
#include "treerec/errors.hpp"
#include "treerec/log.hpp"
#include "treerec/summarize.hpp"

namespace treerec {

inline constexpr int kIndexVersion = 1;

enum class NodeKind { leaf, internal };

struct TreeNode {
  std::string id;
  int level = 0;
  NodeKind kind = NodeKind::leaf;
  std::string name;
  std::string summary;
  Embedding embedding;
  std::vector<std::string> children;
  std::optional<std::string> artifact_id;

  bool is_leaf() const { return kind == NodeKind::leaf; }
  bool operator==(const TreeNode&) const = default;
};

struct StoppingCriteria {
  int max_depth = 4;
  std::size_t max_top_level_nodes = 10;
};

struct ClusterConfig {
  cluster::ReducerConfig reducer;
  std::size_t k_min = 2;
  std::size_t k_max = 32;
  double threshold = 0.2;
  std::uint64_t seed = 0;
  cluster::EmOptions em;
};

struct BuildConfig {
  ClusterConfig cluster;
  StoppingCriteria stop;
  std::size_t max_prompt_chars = kMaxPromptChildChars;
  // Left out of the index when unset so offline builds are reproducible byte for byte.
  std::optional<std::string> build_timestamp;
};

/// Immutable, validated index. Safe for concurrent readers.
class TreeIndex {
 public:
  TreeIndex() = default;

  TreeIndex(std::vector<TreeNode> nodes, std::vector<std::string> roots, nlohmann::json config = nlohmann::json::object(),
            nlohmann::json provenance = nlohmann::json::object())
      : nodes_(std::move(nodes)), roots_(std::move(roots)), config_(std::move(config)), provenance_(std::move(provenance)) {
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (!by_id_.emplace(nodes_[i].id, i).second) throw IndexError("duplicate node id '" + nodes_[i].id + "'");
    validate();
  }

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const std::vector<std::string>& roots() const { return roots_; }
  const nlohmann::json& config() const { return config_; }
  const nlohmann::json& provenance() const { return provenance_; }
  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }

  const TreeNode* find(const std::string& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &nodes_[it->second];
  }
  const TreeNode& node(const std::string& id) const {
    auto* n = find(id);
    if (!n) throw IndexError("unknown node id '" + id + "'");
    return *n;
  }

  std::size_t dim() const { return nodes_.empty() ? 0 : nodes_.front().embedding.dim(); }

  int max_level() const {
    int m = 0;
    for (const auto& n : nodes_) m = std::max(m, n.level);
    return m;
  }
  int layer_count() const { return nodes_.empty() ? 0 : max_level() + 1; }

  std::size_t max_branching() const {
    std::size_t b = 0;
    for (const auto& n : nodes_) b = std::max(b, n.children.size());
    return b;
  }

  std::size_t leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const auto& n) { return n.is_leaf(); }));
  }

 private:
  void validate() const {
    if (nodes_.empty()) throw IndexError("index has no nodes");
    if (roots_.empty()) throw IndexError("index has no roots");
    const std::size_t dim = nodes_.front().embedding.dim();
    std::unordered_set<std::string> artifacts;
    for (const auto& n : nodes_) {
      if (n.embedding.dim() != dim) throw IndexError("node '" + n.id + "': " + DimensionMismatch(dim, n.embedding.dim()).what());
      if (n.is_leaf()) {
        if (!n.children.empty()) throw IndexError("leaf '" + n.id + "' has children");
        if (!n.artifact_id) throw IndexError("leaf '" + n.id + "' has no artifact_id");
        if (n.level != 0) throw IndexError("leaf '" + n.id + "' is not at level 0");
        if (!artifacts.insert(*n.artifact_id).second)
          throw IndexError("artifact '" + *n.artifact_id + "' appears in more than one leaf");
      } else {
        if (n.children.empty()) throw IndexError("internal node '" + n.id + "' has no children");
        if (n.artifact_id) throw IndexError("internal node '" + n.id + "' carries an artifact_id");
      }
      for (const auto& c : n.children)
        if (!by_id_.count(c)) throw IndexError("node '" + n.id + "' references unknown child '" + c + "'");
    }
    for (const auto& r : roots_)
      if (!by_id_.count(r)) throw IndexError("unknown root '" + r + "'");

    check_acyclic();

    for (const auto& n : nodes_)
      for (const auto& c : n.children)
        if (node(c).level >= n.level)
          throw IndexError("child '" + c + "' is not below parent '" + n.id + "'");

    std::vector<char> reached(nodes_.size(), 0);
    std::vector<std::size_t> stack;
    for (const auto& r : roots_) stack.push_back(by_id_.at(r));
    while (!stack.empty()) {
      auto i = stack.back();
      stack.pop_back();
      if (reached[i]) continue;
      reached[i] = 1;
      for (const auto& c : nodes_[i].children) stack.push_back(by_id_.at(c));
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (nodes_[i].is_leaf() && !reached[i]) throw IndexError("orphan leaf '" + nodes_[i].id + "' is unreachable from the roots");
  }

  void check_acyclic() const {
    enum : char { white, grey, black };
    std::vector<char> color(nodes_.size(), white);
    // Iterative DFS: (node, next child position).
    for (std::size_t start = 0; start < nodes_.size(); ++start) {
      if (color[start] != white) continue;
      std::vector<std::pair<std::size_t, std::size_t>> stack{{start, 0}};
      color[start] = grey;
      while (!stack.empty()) {
        auto& [i, pos] = stack.back();
        if (pos == nodes_[i].children.size()) {
          color[i] = black;
          stack.pop_back();
          continue;
        }
        auto j = by_id_.at(nodes_[i].children[pos++]);
        if (color[j] == grey) throw CycleError(nodes_[i].id, nodes_[j].id);
        if (color[j] == white) {
          color[j] = grey;
          stack.emplace_back(j, 0);
        }
      }
    }
  }

  std::vector<TreeNode> nodes_;
  std::vector<std::string> roots_;
  nlohmann::json config_;
  nlohmann::json provenance_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

// ---------------------------------------------------------------------------
// Build
// ---------------------------------------------------------------------------

inline nlohmann::json config_snapshot(const Embedder& embedder, const Summarizer& summarizer, const BuildConfig& cfg) {
  return {{"embedder", embedder.describe()},
          {"reducer", {{"method", cluster::to_string(cfg.cluster.reducer.method)}, {"target_dim", cfg.cluster.reducer.target_dim}}},
          {"cluster",
           {{"k_min", cfg.cluster.k_min},
            {"k_max", cfg.cluster.k_max},
            {"threshold", cfg.cluster.threshold},
            {"seed", cfg.cluster.seed},
            {"em_tolerance", cfg.cluster.em.tolerance},
            {"em_max_iterations", cfg.cluster.em.max_iterations}}},
          {"stop", {{"max_depth", cfg.stop.max_depth}, {"max_top_level_nodes", cfg.stop.max_top_level_nodes}}},
          {"summarizer", summarizer.describe()},
          {"max_prompt_chars", cfg.max_prompt_chars}};
}

namespace detail {

inline std::string node_line(const TreeNode& n) { return n.name.empty() ? n.summary : n.name + ": " + n.summary; }

/// Groups of current-level positions, one per non-empty mixture component.
inline std::vector<std::vector<std::size_t>> cluster_level(const cluster::Matrix& data, const ClusterConfig& cfg, int level) {
  const auto m = static_cast<std::size_t>(data.rows());
  const auto d = static_cast<std::size_t>(data.cols());
  auto reducer = cfg.reducer;
  reducer.target_dim = std::min({reducer.target_dim, d, m - 1});
  auto reduced = cluster::reduce(data, reducer);

  const std::size_t sqrt_cap = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(m))));
  std::size_t k_lo = std::clamp<std::size_t>(cfg.k_min, 1, m - 1);
  std::size_t k_hi = std::clamp<std::size_t>(std::min(cfg.k_max, sqrt_cap), k_lo, m - 1);
  const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(level) * 0x9e3779b97f4a7c15ULL;

  auto sel = cluster::select_k_bic(reduced.data, k_lo, k_hi, seed, cfg.em);
  auto group = [&](const cluster::GmmModel& model) {
    auto assign = cluster::soft_assign(model, reduced.data, cfg.threshold);
    std::vector<std::vector<std::size_t>> groups(model.k);
    for (std::size_t i = 0; i < m; ++i)
      for (auto j : assign.memberships[i]) groups[j].push_back(i);
    std::erase_if(groups, [](const auto& g) { return g.empty(); });
    return groups;
  };
  auto groups = group(sel.best);
  if (groups.size() >= m) {
    std::size_t forced = (m + 1) / 2;
    log().info("level {}: no merging at k={}, forcing k={}", level, sel.best.k, forced);
    groups = group(cluster::fit_gmm(reduced.data, forced, seed, cfg.em));
  }
  return groups;
}

}  // namespace detail

/// Builds the index bottom-up. Stopping criteria are checked before each new
/// round: a level of one node, a level within `max_top_level_nodes`, or a
/// tree of `max_depth` layers ends the build.
inline TreeIndex build_tree(const ArtifactLibrary& lib, const Embedder& embedder, const Summarizer& summarizer,
                            const BuildConfig& cfg = {}) {
  if (lib.empty()) throw std::invalid_argument("build_tree: empty library");
  if (cfg.stop.max_depth < 1) throw std::invalid_argument("build_tree: max_depth must be >= 1");
  if (cfg.stop.max_top_level_nodes < 1) throw std::invalid_argument("build_tree: max_top_level_nodes must be >= 1");

  std::vector<TreeNode> nodes;
  nodes.reserve(lib.size() * 2);
  {
    std::vector<std::string> descriptions;
    descriptions.reserve(lib.size());
    for (const auto& a : lib) descriptions.push_back(a.description);
    auto vecs = embedder.embed(descriptions);
    if (vecs.size() != lib.size()) throw BuildError("embedder returned the wrong number of vectors", 0, 0);
    for (std::size_t i = 0; i < lib.size(); ++i) {
      if (vecs[i].dim() != embedder.dim()) throw DimensionMismatch(embedder.dim(), vecs[i].dim());
      nodes.push_back({"L0-" + std::to_string(i), 0, NodeKind::leaf, lib[i].name, lib[i].description,
                       std::move(vecs[i]), {}, lib[i].id});
    }
  }

  std::vector<std::size_t> current(nodes.size());
  for (std::size_t i = 0; i < current.size(); ++i) current[i] = i;
  int level = 0;

  while (current.size() > 1 && current.size() > cfg.stop.max_top_level_nodes && level + 1 < cfg.stop.max_depth) {
    const auto m = current.size();
    cluster::Matrix data(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(embedder.dim()));
    for (std::size_t i = 0; i < m; ++i) {
      auto v = nodes[current[i]].embedding.values();
      for (std::size_t j = 0; j < v.size(); ++j) data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[j];
    }
    auto groups = detail::cluster_level(data, cfg.cluster, level);

    std::vector<FeatureSummary> summaries;
    try {
      summaries = detail::bounded_map(groups.size(), summarizer.max_in_flight(), [&](std::size_t g) {
        std::vector<std::string> lines;
        lines.reserve(groups[g].size());
        for (auto i : groups[g]) lines.push_back(detail::node_line(nodes[current[i]]));
        auto capped = cap_children(lines, cfg.max_prompt_chars);
        return summarizer.summarize(capped);
      });
    } catch (const std::exception& e) {
      throw BuildError(std::string("summarization failed at level ") + std::to_string(level + 1) + ": " + e.what(),
                       level + 1, nodes.size());
    }

    std::vector<std::string> texts;
    texts.reserve(summaries.size());
    for (const auto& s : summaries) texts.push_back(s.description);
    auto vecs = embedder.embed(texts);

    std::vector<std::size_t> next;
    next.reserve(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
      TreeNode parent;
      parent.id = "L" + std::to_string(level + 1) + "-" + std::to_string(g);
      parent.level = level + 1;
      parent.kind = NodeKind::internal;
      parent.name = summaries[g].name;
      parent.summary = summaries[g].description;
      parent.embedding = std::move(vecs[g]);
      for (auto i : groups[g]) parent.children.push_back(nodes[current[i]].id);
      next.push_back(nodes.size());
      nodes.push_back(std::move(parent));
    }
    log().debug("level {}: {} nodes -> {} parents", level, m, next.size());
    current = std::move(next);
    ++level;
  }

  std::vector<std::string> roots;
  roots.reserve(current.size());
  for (auto i : current) roots.push_back(nodes[i].id);

  nlohmann::json provenance = {{"embedder", embedder.describe()}, {"summarizer", summarizer.describe()}};
  if (cfg.build_timestamp) provenance["build_timestamp"] = *cfg.build_timestamp;
  TreeIndex index(std::move(nodes), std::move(roots), config_snapshot(embedder, summarizer, cfg), std::move(provenance));
  if (index.leaf_count() != lib.size()) throw BuildError("leaf coverage check failed", level, index.size());
  return index;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const TreeIndex& t) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : t.nodes()) {
    nlohmann::json j = {{"id", n.id},
                        {"level", n.level},
                        {"kind", n.is_leaf() ? "leaf" : "internal"},
                        {"name", n.name},
                        {"summary", n.summary},
                        {"embedding", std::vector<double>(n.embedding.values().begin(), n.embedding.values().end())},
                        {"children", n.children}};
    if (n.artifact_id) j["artifact_id"] = *n.artifact_id;
    nodes.push_back(std::move(j));
  }
  return {{"version", kIndexVersion},
          {"config", t.config()},
          {"provenance", t.provenance()},
          {"roots", t.roots()},
          {"nodes", std::move(nodes)}};
}

inline TreeIndex tree_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object()) throw IndexError("index file must be a JSON object");
    int version = j.at("version").get<int>();
    if (version != kIndexVersion) throw VersionMismatch(version);
    std::vector<TreeNode> nodes;
    for (const auto& jn : j.at("nodes")) {
      TreeNode n;
      n.id = jn.at("id").get<std::string>();
      n.level = jn.at("level").get<int>();
      auto kind = jn.at("kind").get<std::string>();
      if (kind != "leaf" && kind != "internal") throw IndexError("node '" + n.id + "' has unknown kind '" + kind + "'");
      n.kind = kind == "leaf" ? NodeKind::leaf : NodeKind::internal;
      n.name = jn.at("name").get<std::string>();
      n.summary = jn.at("summary").get<std::string>();
      n.embedding = Embedding::from_normalized(jn.at("embedding").get<std::vector<double>>());
      n.children = jn.at("children").get<std::vector<std::string>>();
      if (auto it = jn.find("artifact_id"); it != jn.end()) n.artifact_id = it->get<std::string>();
      nodes.push_back(std::move(n));
    }
    return TreeIndex(std::move(nodes), j.at("roots").get<std::vector<std::string>>(),
                     j.value("config", nlohmann::json::object()), j.value("provenance", nlohmann::json::object()));
  } catch (const nlohmann::json::exception& e) {
    throw IndexError(std::string("malformed index: ") + e.what());
  } catch (const ValidationError& e) {
    throw IndexError(std::string("malformed index: ") + e.what());
  }
}

inline std::string serialize_tree(const TreeIndex& t) { return to_json(t).dump() + "\n"; }

inline void save_tree(const TreeIndex& t, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << serialize_tree(t);
  if (!out) throw Error("failed writing '" + path + "'");
}

inline TreeIndex load_tree(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path, 0, std::string("invalid index JSON: ") + e.what());
  }
  return tree_from_json(j);
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

struct TreeStats {
  int layers = 0;
  std::size_t nodes = 0;
  std::size_t leaves = 0;
  std::size_t roots = 0;
  double mean_leaf_summary_length = 0;
  double mean_internal_summary_length = 0;
};

/// Length in Unicode code points of UTF-8 text.
inline std::size_t char_length(std::string_view s) {
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

inline TreeStats tree_stats(const TreeIndex& t) {
  TreeStats s;
  s.layers = t.layer_count();
  s.nodes = t.size();
  s.roots = t.roots().size();
  double leaf_total = 0, internal_total = 0;
  std::size_t internal = 0;
  for (const auto& n : t.nodes()) {
    if (n.is_leaf()) {
      ++s.leaves;
      leaf_total += static_cast<double>(char_length(n.summary));
    } else {
      ++internal;
      internal_total += static_cast<double>(char_length(n.summary));
    }
  }
  s.mean_leaf_summary_length = s.leaves ? leaf_total / static_cast<double>(s.leaves) : 0;
  s.mean_internal_summary_length = internal ? internal_total / static_cast<double>(internal) : 0;
  return s;
}

inline nlohmann::json to_json(const TreeStats& s) {
  return {{"layers", s.layers},
          {"nodes", s.nodes},
          {"leaves", s.leaves},
          {"roots", s.roots},
          {"mean_leaf_summary_length", s.mean_leaf_summary_length},
          {"mean_internal_summary_length", s.mean_internal_summary_length}};
}

}  // namespace treerec
