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

// Synthetic data shared by the unit and acceptance suites.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <spdlog/sinks/base_sink.h>

#include "treerec/catalog.hpp"
#include "treerec/cluster.hpp"
#include "treerec/embed.hpp"
#include "treerec/log.hpp"
#include "treerec/tree.hpp"

namespace treerec::testing {

inline std::string data_path(const std::string& rel) { return std::string(TREEREC_TEST_DATA_DIR) + "/" + rel; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "treerec") {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / (tag + "-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

/// Collects log messages while alive.
class LogCapture {
 public:
  LogCapture() : sink_(std::make_shared<Sink>()) { log().sinks().push_back(sink_); }
  ~LogCapture() {
    auto& sinks = log().sinks();
    sinks.erase(std::remove(sinks.begin(), sinks.end(), sink_), sinks.end());
  }
  std::vector<std::string> messages() const {
    std::lock_guard lock(sink_->mu);
    return sink_->lines;
  }
  bool contains(const std::string& needle) const {
    for (const auto& m : messages())
      if (m.find(needle) != std::string::npos) return true;
    return false;
  }

 private:
  struct Sink : spdlog::sinks::base_sink<std::mutex> {
    mutable std::mutex mu;
    std::vector<std::string> lines;
    void sink_it_(const spdlog::details::log_msg& msg) override {
      std::lock_guard lock(mu);
      lines.emplace_back(msg.payload.begin(), msg.payload.end());
    }
    void flush_() override {}
  };
  std::shared_ptr<Sink> sink_;
};

// ---------------------------------------------------------------------------
// Family catalog: artifacts grouped into topic families with a shared core
// vocabulary plus two artifact-specific words each.
// ---------------------------------------------------------------------------

struct FamilyFixture {
  ArtifactLibrary library;
  std::vector<int> family_of;  // per artifact
  std::vector<std::vector<std::string>> tokens;  // description tokens per artifact
};

inline const std::vector<std::vector<std::string>>& family_vocabularies() {
  static const std::vector<std::vector<std::string>> v = {
      {"json", "parse", "serialize", "schema", "config", "object", "encode", "decode", "yaml", "document"},
      {"http", "request", "server", "route", "middleware", "response", "client", "proxy", "header", "socket"},
      {"image", "resize", "crop", "pixel", "thumbnail", "filter", "render", "canvas", "color", "bitmap"},
      {"date", "time", "timezone", "calendar", "format", "duration", "clock", "schedule", "interval", "timestamp"},
      {"test", "assert", "mock", "fixture", "coverage", "runner", "spec", "snapshot", "stub", "benchmark"},
      {"crypto", "hash", "encrypt", "cipher", "signature", "random", "password", "token", "digest", "secure"},
      {"audio", "sound", "music", "volume", "track", "playback", "sample", "wave", "mixer", "codec"},
      {"database", "query", "table", "index", "transaction", "migration", "record", "cursor", "schema", "orm"},
  };
  return v;
}

inline const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> v = {"fast", "simple", "tiny", "modern", "lightweight", "robust",
                                             "flexible", "library", "module", "toolkit", "helper", "utility",
                                             "package", "support", "node", "browser", "friendly", "minimal"};
  return v;
}

inline std::string unique_word(int family, std::size_t member, int slot) {
  static const std::vector<std::string> syll = {"ka", "lo", "mi", "ne", "ru", "ta", "vo", "zi", "be", "qu", "fa", "xo"};
  std::string w = syll[static_cast<std::size_t>(family) % syll.size()];
  w += syll[member % syll.size()];
  w += syll[(member / syll.size() + static_cast<std::size_t>(slot) * 5) % syll.size()];
  w += std::to_string(member) + (slot ? "x" : "q");
  return w;
}

inline FamilyFixture make_family_fixture(std::size_t families = 5, std::size_t per_family = 20, std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  const auto& vocab = family_vocabularies();
  const auto& filler = filler_words();
  std::vector<Artifact> artifacts;
  FamilyFixture fx;
  for (std::size_t f = 0; f < families; ++f) {
    for (std::size_t m = 0; m < per_family; ++m) {
      std::vector<std::string> core = vocab[f % vocab.size()];
      std::shuffle(core.begin(), core.end(), rng);
      std::vector<std::string> words(core.begin(), core.begin() + 6);
      words.push_back(unique_word(static_cast<int>(f), m, 0));
      words.push_back(unique_word(static_cast<int>(f), m, 1));
      for (int i = 0; i < 2; ++i) words.push_back(filler[rng() % filler.size()]);
      std::shuffle(words.begin(), words.end(), rng);
      std::string desc;
      for (const auto& w : words) desc += (desc.empty() ? "" : " ") + w;
      Artifact a;
      a.id = "fam" + std::to_string(f) + "-" + std::to_string(m);
      a.name = unique_word(static_cast<int>(f), m, 0);
      a.description = desc;
      a.ecosystem = "synthetic";
      artifacts.push_back(std::move(a));
      fx.family_of.push_back(static_cast<int>(f));
      fx.tokens.push_back(words);
    }
  }
  fx.library = ArtifactLibrary(std::move(artifacts));
  return fx;
}

/// Intent for artifact `i`: its description with two words dropped and one
/// filler word added, reordered.
inline IntentSample perturbed_intent(const FamilyFixture& fx, std::size_t i, std::mt19937_64& rng) {
  auto words = fx.tokens[i];
  std::shuffle(words.begin(), words.end(), rng);
  // Keep the artifact-specific words; drop two of the others.
  std::stable_partition(words.begin(), words.end(), [&](const std::string& w) {
    return w == unique_word(fx.family_of[i], i % 1000000, 0) || w.find_first_of("0123456789") != std::string::npos;
  });
  if (words.size() > 4) words.erase(words.end() - 2, words.end());
  words.push_back(filler_words()[rng() % filler_words().size()]);
  std::shuffle(words.begin(), words.end(), rng);
  std::string intent = "I need";
  for (const auto& w : words) intent += " " + w;
  return {intent, fx.library[i].id};
}

// ---------------------------------------------------------------------------
// Balanced synthetic index: branching^depth leaves, each child embedding a
// noisy copy of its parent's.
// ---------------------------------------------------------------------------

inline std::vector<double> random_unit(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(dim);
  double n = 0;
  for (auto& x : v) {
    x = g(rng);
    n += x * x;
  }
  n = std::sqrt(n);
  for (auto& x : v) x /= n;
  return v;
}

inline TreeIndex make_balanced_index(std::size_t branching, int depth, std::size_t dim, std::uint64_t seed,
                                     double noise = 0.6) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<TreeNode> nodes;
  std::vector<std::size_t> level_nodes;
  std::vector<std::vector<double>> level_vecs;
  // Top level.
  int top = depth;
  for (std::size_t i = 0; i < branching; ++i) {
    level_vecs.push_back(random_unit(dim, rng));
  }
  std::vector<std::vector<std::size_t>> ordinal_children;
  // Build top-down, then assign ids; nodes vector holds all levels.
  struct Pending {
    int level;
    std::vector<double> vec;
    std::vector<std::size_t> children;
  };
  std::vector<std::vector<Pending>> levels(static_cast<std::size_t>(depth) + 1);
  for (auto& v : level_vecs) levels[static_cast<std::size_t>(top)].push_back({top, v, {}});
  for (int l = top; l > 0; --l) {
    auto& parents = levels[static_cast<std::size_t>(l)];
    auto& kids = levels[static_cast<std::size_t>(l - 1)];
    for (auto& p : parents) {
      for (std::size_t c = 0; c < branching; ++c) {
        std::vector<double> v = p.vec;
        double n = 0;
        for (auto& x : v) {
          x += noise * g(rng) / std::sqrt(static_cast<double>(dim));
          n += x * x;
        }
        n = std::sqrt(n);
        for (auto& x : v) x /= n;
        p.children.push_back(kids.size());
        kids.push_back({l - 1, std::move(v), {}});
      }
    }
  }
  auto id_of = [](int level, std::size_t ord) { return "L" + std::to_string(level) + "-" + std::to_string(ord); };
  for (int l = 0; l <= depth; ++l) {
    auto& lv = levels[static_cast<std::size_t>(l)];
    for (std::size_t i = 0; i < lv.size(); ++i) {
      TreeNode n;
      n.id = id_of(l, i);
      n.level = l;
      n.kind = l == 0 ? NodeKind::leaf : NodeKind::internal;
      n.name = n.id;
      n.summary = "synthetic node " + n.id;
      n.embedding = Embedding::normalized(lv[i].vec);
      for (auto c : lv[i].children) n.children.push_back(id_of(l - 1, c));
      if (l == 0) n.artifact_id = "a" + std::to_string(i);
      nodes.push_back(std::move(n));
    }
  }
  std::vector<std::string> roots;
  for (std::size_t i = 0; i < levels[static_cast<std::size_t>(top)].size(); ++i) roots.push_back(id_of(top, i));
  return TreeIndex(std::move(nodes), std::move(roots));
}

/// Flat index: every leaf directly under a single root.
inline TreeIndex make_flat_index(const ArtifactLibrary& lib, const Embedder& embedder) {
  std::vector<TreeNode> nodes;
  std::vector<std::string> descriptions;
  for (const auto& a : lib) descriptions.push_back(a.description);
  auto vecs = embedder.embed(descriptions);
  TreeNode root;
  root.id = "L1-0";
  root.level = 1;
  root.kind = NodeKind::internal;
  root.name = "all";
  root.summary = "every artifact";
  root.embedding = embedder.embed_one(root.summary);
  for (std::size_t i = 0; i < lib.size(); ++i) {
    TreeNode leaf;
    leaf.id = "L0-" + std::to_string(i);
    leaf.level = 0;
    leaf.kind = NodeKind::leaf;
    leaf.name = lib[i].name;
    leaf.summary = lib[i].description;
    leaf.embedding = vecs[i];
    leaf.artifact_id = lib[i].id;
    root.children.push_back(leaf.id);
    nodes.push_back(std::move(leaf));
  }
  nodes.push_back(std::move(root));
  return TreeIndex(std::move(nodes), {"L1-0"});
}

// ---------------------------------------------------------------------------
// Gaussian blobs
// ---------------------------------------------------------------------------

struct Blobs {
  cluster::Matrix data;
  std::vector<int> labels;
  cluster::Matrix centers;
};

/// `per_cluster` points around each center with isotropic noise `sigma`.
inline Blobs make_blobs(const cluster::Matrix& centers, std::size_t per_cluster, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sigma);
  const auto k = centers.rows(), d = centers.cols();
  Blobs b;
  b.centers = centers;
  b.data.resize(k * static_cast<Eigen::Index>(per_cluster), d);
  Eigen::Index row = 0;
  for (Eigen::Index c = 0; c < k; ++c)
    for (std::size_t i = 0; i < per_cluster; ++i, ++row) {
      for (Eigen::Index j = 0; j < d; ++j) b.data(row, j) = centers(c, j) + g(rng);
      b.labels.push_back(static_cast<int>(c));
    }
  return b;
}

/// Three 5-D centers with pairwise distance >= 8.
inline cluster::Matrix three_centers_5d() {
  cluster::Matrix c(3, 5);
  c << 0, 0, 0, 0, 0,  //
      8, 8, 0, 0, 0,   //
      0, 8, 8, 8, 0;
  return c;
}

/// Fraction of points whose argmax component maps to their true label under
/// the best one-to-one matching of components to labels (brute force over permutations).
inline double matched_accuracy(const std::vector<int>& labels, const std::vector<std::size_t>& assigned, std::size_t k) {
  std::vector<std::size_t> perm(k);
  for (std::size_t i = 0; i < k; ++i) perm[i] = i;
  double best = 0;
  do {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (assigned[i] < k && perm[assigned[i]] == static_cast<std::size_t>(labels[i])) ++hits;
    best = std::max(best, static_cast<double>(hits) / static_cast<double>(labels.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

inline std::vector<std::size_t> argmax_assignment(const cluster::SoftAssignment& a) {
  std::vector<std::size_t> out;
  for (Eigen::Index i = 0; i < a.responsibilities.rows(); ++i) {
    Eigen::Index arg;
    a.responsibilities.row(i).maxCoeff(&arg);
    out.push_back(static_cast<std::size_t>(arg));
  }
  return out;
}

}  // namespace treerec::testing
