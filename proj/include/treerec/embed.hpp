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
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "treerec/errors.hpp"
#include "treerec/text.hpp"

namespace treerec {

/// Dense vector with a finite-entries invariant. Vectors built through
/// `Embedding::normalized` have unit Euclidean norm (within 1e-6).
class Embedding {
 public:
  Embedding() = default;

  static Embedding raw(std::vector<double> values) {
    check_finite(values);
    return Embedding(std::move(values), false);
  }

  /// L2-normalizes `values`. A zero vector cannot be normalized and is rejected.
  static Embedding normalized(std::vector<double> values) {
    check_finite(values);
    double norm = 0;
    for (double v : values) norm += v * v;
    norm = std::sqrt(norm);
    if (!(norm > 0)) throw ValidationError("cannot normalize a zero vector");
    for (double& v : values) v /= norm;
    return Embedding(std::move(values), true);
  }

  /// Accepts values that are already unit-norm (e.g. read back from an index)
  /// without rescaling them, so stored bits survive a round trip.
  static Embedding from_normalized(std::vector<double> values) {
    check_finite(values);
    double norm = 0;
    for (double v : values) norm += v * v;
    if (std::abs(std::sqrt(norm) - 1.0) > 1e-6) throw ValidationError("embedding is not unit-norm");
    return Embedding(std::move(values), true);
  }

  std::size_t dim() const { return values_.size(); }
  bool is_normalized() const { return normalized_; }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  double norm() const {
    double s = 0;
    for (double v : values_) s += v * v;
    return std::sqrt(s);
  }

  bool operator==(const Embedding&) const = default;

 private:
  Embedding(std::vector<double> values, bool normalized)
      : values_(std::move(values)), normalized_(normalized) {}

  static void check_finite(const std::vector<double>& values) {
    if (values.empty()) throw ValidationError("embedding must have positive dimension");
    for (double v : values)
      if (!std::isfinite(v)) throw ValidationError("embedding contains a non-finite entry");
  }

  std::vector<double> values_;
  bool normalized_ = false;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionMismatch(a.size(), b.size());
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Cosine similarity in [-1, 1]; 0 when either side is the zero vector.
inline double cosine(const Embedding& a, const Embedding& b) {
  double d = dot(a.values(), b.values());
  if (a.is_normalized() && b.is_normalized()) return std::clamp(d, -1.0, 1.0);
  double na = a.norm(), nb = b.norm();
  if (na == 0 || nb == 0) return 0;
  return std::clamp(d / (na * nb), -1.0, 1.0);
}

struct ScoredId {
  std::string id;
  double score = 0;

  bool operator==(const ScoredId&) const = default;
};

/// Descending score, then ascending id.
inline bool ranks_before(const ScoredId& a, const ScoredId& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

struct PoolEntry {
  std::string_view id;
  std::reference_wrapper<const Embedding> embedding;
};

/// The `k` pool entries most similar to `query`, ties broken by ascending id.
inline std::vector<ScoredId> top_k_sim(const Embedding& query, std::span<const PoolEntry> pool,
                                       std::size_t k) {
  std::vector<ScoredId> scored;
  scored.reserve(pool.size());
  for (const auto& e : pool)
    scored.push_back({std::string(e.id), cosine(query, e.embedding.get())});
  auto keep = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep),
                    scored.end(), ranks_before);
  scored.resize(keep);
  return scored;
}

/// Text encoder. Implementations return one normalized vector of `dim()` per input.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<Embedding> embed(std::span<const std::string> texts) const = 0;
  virtual std::size_t dim() const = 0;
  /// Stable provider description recorded in index provenance.
  virtual nlohmann::json describe() const = 0;

  Embedding embed_one(const std::string& text) const {
    auto v = embed(std::span<const std::string>(&text, 1));
    return std::move(v.front());
  }
};

/// Offline encoder: word 1-3 grams plus in-word character trigrams, hashed
/// into `dim` signed buckets and L2-normalized. Deterministic in (text, seed).
class HashedEmbedder final : public Embedder {
 public:
  explicit HashedEmbedder(std::size_t dim = 256, std::uint64_t seed = 0) : dim_(dim), seed_(seed) {
    if (dim == 0) throw std::invalid_argument("HashedEmbedder: dim must be positive");
  }

  std::size_t dim() const override { return dim_; }
  std::uint64_t seed() const { return seed_; }

  nlohmann::json describe() const override {
    return {{"provider", "hashed-local"}, {"dim", dim_}, {"seed", seed_}};
  }

  std::vector<Embedding> embed(std::span<const std::string> texts) const override {
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_text(t));
    return out;
  }

  Embedding embed_text(std::string_view s) const {
    std::vector<double> v(dim_, 0.0);
    auto tokens = text::tokenize(s);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      add_feature(v, "w\x1f" + tokens[i], 1.0);
      if (i + 1 < tokens.size()) add_feature(v, "b\x1f" + tokens[i] + ' ' + tokens[i + 1], 0.7);
      if (i + 2 < tokens.size())
        add_feature(v, "t\x1f" + tokens[i] + ' ' + tokens[i + 1] + ' ' + tokens[i + 2], 0.5);
      std::string padded = "^" + tokens[i] + "$";
      for (std::size_t c = 0; c + 3 <= padded.size(); ++c)
        add_feature(v, "c\x1f" + padded.substr(c, 3), 0.25);
    }
    bool all_zero = std::all_of(v.begin(), v.end(), [](double x) { return x == 0; });
    if (all_zero) {
      // Token-free text (or exact cancellation): fixed seed-dependent unit vector.
      std::fill(v.begin(), v.end(), 0.0);
      v[hash("\x1f" "empty") % dim_] = 1.0;
    }
    return Embedding::normalized(std::move(v));
  }

 private:
  std::uint64_t hash(std::string_view feature) const {
    // FNV-1a over seed bytes + feature, finished with splitmix64.
    std::uint64_t h = 1469598103934665603ULL;
    for (int i = 0; i < 8; ++i) {
      h ^= (seed_ >> (8 * i)) & 0xffU;
      h *= 1099511628211ULL;
    }
    for (unsigned char c : feature) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h += 0x9e3779b97f4a7c15ULL;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
    return h ^ (h >> 31);
  }

  void add_feature(std::vector<double>& v, const std::string& feature, double weight) const {
    auto h = hash(feature);
    double sign = (h >> 63) ? -1.0 : 1.0;
    v[(h & 0x7fffffffffffffffULL) % dim_] += sign * weight;
  }

  std::size_t dim_;
  std::uint64_t seed_;
};

}  // namespace treerec
