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

// Comparative retrieval solutions. Each scores every artifact in the library
// for an intent and returns a total ranking (descending score, ties by
// ascending artifact id).
//
//   tf-idf   w(t, d) = tf(t, d) * ln((1 + n) / (1 + df(t))), cosine similarity
//   bm25     idf(t) = ln(1 + (n - df + 0.5) / (df + 0.5)),
//            score = sum over distinct query terms of
//                    idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * |d| / avgdl))
//   lsi      truncated SVD of the tf-idf matrix, query folded in, cosine
//   jsd      1 - JSD(query, doc) over tf-idf mass distributions, log base 2
//   wordavg  cosine of mean word vectors

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "treerec/catalog.hpp"
#include "treerec/detail/parallel.hpp"
#include "treerec/errors.hpp"
#include "treerec/llm.hpp"
#include "treerec/log.hpp"
#include "treerec/ranking.hpp"
#include "treerec/search.hpp"
#include "treerec/text.hpp"

namespace treerec::baselines {

struct TermIndexOptions {
  // Whether artifact names are tokenized alongside descriptions.
  bool include_names = false;
};

/// Sparse term statistics over a library. Vocabulary order is first occurrence.
struct TermIndex {
  struct Posting {
    std::size_t term;
    double count;
  };

  std::vector<std::string> doc_ids;
  std::vector<std::string> terms;
  std::unordered_map<std::string, std::size_t> vocabulary;
  std::vector<std::vector<Posting>> doc_terms;  // per document, ascending term index
  std::vector<double> doc_lengths;               // token counts
  std::vector<std::size_t> df;
  std::size_t n_docs = 0;

  std::size_t vocab_size() const { return terms.size(); }

  double average_doc_length() const {
    double s = 0;
    for (double l : doc_lengths) s += l;
    return n_docs ? s / static_cast<double>(n_docs) : 0;
  }

  double tfidf_idf(std::size_t term) const {
    return std::log((1.0 + static_cast<double>(n_docs)) / (1.0 + static_cast<double>(df[term])));
  }

  double bm25_idf(std::size_t term) const {
    const double n = static_cast<double>(n_docs), d = static_cast<double>(df[term]);
    return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
  }

  /// In-vocabulary query term counts, ascending term index.
  std::vector<Posting> query_terms(std::string_view intent) const {
    std::map<std::size_t, double> counts;
    for (const auto& tok : text::tokenize(intent))
      if (auto it = vocabulary.find(tok); it != vocabulary.end()) counts[it->second] += 1;
    std::vector<Posting> out;
    for (auto [t, c] : counts) out.push_back({t, c});
    return out;
  }
};

inline std::string document_text(const Artifact& a, const TermIndexOptions& opts) {
  return opts.include_names ? a.name + " " + a.description : a.description;
}

inline TermIndex build_term_index(const ArtifactLibrary& lib, const TermIndexOptions& opts = {}) {
  if (lib.empty()) throw std::invalid_argument("build_term_index: empty library");
  TermIndex idx;
  idx.n_docs = lib.size();
  for (const auto& a : lib) {
    idx.doc_ids.push_back(a.id);
    std::map<std::size_t, double> counts;
    auto tokens = text::tokenize(document_text(a, opts));
    for (const auto& tok : tokens) {
      auto [it, inserted] = idx.vocabulary.emplace(tok, idx.terms.size());
      if (inserted) {
        idx.terms.push_back(tok);
        idx.df.push_back(0);
      }
      counts[it->second] += 1;
    }
    std::vector<TermIndex::Posting> postings;
    for (auto [t, c] : counts) {
      postings.push_back({t, c});
      ++idx.df[t];
    }
    idx.doc_terms.push_back(std::move(postings));
    idx.doc_lengths.push_back(static_cast<double>(tokens.size()));
  }
  return idx;
}

// ---------------------------------------------------------------------------
// TF-IDF
// ---------------------------------------------------------------------------

inline std::vector<TermIndex::Posting> tfidf_weights(const TermIndex& idx, std::vector<TermIndex::Posting> counts) {
  for (auto& p : counts) p.count *= idx.tfidf_idf(p.term);
  return counts;
}

inline double sparse_cosine(const std::vector<TermIndex::Posting>& a, const std::vector<TermIndex::Posting>& b) {
  double dot = 0, na = 0, nb = 0;
  for (const auto& p : a) na += p.count * p.count;
  for (const auto& p : b) nb += p.count * p.count;
  if (na == 0 || nb == 0) return 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].term == b[j].term) {
      dot += a[i].count * b[j].count;
      ++i;
      ++j;
    } else if (a[i].term < b[j].term) {
      ++i;
    } else {
      ++j;
    }
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

/// Raw scores aligned with `idx.doc_ids`.
inline std::vector<double> tfidf_scores(const TermIndex& idx, std::string_view intent) {
  auto q = tfidf_weights(idx, idx.query_terms(intent));
  std::vector<double> out;
  out.reserve(idx.n_docs);
  for (const auto& d : idx.doc_terms) out.push_back(sparse_cosine(q, tfidf_weights(idx, d)));
  return out;
}

inline RankedList score_tfidf(const TermIndex& idx, std::string_view intent) {
  return rank_by_scores(intent, idx.doc_ids, tfidf_scores(idx, intent));
}

// ---------------------------------------------------------------------------
// BM25
// ---------------------------------------------------------------------------

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

inline std::vector<double> bm25_scores(const TermIndex& idx, std::string_view intent, const Bm25Params& p = {}) {
  auto q = idx.query_terms(intent);
  const double avgdl = idx.average_doc_length();
  std::vector<double> out(idx.n_docs, 0.0);
  for (std::size_t d = 0; d < idx.n_docs; ++d) {
    const auto& postings = idx.doc_terms[d];
    const double norm = p.k1 * (1 - p.b + p.b * (avgdl > 0 ? idx.doc_lengths[d] / avgdl : 0));
    double s = 0;
    for (const auto& qt : q) {
      auto it = std::lower_bound(postings.begin(), postings.end(), qt.term,
                                 [](const TermIndex::Posting& x, std::size_t t) { return x.term < t; });
      if (it == postings.end() || it->term != qt.term) continue;
      s += qt.count * idx.bm25_idf(qt.term) * it->count * (p.k1 + 1) / (it->count + norm);
    }
    out[d] = s;
  }
  return out;
}

inline RankedList score_bm25(const TermIndex& idx, std::string_view intent, const Bm25Params& p = {}) {
  return rank_by_scores(intent, idx.doc_ids, bm25_scores(idx, intent, p));
}

// ---------------------------------------------------------------------------
// LSI
// ---------------------------------------------------------------------------

/// Truncated SVD of the (documents x terms) tf-idf matrix A, computed from the
/// eigendecomposition of A A^T. Document coordinates are U_r S_r; a query q
/// folds in as q V_r with V_r = A^T U_r S_r^-1. Zero singular values are dropped.
class LsiModel {
 public:
  LsiModel(const TermIndex& idx, std::size_t rank) : idx_(&idx) {
    const auto n = static_cast<Eigen::Index>(idx.n_docs);
    const auto v = static_cast<Eigen::Index>(idx.vocab_size());
    std::size_t max_rank = static_cast<std::size_t>(std::min(n, v));
    if (rank == 0) throw std::invalid_argument("lsi: rank must be positive");
    if (rank > max_rank) {
      log().warn("lsi: rank {} exceeds min(n_docs, vocabulary) = {}; clamping", rank, max_rank);
      rank = max_rank;
    }
    rank_ = rank;
    if (max_rank == 0) return;

    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, v);
    for (Eigen::Index d = 0; d < n; ++d)
      for (const auto& p : tfidf_weights(idx, idx.doc_terms[static_cast<std::size_t>(d)]))
        a(d, static_cast<Eigen::Index>(p.term)) = p.count;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a * a.transpose());
    const double top = std::max(0.0, eig.eigenvalues()(n - 1));
    const double cutoff = 1e-12 * std::max(1.0, top);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(rank_); ++c) {
      Eigen::Index col = n - 1 - c;
      if (eig.eigenvalues()(col) > cutoff) keep.push_back(col);
    }
    const auto r = static_cast<Eigen::Index>(keep.size());
    doc_coords_.resize(n, r);
    term_basis_.resize(v, r);
    for (Eigen::Index c = 0; c < r; ++c) {
      double sigma = std::sqrt(eig.eigenvalues()(keep[static_cast<std::size_t>(c)]));
      Eigen::VectorXd u = eig.eigenvectors().col(keep[static_cast<std::size_t>(c)]);
      doc_coords_.col(c) = u * sigma;
      term_basis_.col(c) = a.transpose() * u / sigma;
    }
  }

  std::size_t rank() const { return rank_; }
  std::size_t effective_rank() const { return static_cast<std::size_t>(term_basis_.cols()); }

  std::vector<double> scores(std::string_view intent) const {
    Eigen::VectorXd q = Eigen::VectorXd::Zero(term_basis_.cols());
    for (const auto& p : tfidf_weights(*idx_, idx_->query_terms(intent)))
      q += p.count * term_basis_.row(static_cast<Eigen::Index>(p.term)).transpose();
    std::vector<double> out(idx_->n_docs, 0.0);
    const double qn = q.norm();
    if (qn == 0) return out;
    for (Eigen::Index d = 0; d < doc_coords_.rows(); ++d) {
      double dn = doc_coords_.row(d).norm();
      // Quantized to 1e-12 so rounding noise cannot reorder exact ties.
      if (dn > 0) out[static_cast<std::size_t>(d)] = std::round(doc_coords_.row(d).dot(q) / (dn * qn) * 1e12) / 1e12;
    }
    return out;
  }

 private:
  const TermIndex* idx_;
  std::size_t rank_ = 0;
  Eigen::MatrixXd doc_coords_;  // n_docs x r
  Eigen::MatrixXd term_basis_;  // vocab x r
};

inline std::size_t default_lsi_rank(const TermIndex& idx) {
  return std::max<std::size_t>(1, std::min<std::size_t>(100, idx.n_docs > 1 ? idx.n_docs - 1 : 1));
}

inline RankedList score_lsi(const TermIndex& idx, std::string_view intent, std::size_t rank) {
  return rank_by_scores(intent, idx.doc_ids, LsiModel(idx, rank).scores(intent));
}

// ---------------------------------------------------------------------------
// Jensen-Shannon
// ---------------------------------------------------------------------------

/// JSD in bits between two probability vectors; 0 log 0 = 0.
inline double jensen_shannon(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DimensionMismatch(p.size(), q.size());
  double js = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0) js += 0.5 * p[i] * std::log2(p[i] / m);
    if (q[i] > 0) js += 0.5 * q[i] * std::log2(q[i] / m);
  }
  return std::clamp(js, 0.0, 1.0);
}

namespace detail {

/// Probability mass of a non-negative sparse vector over `support`; zero mass
/// becomes uniform over the whole vocabulary (so `support` must then be all terms).
inline std::vector<double> mass_over(const std::vector<TermIndex::Posting>& w, const std::vector<std::size_t>& support) {
  double total = 0;
  for (const auto& p : w) total += p.count;
  std::vector<double> out(support.size(), 0.0);
  if (total <= 0) {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(support.size()));
    return out;
  }
  std::size_t j = 0;
  for (std::size_t i = 0; i < support.size(); ++i) {
    while (j < w.size() && w[j].term < support[i]) ++j;
    if (j < w.size() && w[j].term == support[i]) out[i] = w[j].count / total;
  }
  return out;
}

inline bool has_mass(const std::vector<TermIndex::Posting>& w) {
  return std::any_of(w.begin(), w.end(), [](const auto& p) { return p.count > 0; });
}

}  // namespace detail

inline std::vector<double> jsd_scores(const TermIndex& idx, std::string_view intent) {
  auto q = tfidf_weights(idx, idx.query_terms(intent));
  std::vector<std::size_t> all(idx.vocab_size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::vector<double> out;
  out.reserve(idx.n_docs);
  for (const auto& counts : idx.doc_terms) {
    auto d = tfidf_weights(idx, counts);
    std::vector<std::size_t> support;
    if (!detail::has_mass(q) || !detail::has_mass(d)) {
      support = all;
    } else {
      for (const auto& p : q)
        if (p.count > 0) support.push_back(p.term);
      for (const auto& p : d)
        if (p.count > 0) support.push_back(p.term);
      std::sort(support.begin(), support.end());
      support.erase(std::unique(support.begin(), support.end()), support.end());
    }
    if (support.empty()) {
      out.push_back(1.0);
      continue;
    }
    auto pq = detail::mass_over(q, support);
    auto pd = detail::mass_over(d, support);
    out.push_back(1.0 - jensen_shannon(pq, pd));
  }
  return out;
}

inline RankedList score_jsd(const TermIndex& idx, std::string_view intent) {
  return rank_by_scores(intent, idx.doc_ids, jsd_scores(idx, intent));
}

// ---------------------------------------------------------------------------
// Averaged word vectors
// ---------------------------------------------------------------------------

struct WordVectorTable {
  std::size_t dim = 0;
  std::unordered_map<std::string, std::vector<double>> vectors;

  const std::vector<double>* find(const std::string& word) const {
    auto it = vectors.find(word);
    return it == vectors.end() ? nullptr : &it->second;
  }
};

/// Plain-text vectors: `word v1 ... vd` per line, optionally preceded by a
/// `count dim` header line.
inline WordVectorTable parse_word_vectors(std::istream& in, const std::string& source = "<stream>") {
  auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
  WordVectorTable table;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (text::trim(raw).empty()) continue;
    std::istringstream ls(raw);
    std::vector<std::string> fields;
    for (std::string f; ls >> f;) fields.push_back(f);
    if (line == 1 && fields.size() == 2 &&
        std::all_of(fields[0].begin(), fields[0].end(), is_digit) &&
        std::all_of(fields[1].begin(), fields[1].end(), is_digit)) {
      table.dim = std::stoul(fields[1]);
      continue;
    }
    if (fields.size() < 2) throw ParseError(source, line, "expected a word followed by its vector");
    std::vector<double> v;
    v.reserve(fields.size() - 1);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      std::size_t used = 0;
      double x = 0;
      try {
        x = std::stod(fields[i], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != fields[i].size() || !std::isfinite(x))
        throw ParseError(source, line, "invalid number '" + fields[i] + "'");
      v.push_back(x);
    }
    if (table.dim == 0) table.dim = v.size();
    if (v.size() != table.dim)
      throw ParseError(source, line, "vector has " + std::to_string(v.size()) + " values, expected " + std::to_string(table.dim));
    table.vectors.emplace(fields[0], std::move(v));
  }
  if (table.vectors.empty()) throw ParseError(source, 0, "no word vectors found");
  return table;
}

inline WordVectorTable load_word_vectors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return parse_word_vectors(in, path);
}

/// Mean of the in-table token vectors; zero when no token is in the table.
inline std::vector<double> average_word_vector(const WordVectorTable& table, std::string_view s) {
  std::vector<double> mean(table.dim, 0.0);
  std::size_t hits = 0;
  for (const auto& tok : text::tokenize(s)) {
    if (auto* v = table.find(tok)) {
      for (std::size_t i = 0; i < table.dim; ++i) mean[i] += (*v)[i];
      ++hits;
    }
  }
  if (hits)
    for (double& x : mean) x /= static_cast<double>(hits);
  return mean;
}

inline double dense_cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 0;
  return d / (std::sqrt(na) * std::sqrt(nb));
}

/// Precomputed document vectors for one library.
class WordAverageModel {
 public:
  WordAverageModel(const WordVectorTable& table, const ArtifactLibrary& lib, const TermIndexOptions& opts = {})
      : table_(&table) {
    for (const auto& a : lib) {
      ids_.push_back(a.id);
      docs_.push_back(average_word_vector(table, document_text(a, opts)));
    }
  }

  std::vector<double> scores(std::string_view intent) const {
    auto q = average_word_vector(*table_, intent);
    std::vector<double> out;
    out.reserve(docs_.size());
    for (const auto& d : docs_) out.push_back(dense_cosine(q, d));
    return out;
  }

  const std::vector<std::string>& ids() const { return ids_; }

 private:
  const WordVectorTable* table_;
  std::vector<std::string> ids_;
  std::vector<std::vector<double>> docs_;
};

inline RankedList score_wordavg(const WordVectorTable& table, const ArtifactLibrary& lib, std::string_view intent) {
  WordAverageModel model(table, lib);
  return rank_by_scores(intent, model.ids(), model.scores(intent));
}

// ---------------------------------------------------------------------------
// Two-stage LLM baseline: score every artifact 0-100, then rank the top
// fraction comparatively. The prompts below are this project's own.
// ---------------------------------------------------------------------------

struct TwoStageConfig {
  double subset_fraction = 0.10;
  std::size_t final_k = 10;
  std::size_t max_in_flight = 4;
  int retry_budget = 2;
};

inline std::string render_scoring_prompt(std::string_view intent, const Artifact& a) {
  std::string out =
      "Rate how well the following software artifact satisfies the development intent, on a scale from 0 to 100, "
      "where 100 means a perfect match.\n\nDevelopment Intent: ";
  out += text::flatten_line(intent);
  out += "\n\nArtifact: <";
  out += a.id;
  out += ", ";
  out += text::flatten_line(a.description);
  out += ">\n\nPlease only output the score as a number.";
  return out;
}

inline std::string render_selection_prompt(std::string_view intent, std::span<const RerankCandidate> candidates) {
  std::string out =
      "Compare the candidate artifacts below against the development intent and order them from the most suitable to "
      "the least suitable.\n\nDevelopment Intent: ";
  out += text::flatten_line(intent);
  out += "\n\nCandidates:\n";
  for (const auto& c : candidates) out += "<" + c.id + ", " + text::flatten_line(c.description) + ">\n";
  out += "\nPlease only output the IDs in a list format.";
  return out;
}

/// First number in the response, clamped to [0, 100]; nullopt when there is none.
inline std::optional<double> parse_score(std::string_view response) {
  for (std::size_t i = 0; i < response.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(response[i]))) continue;
    std::size_t j = i;
    while (j < response.size() && (std::isdigit(static_cast<unsigned char>(response[j])) || response[j] == '.')) ++j;
    try {
      return std::clamp(std::stod(std::string(response.substr(i, j - i))), 0.0, 100.0);
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  return std::nullopt;
}

inline std::size_t subset_size(double fraction, std::size_t n) {
  auto s = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
  return std::clamp<std::size_t>(s, 1, n);
}

struct TwoStageResult {
  RankedList ranking;
  std::vector<double> stage1_scores;         // library order
  std::vector<std::string> candidate_ids;    // stage-2 input, stage-1 order
};

inline TwoStageResult llm_two_stage_detailed(const ArtifactLibrary& lib, std::string_view intent, ChatModel& llm,
                                             const TwoStageConfig& cfg = {}) {
  if (lib.empty()) throw std::invalid_argument("llm_two_stage: empty library");
  TwoStageResult out;
  out.stage1_scores = ::treerec::detail::bounded_map(lib.size(), cfg.max_in_flight, [&](std::size_t i) {
    try {
      if (auto s = parse_score(llm.complete(render_scoring_prompt(intent, lib[i])))) return *s;
    } catch (const TransportError& e) {
      log().warn("scoring '{}' failed: {}", lib[i].id, e.what());
    }
    return 0.0;
  });

  std::vector<std::string> ids;
  for (const auto& a : lib) ids.push_back(a.id);
  RankedList stage1 = rank_by_scores(intent, ids, out.stage1_scores);

  const std::size_t subset = subset_size(cfg.subset_fraction, lib.size());
  RankedList candidates = stage1;
  candidates.truncate(subset);
  out.candidate_ids = candidates.ids();

  std::vector<RerankCandidate> described;
  for (const auto& id : out.candidate_ids) described.push_back({id, lib.find(id)->description});

  RankedList ranked = candidates;
  try {
    std::vector<std::string> order;
    auto prompt = render_selection_prompt(intent, described);
    for (int attempt = 0; attempt <= cfg.retry_budget && order.empty(); ++attempt)
      order = parse_id_list(llm.complete(prompt), out.candidate_ids);
    if (!order.empty()) {
      std::unordered_map<std::string, RankedEntry> by_id;
      for (const auto& e : candidates.entries) by_id[e.artifact_id] = e;
      std::unordered_set<std::string> placed(order.begin(), order.end());
      for (const auto& id : out.candidate_ids)
        if (!placed.count(id)) order.push_back(id);
      ranked.entries.clear();
      for (const auto& id : order) ranked.entries.push_back(by_id.at(id));
    }
  } catch (const TransportError& e) {
    log().warn("ranking stage failed ({}); keeping scoring order", e.what());
  }

  // Candidates first, then the rest of the scoring order.
  for (std::size_t i = subset; i < stage1.entries.size(); ++i) ranked.entries.push_back(stage1.entries[i]);
  ranked.truncate(cfg.final_k);
  out.ranking = std::move(ranked);
  return out;
}

inline RankedList llm_two_stage(const ArtifactLibrary& lib, std::string_view intent, ChatModel& llm,
                                const TwoStageConfig& cfg = {}) {
  return llm_two_stage_detailed(lib, intent, llm, cfg).ranking;
}

}  // namespace treerec::baselines
