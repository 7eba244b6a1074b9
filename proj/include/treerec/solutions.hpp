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

// Named retrieval solutions for the benchmark runner and the CLI.

#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "treerec/baselines.hpp"
#include "treerec/catalog.hpp"
#include "treerec/embed.hpp"
#include "treerec/llm.hpp"
#include "treerec/ranking.hpp"
#include "treerec/search.hpp"
#include "treerec/tree.hpp"

namespace treerec {

class TfidfRetriever final : public Retriever {
 public:
  explicit TfidfRetriever(const ArtifactLibrary& lib, baselines::TermIndexOptions opts = {})
      : idx_(baselines::build_term_index(lib, opts)) {}
  std::string name() const override { return "tfidf"; }
  RankedList retrieve(std::string_view intent) const override { return baselines::score_tfidf(idx_, intent); }

 private:
  baselines::TermIndex idx_;
};

class Bm25Retriever final : public Retriever {
 public:
  explicit Bm25Retriever(const ArtifactLibrary& lib, baselines::TermIndexOptions opts = {}, baselines::Bm25Params p = {})
      : idx_(baselines::build_term_index(lib, opts)), params_(p) {}
  std::string name() const override { return "bm25"; }
  RankedList retrieve(std::string_view intent) const override { return baselines::score_bm25(idx_, intent, params_); }

 private:
  baselines::TermIndex idx_;
  baselines::Bm25Params params_;
};

class LsiRetriever final : public Retriever {
 public:
  /// rank 0 selects min(100, n - 1).
  explicit LsiRetriever(const ArtifactLibrary& lib, std::size_t rank = 0, baselines::TermIndexOptions opts = {})
      : idx_(std::make_unique<baselines::TermIndex>(baselines::build_term_index(lib, opts))),
        model_(*idx_, rank ? rank : baselines::default_lsi_rank(*idx_)) {}
  std::string name() const override { return "lsi"; }
  RankedList retrieve(std::string_view intent) const override {
    return rank_by_scores(intent, idx_->doc_ids, model_.scores(intent));
  }

 private:
  std::unique_ptr<baselines::TermIndex> idx_;  // model_ points into it
  baselines::LsiModel model_;
};

class JsdRetriever final : public Retriever {
 public:
  explicit JsdRetriever(const ArtifactLibrary& lib, baselines::TermIndexOptions opts = {})
      : idx_(baselines::build_term_index(lib, opts)) {}
  std::string name() const override { return "jsd"; }
  RankedList retrieve(std::string_view intent) const override { return baselines::score_jsd(idx_, intent); }

 private:
  baselines::TermIndex idx_;
};

class WordAverageRetriever final : public Retriever {
 public:
  WordAverageRetriever(std::string name, baselines::WordVectorTable table, const ArtifactLibrary& lib,
                       baselines::TermIndexOptions opts = {})
      : name_(std::move(name)),
        table_(std::make_unique<baselines::WordVectorTable>(std::move(table))),
        model_(*table_, lib, opts) {}
  std::string name() const override { return name_; }
  RankedList retrieve(std::string_view intent) const override {
    return rank_by_scores(intent, model_.ids(), model_.scores(intent));
  }

 private:
  std::string name_;
  std::unique_ptr<baselines::WordVectorTable> table_;
  baselines::WordAverageModel model_;
};

class LlmTwoStageRetriever final : public Retriever {
 public:
  LlmTwoStageRetriever(const ArtifactLibrary& lib, ChatModel& llm, baselines::TwoStageConfig cfg = {})
      : lib_(lib), llm_(llm), cfg_(cfg) {}
  std::string name() const override { return "llm"; }
  RankedList retrieve(std::string_view intent) const override { return baselines::llm_two_stage(lib_, intent, llm_, cfg_); }

 private:
  const ArtifactLibrary& lib_;
  ChatModel& llm_;
  baselines::TwoStageConfig cfg_;
};

class TreeRecRetriever final : public Retriever {
 public:
  TreeRecRetriever(const TreeIndex& tree, const Embedder& embedder, SearchConfig cfg, ChatModel* llm = nullptr)
      : tree_(tree), embedder_(embedder), cfg_(cfg), llm_(llm) {
    cfg_.validate();
  }
  std::string name() const override { return "treerec"; }
  RankedList retrieve(std::string_view intent) const override { return recommend(tree_, intent, cfg_, embedder_, llm_); }

 private:
  const TreeIndex& tree_;
  const Embedder& embedder_;
  SearchConfig cfg_;
  ChatModel* llm_;
};

class UnknownSolution : public std::invalid_argument {
 public:
  explicit UnknownSolution(const std::string& name) : std::invalid_argument("unknown solution '" + name + "'") {}
};

inline const std::vector<std::string>& solution_names() {
  static const std::vector<std::string> names = {"tfidf", "bm25", "lsi", "jsd", "word2vec", "fasttext", "llm", "treerec"};
  return names;
}

/// Everything a solution may need; only the parts a given solution uses must be set.
struct SolutionContext {
  const ArtifactLibrary* library = nullptr;
  baselines::TermIndexOptions term_options;
  std::size_t lsi_rank = 0;
  std::string word_vectors_path;
  ChatModel* llm = nullptr;
  baselines::TwoStageConfig two_stage;
  const TreeIndex* tree = nullptr;
  const Embedder* embedder = nullptr;
  SearchConfig search;
};

inline bool is_registered_solution(std::string_view name) {
  for (const auto& n : solution_names())
    if (n == name) return true;
  return false;
}

inline std::unique_ptr<Retriever> make_solution(const std::string& name, const SolutionContext& ctx) {
  if (!is_registered_solution(name)) throw UnknownSolution(name);
  if (name == "treerec") {
    if (!ctx.tree || !ctx.embedder) throw std::invalid_argument("treerec needs an index and an embedder");
    if (ctx.search.rerank && !ctx.llm) throw std::invalid_argument("treerec re-ranking needs a chat model");
    return std::make_unique<TreeRecRetriever>(*ctx.tree, *ctx.embedder, ctx.search, ctx.llm);
  }
  if (!ctx.library) throw std::invalid_argument(name + " needs an artifact library");
  const auto& lib = *ctx.library;
  if (name == "tfidf") return std::make_unique<TfidfRetriever>(lib, ctx.term_options);
  if (name == "bm25") return std::make_unique<Bm25Retriever>(lib, ctx.term_options);
  if (name == "lsi") return std::make_unique<LsiRetriever>(lib, ctx.lsi_rank, ctx.term_options);
  if (name == "jsd") return std::make_unique<JsdRetriever>(lib, ctx.term_options);
  if (name == "word2vec" || name == "fasttext") {
    if (ctx.word_vectors_path.empty()) throw std::invalid_argument(name + " needs a word-vector file");
    return std::make_unique<WordAverageRetriever>(name, baselines::load_word_vectors(ctx.word_vectors_path), lib,
                                                  ctx.term_options);
  }
  if (!ctx.llm) throw std::invalid_argument("llm needs a chat model");
  return std::make_unique<LlmTwoStageRetriever>(lib, *ctx.llm, ctx.two_stage);
}

}  // namespace treerec
