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


#include <algorithm>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "support/fixtures.hpp"
#include "treerec/eval.hpp"
#include "treerec/search.hpp"

namespace treerec {
namespace {

/// Ids of the `<id, description>` lines of a re-rank prompt, in prompt order.
std::vector<std::string> prompt_ids(const std::string& prompt) {
  std::vector<std::string> ids;
  std::istringstream in(prompt);
  std::string line;
  while (std::getline(in, line))
    if (line.size() > 2 && line.front() == '<' && line.back() == '>') ids.push_back(line.substr(1, line.find(", ") - 1));
  return ids;
}

std::string identity_reply(const std::string& prompt) {
  std::string out = "[";
  for (const auto& id : prompt_ids(prompt)) out += (out.size() > 1 ? ", " : "") + id;
  return out + "]";
}

/// Exhaustive cosine ranking over the leaves, ties by ascending node id.
std::vector<std::string> brute_force(const TreeIndex& t, const Embedding& q, std::size_t k) {
  std::vector<std::pair<double, const TreeNode*>> all;
  for (const auto& n : t.nodes())
    if (n.is_leaf()) all.push_back({cosine(q, n.embedding), &n});
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second->id < b.second->id;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back(*all[i].second->artifact_id);
  return out;
}

ArtifactLibrary fixture_library() { return load_library(testing::data_path("fixtures/catalog.jsonl")); }

RankedList list_of(std::vector<std::string> ids) {
  RankedList l;
  l.intent = "q";
  double s = 1.0;
  for (auto& id : ids) {
    l.entries.push_back({std::move(id), s});
    s -= 0.1;
  }
  return l;
}

std::vector<RerankCandidate> describe(const RankedList& l) {
  std::vector<RerankCandidate> out;
  for (const auto& e : l.entries) out.push_back({e.artifact_id, "does " + e.artifact_id});
  return out;
}

TEST(SearchConfig, Validation) {
  EXPECT_NO_THROW(SearchConfig{}.validate());
  EXPECT_THROW((SearchConfig{5, 6}.validate()), std::invalid_argument);
  EXPECT_THROW((SearchConfig{0, 0}.validate()), std::invalid_argument);
  auto c = SearchConfig::for_k(3);
  EXPECT_EQ(c.beam_width, 10u);
  EXPECT_EQ(c.final_k, 3u);
  EXPECT_EQ(SearchConfig::for_k(25).beam_width, 25u);
}

TEST(TreeSearch, DepthOneMatchesBruteForce) {
  auto lib = fixture_library();
  HashedEmbedder e;
  auto t = testing::make_flat_index(lib, e);
  for (const auto& intent : {"parse config files", "resize images", "http server with cookies", "time zones", "zzz"}) {
    for (std::size_t w : {1u, 3u, 10u, 24u, 50u}) {
      auto got = tree_search(t, intent, {w, std::min<std::size_t>(w, 10)}, e);
      EXPECT_EQ(got.ids(), brute_force(t, e.embed_one(intent), w)) << intent << " w=" << w;
      EXPECT_EQ(got.node_evaluations, 1 + lib.size());
      for (std::size_t i = 1; i < got.entries.size(); ++i) EXPECT_GE(got.entries[i - 1].score, got.entries[i].score);
    }
  }
}

TEST(TreeSearch, DepthOneTiesFollowNodeIds) {
  // Three artifacts with the same description tie exactly.
  ArtifactLibrary lib({{"c", "c", "same text", "x", {}}, {"a", "a", "same text", "x", {}}, {"b", "b", "other words", "x", {}},
                       {"d", "d", "same text", "x", {}}});
  HashedEmbedder e;
  auto t = testing::make_flat_index(lib, e);
  auto got = tree_search(t, "same text", {2, 2}, e);
  EXPECT_EQ(got.ids(), brute_force(t, e.embed_one("same text"), 2));
  // Leaves L0-0 (c) and L0-1 (a) win the tie on node id.
  EXPECT_EQ(got.ids(), (std::vector<std::string>{"c", "a"}));
}

TEST(TreeSearch, SingleLeaf) {
  ArtifactLibrary lib({{"only", "only", "image resize helper", "npm", {}}});
  HashedEmbedder e;
  auto t = build_tree(lib, e, Summarizer(e));
  auto got = tree_search(t, "resize a picture", {}, e);
  ASSERT_EQ(got.entries.size(), 1u);
  EXPECT_EQ(got.entries[0].artifact_id, "only");
  EXPECT_DOUBLE_EQ(got.entries[0].score, cosine(e.embed_one("resize a picture"), e.embed_one("image resize helper")));
  EXPECT_EQ(got.intent, "resize a picture");
}

TEST(TreeSearch, BalancedIndexEvaluationBound) {
  auto t = testing::make_balanced_index(8, 3, 32, 11);
  ASSERT_EQ(t.leaf_count(), 4096u);
  ASSERT_EQ(t.layer_count(), 4);
  class Fixed final : public Embedder {
   public:
    explicit Fixed(std::vector<double> v) : v_(std::move(v)) {}
    std::vector<Embedding> embed(std::span<const std::string> texts) const override {
      return std::vector<Embedding>(texts.size(), Embedding::normalized(v_));
    }
    std::size_t dim() const override { return v_.size(); }
    nlohmann::json describe() const override { return {{"provider", "fixed"}}; }

   private:
    std::vector<double> v_;
  };
  std::mt19937_64 rng(4);
  for (int q = 0; q < 20; ++q) {
    Fixed e(testing::random_unit(32, rng));
    auto got = tree_search(t, "q", {5, 5}, e);
    EXPECT_EQ(got.entries.size(), 5u);
    EXPECT_EQ(got.node_evaluations, 8u + 40u + 40u + 40u);
    EXPECT_LE(got.node_evaluations, 5u * t.max_branching() * static_cast<std::size_t>(t.layer_count()));
  }
}

TEST(TreeSearch, EvaluationBoundOnBuiltIndexes) {
  auto fx = testing::make_family_fixture();
  HashedEmbedder e;
  auto t = build_tree(fx.library, e, Summarizer(e));
  std::mt19937_64 rng(8);
  for (std::size_t i = 0; i < fx.library.size(); i += 7) {
    auto intent = testing::perturbed_intent(fx, i, rng).intent;
    for (std::size_t w : {1u, 4u, 10u}) {
      auto got = tree_search(t, intent, {w, 1}, e);
      EXPECT_LE(got.node_evaluations, w * t.max_branching() * static_cast<std::size_t>(t.layer_count()));
      EXPECT_LE(got.entries.size(), w);
      std::set<std::string> distinct;
      for (const auto& x : got.ids()) EXPECT_TRUE(distinct.insert(x).second);
    }
  }
}

TEST(TreeSearch, MixedFrontierCarriesLeaves) {
  // Root r holds one leaf directly and one internal node over two leaves.
  auto mk = [](std::string id, int level, std::vector<double> v, std::vector<std::string> kids, std::optional<std::string> art) {
    TreeNode n;
    n.id = std::move(id);
    n.level = level;
    n.kind = art ? NodeKind::leaf : NodeKind::internal;
    n.embedding = Embedding::normalized(std::move(v));
    n.children = std::move(kids);
    n.artifact_id = std::move(art);
    return n;
  };
  TreeIndex t({mk("L0-0", 0, {1, 0}, {}, "near"), mk("L0-1", 0, {0.6, 0.8}, {}, "mid"), mk("L0-2", 0, {0, 1}, {}, "far"),
               mk("L1-0", 1, {0.3, 0.9}, {"L0-1", "L0-2"}, {}), mk("L2-0", 2, {1, 1}, {"L0-0", "L1-0"}, {})},
              {"L2-0"});
  class Fixed final : public Embedder {
   public:
    std::vector<Embedding> embed(std::span<const std::string> texts) const override {
      return std::vector<Embedding>(texts.size(), Embedding::normalized({1, 0.1}));
    }
    std::size_t dim() const override { return 2; }
    nlohmann::json describe() const override { return {}; }
  } e;
  auto got = tree_search(t, "q", {2, 2}, e);
  EXPECT_EQ(got.ids(), (std::vector<std::string>{"near", "mid"}));
}

TEST(TreeSearch, Errors) {
  HashedEmbedder e(16);
  auto t = testing::make_balanced_index(2, 1, 8, 1);
  EXPECT_THROW(tree_search(t, "q", {}, e), DimensionMismatch);
  EXPECT_THROW(tree_search(TreeIndex{}, "q", {}, e), IndexError);
}

TEST(RerankPrompt, MatchesGolden) {
  auto lib = fixture_library();
  std::vector<RerankCandidate> c = {
      {"json5", "Parse and serialize JSON5 configuration files\nwith comments and trailing commas"},
      {"toml-kit", lib.find("toml-kit")->description},
      {"ini-lite", lib.find("ini-lite")->description}};
  auto p = render_rerank_prompt("I need to parse config files\nwith comments", c);
  EXPECT_EQ(p, testing::read_file(testing::data_path("golden/rerank_prompt.txt")));
  EXPECT_NE(p.find("from best match to worst match"), std::string::npos);
  EXPECT_EQ(prompt_ids(p), (std::vector<std::string>{"json5", "toml-kit", "ini-lite"}));
}

TEST(RerankPrompt, SingleCandidateAndNewlines) {
  std::vector<RerankCandidate> c = {{"only", "line one\nline two\r\nline three"}};
  auto p = render_rerank_prompt("q", c);
  EXPECT_NE(p.find("Candidate Artifacts:\n<only, line one line two line three>\n\nPlease"), std::string::npos);
  EXPECT_THROW(render_rerank_prompt("q", std::span<const RerankCandidate>{}), std::invalid_argument);
}

TEST(ParseIdList, Formats) {
  std::vector<std::string> ids = {"c1", "c2", "c3"};
  EXPECT_EQ(parse_id_list("[c3, c1, c2]", ids), (std::vector<std::string>{"c3", "c1", "c2"}));
  EXPECT_EQ(parse_id_list("c2\nc1", ids), (std::vector<std::string>{"c2", "c1"}));
  EXPECT_EQ(parse_id_list("['c2', \"c3\"]", ids), (std::vector<std::string>{"c2", "c3"}));
  EXPECT_EQ(parse_id_list("1. c3\n2. c2\n3) c1", ids), (std::vector<std::string>{"c3", "c2", "c1"}));
  EXPECT_EQ(parse_id_list("[c1, c1, c2]", ids), (std::vector<std::string>{"c1", "c2"}));
  EXPECT_TRUE(parse_id_list("I cannot rank these.", ids).empty());
}

TEST(Rerank, Examples) {
  auto cands = list_of({"c1", "c2", "c3"});
  auto d = describe(cands);
  FunctionChatModel ordered([](const std::string&) { return "[c3, c1, c2]"; });
  auto r = rerank("q", cands, d, ordered, 3);
  EXPECT_EQ(r.ids(), (std::vector<std::string>{"c3", "c1", "c2"}));
  EXPECT_TRUE(r.reranked);
  EXPECT_DOUBLE_EQ(r.entries[0].score, cands.entries[2].score);

  FunctionChatModel partial([](const std::string&) { return "[c3, zzz]"; });
  EXPECT_EQ(rerank("q", cands, d, partial, 3).ids(), (std::vector<std::string>{"c3", "c1", "c2"}));

  FunctionChatModel prose([](const std::string&) { return "These all look fine to me."; });
  testing::LogCapture logs;
  auto kept = rerank("q", cands, d, prose, 2);
  EXPECT_EQ(kept.ids(), (std::vector<std::string>{"c1", "c2"}));
  EXPECT_FALSE(kept.reranked);
  EXPECT_EQ(prose.calls(), 3u);
  EXPECT_TRUE(logs.contains("similarity order"));
}

TEST(Rerank, RetriesThenSucceeds) {
  auto cands = list_of({"c1", "c2"});
  int n = 0;
  FunctionChatModel flaky([&](const std::string&) { return ++n < 2 ? std::string("no idea") : std::string("c2, c1"); });
  EXPECT_EQ(rerank("q", cands, describe(cands), flaky, 2).ids(), (std::vector<std::string>{"c2", "c1"}));
}

TEST(Rerank, AlwaysPermutationOfSubset) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 1 + rng() % 12;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("id" + std::to_string(i));
    auto cands = list_of(ids);
    // Random reply mixing known, unknown and repeated ids.
    std::string reply = "[";
    for (std::size_t i = 0, m = rng() % 16; i < m; ++i)
      reply += (rng() % 4 == 0 ? "ghost" + std::to_string(rng() % 5) : ids[rng() % n]) + ", ";
    reply += "]";
    FunctionChatModel llm([&](const std::string&) { return reply; });
    std::size_t k = 1 + rng() % n;
    auto r = rerank("q", cands, describe(cands), llm, k);
    EXPECT_EQ(r.entries.size(), k);
    std::set<std::string> seen;
    for (const auto& id : r.ids()) {
      EXPECT_TRUE(std::find(ids.begin(), ids.end(), id) != ids.end()) << id;
      EXPECT_TRUE(seen.insert(id).second);
    }
  }
}

TEST(Recommend, WithoutRerankIsTruncatedSearch) {
  auto lib = fixture_library();
  HashedEmbedder e;
  auto t = build_tree(lib, e, Summarizer(e));
  SearchConfig cfg{10, 4};
  auto full = tree_search(t, "parse yaml config", cfg, e);
  auto rec = recommend(t, "parse yaml config", cfg, e);
  full.truncate(4);
  EXPECT_EQ(rec.entries, full.entries);
  EXPECT_EQ(rec.node_evaluations, full.node_evaluations);
  EXPECT_FALSE(rec.reranked);
  auto again = recommend(t, "parse yaml config", cfg, e);
  EXPECT_EQ(again.entries, rec.entries);
}

TEST(Recommend, IdentityRerankKeepsSet) {
  auto lib = fixture_library();
  HashedEmbedder e;
  auto t = build_tree(lib, e, Summarizer(e));
  FunctionChatModel llm(identity_reply);
  for (const auto& intent : {"serve http requests", "convert colors", "schedule cron jobs"}) {
    auto plain = recommend(t, intent, {10, 5}, e);
    auto re = recommend(t, intent, {10, 5, true}, e, &llm);
    EXPECT_EQ(re.ids(), plain.ids()) << intent;
    EXPECT_TRUE(re.reranked);
  }
  EXPECT_THROW(recommend(t, "x", {10, 5, true}, e), std::invalid_argument);
}

TEST(Recommend, FamilyFixturePrecision) {
  auto fx = testing::make_family_fixture();
  HashedEmbedder e;
  auto t = build_tree(fx.library, e, Summarizer(e));
  std::mt19937_64 rng(99);
  std::vector<RankedList> lists;
  std::vector<IntentSample> samples;
  for (std::size_t i = 0; i < 50; ++i) {
    auto s = testing::perturbed_intent(fx, (i * 37) % fx.library.size(), rng);
    lists.push_back(recommend(t, s.intent, SearchConfig::for_k(10), e));
    samples.push_back(s);
  }
  double p1 = 0;
  for (std::size_t i = 0; i < lists.size(); ++i) p1 += eval::precision_at_k(lists[i], samples[i].target_id, 1);
  EXPECT_GE(p1 / 50.0, 0.8);
}

}  // namespace
}  // namespace treerec
