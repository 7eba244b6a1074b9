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


#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "support/fixtures.hpp"
#include "treerec/summarize.hpp"

namespace treerec {
namespace {

using testing::LogCapture;

const char* kFormatSentence = "Please only output the common feature in the format of 'feature name: feature description:'.";

TEST(RenderSummaryPrompt, ContainsFormatSentence) {
  std::vector<std::string> children = {"JSON: parse json", "YAML: parse yaml"};
  auto p = render_summary_prompt(children);
  EXPECT_NE(p.find(kFormatSentence), std::string::npos);
  EXPECT_NE(p.find("generate a parent common feature"), std::string::npos);
}

TEST(RenderSummaryPrompt, SingleChild) {
  std::vector<std::string> children = {"only child"};
  auto p = render_summary_prompt(children);
  EXPECT_NE(p.find("The sub-features are:\nonly child\nPlease only output"), std::string::npos);
}

TEST(RenderSummaryPrompt, ColonsPassThrough) {
  std::vector<std::string> children = {"a: b: c", "x:y"};
  auto p = render_summary_prompt(children);
  EXPECT_NE(p.find("\na: b: c\n"), std::string::npos);
  EXPECT_NE(p.find("\nx:y\n"), std::string::npos);
}

TEST(RenderSummaryPrompt, MatchesGolden) {
  std::vector<std::string> children = {"JSON Parsing: parse JSON documents into objects",
                                       "YAML Parsing: read YAML files: anchors, aliases and tags"};
  EXPECT_EQ(render_summary_prompt(children), testing::read_file(testing::data_path("golden/summary_prompt.txt")));
}

TEST(RenderSummaryPrompt, EveryChildVerbatim) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> children;
    std::size_t n = 1 + rng() % 8;
    for (std::size_t i = 0; i < n; ++i) {
      std::string c;
      std::size_t len = 1 + rng() % 30;
      for (std::size_t j = 0; j < len; ++j) c.push_back(static_cast<char>(32 + rng() % 95));
      children.push_back(c);
    }
    auto p = render_summary_prompt(children);
    for (const auto& c : children) EXPECT_NE(p.find(c), std::string::npos);
  }
}

TEST(RenderSummaryPrompt, RejectsEmpty) { EXPECT_THROW(render_summary_prompt({}), std::invalid_argument); }

TEST(ParseFeatureLine, Examples) {
  EXPECT_EQ(parse_feature_line("A: B"), (FeatureSummary{"A", "B"}));
  EXPECT_EQ(parse_feature_line("A: B: C"), (FeatureSummary{"A", "B: C"}));
  EXPECT_EQ(parse_feature_line("A: B:"), (FeatureSummary{"A", "B"}));
  EXPECT_THROW(parse_feature_line("no separator"), ParseError);
  EXPECT_THROW(parse_feature_line(": description"), ParseError);
  EXPECT_THROW(parse_feature_line("name:   "), ParseError);
  EXPECT_THROW(parse_feature_line(""), ParseError);
}

TEST(ParseFeatureLine, GoldenSummaries) {
  std::ifstream in(testing::data_path("golden/summaries.jsonl"));
  std::string raw;
  int count = 0;
  while (std::getline(in, raw)) {
    auto j = nlohmann::json::parse(raw);
    auto f = parse_feature_line(j["line"].get<std::string>());
    EXPECT_EQ(f.name, j["name"].get<std::string>());
    EXPECT_EQ(f.description, j["description"].get<std::string>());
    EXPECT_EQ(parse_feature_line(f.format()), f);
    ++count;
  }
  EXPECT_GE(count, 5);
}

TEST(ParseFeatureLine, FormatRoundTrip) {
  std::mt19937_64 rng(8);
  const std::string name_chars = "abcdefghijklmnopqrstuvwxyz ABC-_0123456789";
  const std::string desc_chars = name_chars + ":,.;()";
  auto draw = [&](const std::string& alphabet, std::size_t len) {
    std::string s;
    for (std::size_t i = 0; i < len; ++i) s.push_back(alphabet[rng() % alphabet.size()]);
    return s;
  };
  for (int trial = 0; trial < 500; ++trial) {
    FeatureSummary f{std::string(text::trim(draw(name_chars, 1 + rng() % 20))),
                     std::string(text::trim(draw(desc_chars, 1 + rng() % 40)))};
    while (!f.description.empty() && f.description.back() == ':') f.description.pop_back();
    f.description = std::string(text::trim(f.description));
    if (f.name.empty() || f.description.empty()) continue;
    EXPECT_EQ(parse_feature_line(f.format()), f) << f.format();
  }
}

TEST(CapChildren, TailTruncation) {
  std::vector<std::string> lines = {std::string(10, 'a'), std::string(10, 'b'), std::string(10, 'c')};
  auto capped = cap_children(lines, 25);
  ASSERT_EQ(capped.size(), 3u);
  EXPECT_EQ(capped[2], "ccc");
  std::size_t total = 0;
  for (auto& l : capped) total += l.size();
  EXPECT_EQ(total + capped.size() - 1, 25u);
  EXPECT_EQ(cap_children(lines, 100), lines);
  EXPECT_EQ(cap_children(lines, 21).size(), 2u);
}

TEST(SummarizeOffline, DocumentFrequencyName) {
  HashedEmbedder e;
  std::vector<std::string> children = {"parse JSON config files", "parse YAML config files"};
  auto f = summarize_offline(children, e);
  // Oracle: tokens in both children are parse, config, files; first two by first occurrence.
  EXPECT_EQ(f.name, "parse config");
  EXPECT_NE(f.name.find("parse"), std::string::npos);
  EXPECT_NE(f.name.find("config"), std::string::npos);
  EXPECT_TRUE(text::starts_with(f.description, kOfflineDescriptionPrefix));
}

TEST(SummarizeOffline, SingleChildIsItsOwnCentroid) {
  HashedEmbedder e;
  std::vector<std::string> children = {"resize and crop images"};
  auto f = summarize_offline(children, e);
  EXPECT_EQ(f.description, std::string(kOfflineDescriptionPrefix) + "resize and crop images");
}

TEST(SummarizeOffline, UsesDescriptionPartOfChildLines) {
  HashedEmbedder e;
  std::vector<std::string> children = {"json5: parse json5 files"};
  EXPECT_EQ(summarize_offline(children, e).description, std::string(kOfflineDescriptionPrefix) + "parse json5 files");
  // No doubled prefix when summarizing summaries.
  std::vector<std::string> parents = {"x: Common feature covering: parse json5 files"};
  EXPECT_EQ(summarize_offline(parents, e).description, "Common feature covering: parse json5 files");
}

TEST(SummarizeOffline, NearestToCentroid) {
  HashedEmbedder e;
  std::vector<std::string> children = {"parse json files", "parse json documents quickly", "parse json files fast",
                                       "render video frames"};
  auto vecs = e.embed(children);
  std::vector<double> centroid(e.dim(), 0.0);
  for (auto& v : vecs)
    for (std::size_t j = 0; j < e.dim(); ++j) centroid[j] += v[j];
  auto c = Embedding::raw(centroid);
  std::size_t best = 0;
  for (std::size_t i = 1; i < vecs.size(); ++i)
    if (cosine(c, vecs[i]) > cosine(c, vecs[best])) best = i;
  EXPECT_EQ(summarize_offline(children, e).description, std::string(kOfflineDescriptionPrefix) + children[best]);
}

TEST(SummarizeOffline, DeterministicAndTotal) {
  HashedEmbedder e;
  std::vector<std::string> children = {"the of and", "a an"};
  auto f = summarize_offline(children, e);
  EXPECT_EQ(f.name, "feature");
  EXPECT_EQ(summarize_offline(children, e), f);
  EXPECT_NO_THROW(parse_feature_line(f.format()));
}

TEST(Summarizer, LlmResponseParsed) {
  HashedEmbedder e;
  FunctionChatModel llm([](const std::string&) { return "Data Serialization: tools for encoding structured data"; });
  std::vector<std::string> children = {"json5: parse json5", "yaml: parse yaml"};
  auto f = summarize_cluster(children, e, &llm);
  EXPECT_EQ(f, (FeatureSummary{"Data Serialization", "tools for encoding structured data"}));
}

TEST(Summarizer, ReplayStubKeyedByPrompt) {
  HashedEmbedder e;
  std::vector<std::string> children = {"json5: parse json5", "yaml: parse yaml"};
  ReplayChatModel replay({{sha256_hex(render_summary_prompt(children)),
                           "\n  Data Serialization: tools for encoding structured data\nextra chatter"}});
  auto f = summarize_cluster(children, e, &replay);
  EXPECT_EQ(f, (FeatureSummary{"Data Serialization", "tools for encoding structured data"}));
}

TEST(Summarizer, FallsBackAfterRetryBudget) {
  HashedEmbedder e;
  FunctionChatModel llm([](const std::string&) { return "I cannot answer that"; });
  LlmConfig cfg;
  cfg.retry_budget = 2;
  std::vector<std::string> children = {"parse JSON config files", "parse YAML config files"};
  LogCapture logs;
  auto f = summarize_cluster(children, e, &llm, cfg);
  EXPECT_EQ(llm.calls(), 3u);
  EXPECT_EQ(f, summarize_offline(children, e));
  EXPECT_TRUE(logs.contains("offline"));
}

TEST(Summarizer, RetrySucceeds) {
  HashedEmbedder e;
  int n = 0;
  FunctionChatModel llm([&](const std::string&) { return ++n < 2 ? std::string("nonsense") : std::string("Name: desc"); });
  std::vector<std::string> children = {"a"};
  EXPECT_EQ(summarize_cluster(children, e, &llm), (FeatureSummary{"Name", "desc"}));
}

TEST(Summarizer, TransportErrorPropagates) {
  HashedEmbedder e;
  FunctionChatModel llm([](const std::string&) -> std::string { throw TransportError("down"); });
  std::vector<std::string> children = {"a"};
  EXPECT_THROW(summarize_cluster(children, e, &llm), TransportError);
}

}  // namespace
}  // namespace treerec
