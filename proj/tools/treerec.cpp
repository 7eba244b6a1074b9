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

// treerec command line: ingest, build, search, bench, stats.
//
// JSON results go to stdout, diagnostics to stderr. Exit codes: 0 success,
// 1 runtime failure, 2 usage error. Settings resolve as
// flags > environment > --config file > defaults.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "treerec/treerec.hpp"

namespace {

using nlohmann::json;
using namespace treerec;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  // global
  std::uint64_t seed = 0;
  std::string config_path;
  std::string log_level = "warn";
  bool show_config = false;

  // inputs / outputs
  std::string catalog;
  std::string pairs;
  std::string index;
  std::string out;
  std::string csv;
  std::string intent;

  // embedder
  std::string embedder = "hashed";
  std::size_t dim = 0;  // 0: provider default
  std::string embed_endpoint;
  std::string embed_model = "all-mpnet-base-v2";
  std::size_t embed_batch = 64;
  std::size_t embed_in_flight = 4;

  // chat model
  std::string summarizer = "offline";
  std::string llm_endpoint;
  std::string llm_model = "gpt-4";
  double temperature = 0.0;
  std::size_t llm_in_flight = 4;
  int llm_retries = 2;
  std::string replay;
  std::string record;

  // build
  int max_depth = 4;
  std::size_t max_top = 10;
  std::string reducer = "pca";
  std::size_t reduce_dim = 10;
  std::size_t k_min = 2;
  std::size_t k_max = 32;
  double threshold = 0.2;
  std::size_t max_prompt_chars = kMaxPromptChildChars;
  bool timestamp = false;

  // search
  std::size_t k = 10;
  std::size_t beam = 0;  // 0: max(k, 10)
  std::string rerank = "off";

  // bench
  std::string solution;
  std::string vectors;
  double fraction = 0.10;
  std::size_t lsi_rank = 0;
  bool include_names = false;
  bool parallel = false;
  std::size_t threads = 4;

  // stats
  std::optional<int> level;
};

json to_json(const RunConfig& c) {
  // Only settings, never credential values.
  json j = {{"seed", c.seed},
            {"embedder", c.embedder},
            {"dim", c.dim},
            {"embed-endpoint", c.embed_endpoint},
            {"embed-model", c.embed_model},
            {"embed-batch", c.embed_batch},
            {"embed-in-flight", c.embed_in_flight},
            {"summarizer", c.summarizer},
            {"llm-endpoint", c.llm_endpoint},
            {"llm-model", c.llm_model},
            {"temperature", c.temperature},
            {"llm-in-flight", c.llm_in_flight},
            {"llm-retries", c.llm_retries},
            {"replay", c.replay},
            {"record", c.record},
            {"max-depth", c.max_depth},
            {"max-top", c.max_top},
            {"reducer", c.reducer},
            {"reduce-dim", c.reduce_dim},
            {"k-min", c.k_min},
            {"k-max", c.k_max},
            {"threshold", c.threshold},
            {"max-prompt-chars", c.max_prompt_chars},
            {"k", c.k},
            {"beam", c.beam},
            {"rerank", c.rerank},
            {"solution", c.solution},
            {"vectors", c.vectors},
            {"fraction", c.fraction},
            {"lsi-rank", c.lsi_rank},
            {"include-names", c.include_names},
            {"parallel", c.parallel},
            {"threads", c.threads}};
  j["credentials"] = {{"llm", "LLM_API_KEY"}, {"embed", "EMBED_API_KEY"}};
  return j;
}

/// Option registry: remembers how to assign each flag from a config-file value.
class Options {
 public:
  template <class T>
  CLI::Option* add(CLI::App* app, const std::string& name, T& target, const std::string& help) {
    auto* opt = app->add_option("--" + name, target, help);
    entries_[app].push_back({name, opt, [&target](const json& v) { target = v.get<T>(); }});
    return opt;
  }
  CLI::Option* flag(CLI::App* app, const std::string& name, bool& target, const std::string& help) {
    auto* opt = app->add_flag("--" + name, target, help);
    entries_[app].push_back({name, opt, [&target](const json& v) { target = v.get<bool>(); }});
    return opt;
  }
  CLI::Option* add_optional_int(CLI::App* app, const std::string& name, std::optional<int>& target, const std::string& help) {
    auto* opt = app->add_option_function<int>("--" + name, [&target](const int& v) { target = v; }, help);
    entries_[app].push_back({name, opt, [&target](const json& v) { target = v.get<int>(); }});
    return opt;
  }

  /// Applies file values to options not given on the command line of `apps`.
  void apply_file(const json& file, const std::vector<CLI::App*>& apps) {
    std::set<std::string> known;
    for (auto& [app, list] : entries_)
      for (auto& e : list) known.insert(e.name);
    for (auto& [key, value] : file.items()) {
      if (!known.count(key)) {
        treerec::log().warn("config: ignoring unknown key '{}'", key);
        continue;
      }
      for (auto* app : apps) {
        for (auto& e : entries_[app]) {
          if (e.name != key || e.option->count() > 0) continue;
          try {
            e.assign(value);
          } catch (const json::exception&) {
            throw UsageError("config: key '" + key + "' has the wrong type");
          }
        }
      }
    }
  }

  bool given(CLI::App* app, const std::string& name) const {
    auto it = entries_.find(app);
    if (it == entries_.end()) return false;
    for (const auto& e : it->second)
      if (e.name == name) return e.option->count() > 0;
    return false;
  }

 private:
  struct Entry {
    std::string name;
    CLI::Option* option;
    std::function<void(const json&)> assign;
  };
  std::map<CLI::App*, std::vector<Entry>> entries_;
};

void print_json(const json& j) { std::cout << j.dump(2) << std::endl; }

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << content;
  if (!out) throw Error("failed writing '" + path + "'");
}

// ---------------------------------------------------------------------------
// Providers
// ---------------------------------------------------------------------------

EmbedderConfig embedder_config(const RunConfig& c) {
  EmbedderConfig e;
  if (c.embedder == "hashed" || c.embedder == "hashed-local") {
    e.provider = EmbedProvider::hashed_local;
  } else if (c.embedder == "remote") {
    e.provider = EmbedProvider::remote;
  } else {
    throw UsageError("unknown embedder '" + c.embedder + "' (expected hashed or remote)");
  }
  e.dim = c.dim ? c.dim : (e.provider == EmbedProvider::remote ? 768 : 256);
  e.endpoint = c.embed_endpoint;
  e.model = c.embed_model;
  e.seed = c.seed;
  e.batch_size = c.embed_batch;
  e.max_in_flight = c.embed_in_flight;
  return e;
}

/// The embedder an index was built with, so intents land in the same space.
std::unique_ptr<Embedder> embedder_for_index(const TreeIndex& t, const RunConfig& c) {
  const auto& desc = t.provenance().value("embedder", json::object());
  EmbedderConfig e;
  e.dim = t.dim();
  if (desc.value("provider", std::string("hashed-local")) == "remote") {
    e.provider = EmbedProvider::remote;
    e.model = desc.value("model", c.embed_model);
    e.endpoint = c.embed_endpoint.empty() ? desc.value("endpoint", std::string()) : c.embed_endpoint;
    e.batch_size = c.embed_batch;
    e.max_in_flight = c.embed_in_flight;
  } else {
    e.provider = EmbedProvider::hashed_local;
    e.seed = desc.value("seed", std::uint64_t{0});
  }
  return make_embedder(e);
}

LlmConfig llm_config(const RunConfig& c) {
  LlmConfig l;
  l.endpoint = c.llm_endpoint;
  l.model = c.llm_model;
  l.temperature = c.temperature;
  l.max_in_flight = c.llm_in_flight;
  l.retry_budget = c.llm_retries;
  if (l.temperature < 0) throw UsageError("--temperature must be >= 0");
  return l;
}

/// Chat model stack: replay file, or HTTP optionally wrapped in a recorder.
struct ChatStack {
  std::unique_ptr<ChatModel> base;
  std::unique_ptr<RecordingChatModel> recorder;
  std::string record_path;

  ChatModel* get() { return recorder ? static_cast<ChatModel*>(recorder.get()) : base.get(); }
  void finish() {
    if (recorder) recorder->save(record_path);
  }
};

ChatStack make_chat(const RunConfig& c) {
  ChatStack s;
  if (!c.replay.empty()) {
    s.base = std::make_unique<ReplayChatModel>(ReplayChatModel::from_file(c.replay));
  } else {
    s.base = std::make_unique<HttpChatModel>(llm_config(c));
  }
  if (!c.record.empty()) {
    s.recorder = std::make_unique<RecordingChatModel>(*s.base);
    s.record_path = c.record;
  }
  return s;
}

SearchConfig search_config(const RunConfig& c) {
  if (c.rerank != "on" && c.rerank != "off") throw UsageError("--rerank must be 'on' or 'off'");
  SearchConfig s = SearchConfig::for_k(c.k, c.rerank == "on");
  if (c.beam) s.beam_width = c.beam;
  s.rerank_retry_budget = c.llm_retries;
  if (s.final_k > s.beam_width) throw UsageError("--k must not exceed --beam");
  return s;
}

std::string utc_now() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

TreeIndex build_index(const ArtifactLibrary& lib, const RunConfig& c) {
  auto embedder = make_embedder(embedder_config(c));
  ChatStack chat;
  ChatModel* llm = nullptr;
  if (c.summarizer == "llm") {
    chat = make_chat(c);
    llm = chat.get();
  } else if (c.summarizer != "offline") {
    throw UsageError("unknown summarizer '" + c.summarizer + "' (expected offline or llm)");
  }
  Summarizer summarizer(*embedder, llm, llm_config(c));

  BuildConfig cfg;
  try {
    cfg.cluster.reducer.method = cluster::parse_reduce_method(c.reducer);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  cfg.cluster.reducer.target_dim = c.reduce_dim;
  cfg.cluster.k_min = c.k_min;
  cfg.cluster.k_max = c.k_max;
  cfg.cluster.threshold = c.threshold;
  cfg.cluster.seed = c.seed;
  cfg.stop.max_depth = c.max_depth;
  cfg.stop.max_top_level_nodes = c.max_top;
  cfg.max_prompt_chars = c.max_prompt_chars;
  if (c.timestamp) cfg.build_timestamp = utc_now();
  if (!(c.threshold > 0 && c.threshold < 1)) throw UsageError("--threshold must lie in (0, 1)");
  if (c.k_min < 1 || c.k_min > c.k_max) throw UsageError("--k-min must lie in [1, --k-max]");

  auto t = build_tree(lib, *embedder, summarizer, cfg);
  chat.finish();
  return t;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_ingest(const RunConfig& c) {
  auto lib = load_library(c.catalog);
  json out = {{"catalog", c.catalog}, {"ecosystem", lib.ecosystem()}, {"stats", to_json(library_stats(lib))}};
  if (!c.pairs.empty()) out["pairs"] = load_pairs(c.pairs, lib).size();
  if (!c.out.empty()) {
    save_library(lib, c.out);
    out["out"] = c.out;
  }
  print_json(out);
  return 0;
}

int cmd_build(const RunConfig& c) {
  auto lib = load_library(c.catalog);
  auto t = build_index(lib, c);
  save_tree(t, c.out);
  json out = to_json(tree_stats(t));
  out["index"] = c.out;
  print_json(out);
  return 0;
}

int cmd_search(const RunConfig& c) {
  auto t = load_tree(c.index);
  auto embedder = embedder_for_index(t, c);
  auto cfg = search_config(c);
  ChatStack chat;
  if (cfg.rerank) chat = make_chat(c);
  auto result = recommend(t, c.intent, cfg, *embedder, cfg.rerank ? chat.get() : nullptr);
  chat.finish();
  print_json(to_json(result));
  return 0;
}

int cmd_bench(const RunConfig& c) {
  if (!is_registered_solution(c.solution)) {
    std::string names;
    for (const auto& n : solution_names()) names += (names.empty() ? "" : ", ") + n;
    throw UsageError("unknown solution '" + c.solution + "'; registered solutions: " + names);
  }
  auto lib = load_library(c.catalog);
  auto pairs = load_pairs(c.pairs, lib);

  SolutionContext ctx;
  ctx.library = &lib;
  ctx.term_options.include_names = c.include_names;
  ctx.lsi_rank = c.lsi_rank;
  ctx.word_vectors_path = c.vectors;
  ctx.two_stage.subset_fraction = c.fraction;
  ctx.two_stage.final_k = c.k;
  ctx.two_stage.max_in_flight = c.llm_in_flight;
  ctx.two_stage.retry_budget = c.llm_retries;

  std::optional<TreeIndex> tree;
  std::unique_ptr<Embedder> embedder;
  ChatStack chat;
  if (c.solution == "treerec") {
    ctx.search = search_config(c);
    tree = c.index.empty() ? build_index(lib, c) : load_tree(c.index);
    embedder = embedder_for_index(*tree, c);
    ctx.tree = &*tree;
    ctx.embedder = embedder.get();
    if (ctx.search.rerank) {
      chat = make_chat(c);
      ctx.llm = chat.get();
    }
  } else if (c.solution == "llm") {
    chat = make_chat(c);
    ctx.llm = chat.get();
  } else if ((c.solution == "word2vec" || c.solution == "fasttext") && c.vectors.empty()) {
    throw UsageError(c.solution + " needs --vectors");
  }

  auto solution = make_solution(c.solution, ctx);
  eval::BenchConfig bc;
  bc.parallel = c.parallel;
  bc.threads = c.threads;
  auto report = eval::run_benchmark(*solution, pairs, bc);
  chat.finish();

  auto j = eval::to_json(report);
  if (!c.out.empty()) write_text(c.out, j.dump(2) + "\n");
  if (!c.csv.empty()) {
    std::ostringstream ss;
    eval::write_csv(ss, std::span<const eval::EvalReport>(&report, 1));
    write_text(c.csv, ss.str());
  }
  print_json(j);
  return 0;
}

int cmd_stats(const RunConfig& c) {
  if (c.catalog.empty() == c.index.empty()) throw UsageError("stats needs exactly one of --catalog or --index");
  if (!c.catalog.empty()) {
    print_json(to_json(library_stats(load_library(c.catalog))));
    return 0;
  }
  auto t = load_tree(c.index);
  json out = to_json(tree_stats(t));
  json sil = json::object();
  std::vector<int> levels;
  if (c.level) {
    levels.push_back(*c.level);
  } else {
    for (int l = 1; l <= t.max_level(); ++l) levels.push_back(l);
  }
  for (int l : levels) {
    try {
      sil[std::to_string(l)] = eval::silhouette(t, l);
    } catch (const UndefinedMetric&) {
      if (c.level) throw;
      sil[std::to_string(l)] = nullptr;
    }
  }
  out["silhouette"] = sil;
  print_json(out);
  return 0;
}

void apply_env(RunConfig& c, Options& opts, const std::vector<CLI::App*>& apps) {
  auto given = [&](const std::string& name) {
    for (auto* a : apps)
      if (opts.given(a, name)) return true;
    return false;
  };
  if (!given("llm-endpoint"))
    if (auto v = http::env("LLM_API_BASE")) c.llm_endpoint = *v;
  if (!given("embed-endpoint"))
    if (auto v = http::env("EMBED_API_BASE")) c.embed_endpoint = *v;
}

}  // namespace

int main(int argc, char** argv) {
  auto& logger = treerec::log();
  RunConfig c;
  Options opts;

  CLI::App app{"treerec: tree-indexed artifact recommendation"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", "treerec 1.0.0");
  opts.add(&app, "seed", c.seed, "Seed for clustering and hashed embeddings");
  app.add_option("--config", c.config_path, "JSON file whose keys mirror flag names")->check(CLI::ExistingFile);
  opts.add(&app, "log-level", c.log_level, "trace, debug, info, warn, error or off");
  app.add_flag("--show-config", c.show_config, "Print the resolved settings to stderr");

  auto add_embedder = [&](CLI::App* s) {
    opts.add(s, "embedder", c.embedder, "hashed or remote");
    opts.add(s, "dim", c.dim, "Embedding dimension (default 256 hashed, 768 remote)");
    opts.add(s, "embed-endpoint", c.embed_endpoint, "Remote embeddings URL (else $EMBED_API_BASE)");
    opts.add(s, "embed-model", c.embed_model, "Remote embedding model");
    opts.add(s, "embed-batch", c.embed_batch, "Texts per embeddings request")->check(CLI::PositiveNumber);
    opts.add(s, "embed-in-flight", c.embed_in_flight, "Concurrent embeddings requests")->check(CLI::PositiveNumber);
  };
  auto add_llm = [&](CLI::App* s) {
    opts.add(s, "llm-endpoint", c.llm_endpoint, "Chat completions base URL (else $LLM_API_BASE)");
    opts.add(s, "llm-model", c.llm_model, "Chat model name");
    opts.add(s, "temperature", c.temperature, "Sampling temperature");
    opts.add(s, "llm-in-flight", c.llm_in_flight, "Concurrent chat requests")->check(CLI::PositiveNumber);
    opts.add(s, "llm-retries", c.llm_retries, "Re-asks on unparseable responses")->check(CLI::NonNegativeNumber);
    opts.add(s, "replay", c.replay, "Answer chat prompts from a recorded stub file");
    opts.add(s, "record", c.record, "Record chat exchanges to a stub file");
  };
  auto add_build = [&](CLI::App* s) {
    opts.add(s, "summarizer", c.summarizer, "offline or llm");
    opts.add(s, "max-depth", c.max_depth, "Maximum number of index layers")->check(CLI::PositiveNumber);
    opts.add(s, "max-top", c.max_top, "Stop once a level has at most this many nodes")->check(CLI::PositiveNumber);
    opts.add(s, "reducer", c.reducer, "pca or none");
    opts.add(s, "reduce-dim", c.reduce_dim, "Reduced dimension for clustering")->check(CLI::PositiveNumber);
    opts.add(s, "k-min", c.k_min, "Smallest mixture size tried per level");
    opts.add(s, "k-max", c.k_max, "Largest mixture size tried per level");
    opts.add(s, "threshold", c.threshold, "Soft membership threshold");
    opts.add(s, "max-prompt-chars", c.max_prompt_chars, "Cap on child text per summary prompt")->check(CLI::PositiveNumber);
    opts.flag(s, "timestamp", c.timestamp, "Record the build time in the index");
  };
  auto add_search = [&](CLI::App* s) {
    opts.add(s, "k", c.k, "Number of results")->check(CLI::PositiveNumber);
    opts.add(s, "beam", c.beam, "Beam width (default max(k, 10))");
    opts.add(s, "rerank", c.rerank, "on or off")->check(CLI::IsMember({"on", "off"}));
  };

  auto* ingest = app.add_subcommand("ingest", "Validate a catalog (and pairs) and print its statistics");
  opts.add(ingest, "catalog", c.catalog, "Artifact library (JSON lines)")->required();
  opts.add(ingest, "pairs", c.pairs, "Intent/target pairs (JSON lines)");
  opts.add(ingest, "out", c.out, "Write the canonical library here");

  auto* build = app.add_subcommand("build", "Build an index from a catalog");
  opts.add(build, "catalog", c.catalog, "Artifact library (JSON lines)")->required();
  opts.add(build, "out", c.out, "Index file to write")->required();
  add_embedder(build);
  add_llm(build);
  add_build(build);

  auto* search = app.add_subcommand("search", "Recommend artifacts for an intent");
  opts.add(search, "index", c.index, "Index file")->required();
  opts.add(search, "intent", c.intent, "Development intent")->required();
  opts.add(search, "embed-endpoint", c.embed_endpoint, "Remote embeddings URL (else $EMBED_API_BASE)");
  add_llm(search);
  add_search(search);

  auto* bench = app.add_subcommand("bench", "Evaluate a solution on intent/target pairs");
  opts.add(bench, "solution", c.solution, "Solution name")->required();
  opts.add(bench, "catalog", c.catalog, "Artifact library (JSON lines)")->required();
  opts.add(bench, "pairs", c.pairs, "Intent/target pairs (JSON lines)")->required();
  opts.add(bench, "index", c.index, "Prebuilt index for treerec (else built from the catalog)");
  opts.add(bench, "out", c.out, "Write the JSON report here");
  opts.add(bench, "csv", c.csv, "Write a CSV row here");
  opts.add(bench, "vectors", c.vectors, "Word vectors for word2vec/fasttext");
  opts.add(bench, "fraction", c.fraction, "Two-stage subset fraction");
  opts.add(bench, "lsi-rank", c.lsi_rank, "LSI rank (default min(100, n-1))");
  opts.flag(bench, "include-names", c.include_names, "Tokenize artifact names with descriptions");
  opts.flag(bench, "parallel", c.parallel, "Run samples concurrently (timing not comparable)");
  opts.add(bench, "threads", c.threads, "Workers for --parallel")->check(CLI::PositiveNumber);
  add_embedder(bench);
  add_llm(bench);
  add_build(bench);
  add_search(bench);

  auto* stats = app.add_subcommand("stats", "Statistics for a catalog or an index");
  opts.add(stats, "catalog", c.catalog, "Artifact library (JSON lines)");
  opts.add(stats, "index", c.index, "Index file");
  opts.add_optional_int(stats, "level", c.level, "Silhouette for this parent level only");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  std::vector<CLI::App*> active{&app};
  for (auto* s : app.get_subcommands()) active.push_back(s);

  try {
    if (!c.config_path.empty()) {
      std::ifstream in(c.config_path, std::ios::binary);
      json file;
      try {
        file = json::parse(in);
      } catch (const json::parse_error& e) {
        throw UsageError("config: " + c.config_path + " is not valid JSON");
      }
      if (!file.is_object()) throw UsageError("config: " + c.config_path + " must hold a JSON object");
      opts.apply_file(file, active);
    }
    apply_env(c, opts, active);

    auto level = spdlog::level::from_str(c.log_level);
    if (level == spdlog::level::off && c.log_level != "off") throw UsageError("unknown --log-level '" + c.log_level + "'");
    logger.set_level(level);
    if (c.show_config) std::cerr << to_json(c).dump(2) << std::endl;

    if (ingest->parsed()) return cmd_ingest(c);
    if (build->parsed()) return cmd_build(c);
    if (search->parsed()) return cmd_search(c);
    if (bench->parsed()) return cmd_bench(c);
    if (stats->parsed()) return cmd_stats(c);
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
}
