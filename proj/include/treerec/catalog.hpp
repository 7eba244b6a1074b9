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

// Artifact libraries and intent/artifact benchmark pairs, stored as
// UTF-8 JSON lines:
//
//   {"id": "...", "name": "...", "description": "...", "ecosystem": "...", "extra": {...}}
//   {"intent": "...", "target_id": "..."}

#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "treerec/errors.hpp"
#include "treerec/log.hpp"
#include "treerec/text.hpp"

namespace treerec {

struct Artifact {
  std::string id;
  std::string name;
  std::string description;
  std::string ecosystem;
  // Carried opaquely; never read by any algorithm.
  std::map<std::string, std::string> extra;

  bool operator==(const Artifact&) const = default;
};

class ArtifactLibrary {
 public:
  ArtifactLibrary() = default;

  /// Validates ids and descriptions. Throws ValidationError on the first violation.
  explicit ArtifactLibrary(std::vector<Artifact> artifacts) {
    for (auto& a : artifacts) add(std::move(a));
    if (artifacts_.empty()) throw ValidationError("artifact library is empty");
  }

  const std::string& ecosystem() const {
    static const std::string none;
    return artifacts_.empty() ? none : artifacts_.front().ecosystem;
  }
  const std::vector<Artifact>& artifacts() const { return artifacts_; }
  std::size_t size() const { return artifacts_.size(); }
  bool empty() const { return artifacts_.empty(); }
  const Artifact& operator[](std::size_t i) const { return artifacts_[i]; }

  const Artifact* find(const std::string& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &artifacts_[it->second];
  }
  bool contains(const std::string& id) const { return by_id_.count(id) != 0; }

  auto begin() const { return artifacts_.begin(); }
  auto end() const { return artifacts_.end(); }

  bool operator==(const ArtifactLibrary& o) const { return artifacts_ == o.artifacts_; }

 private:
  friend ArtifactLibrary parse_library(std::istream&, const std::string&);

  void add(Artifact a) {
    if (a.id.empty()) throw ValidationError("artifact id is empty");
    a.description = std::string(text::trim(a.description));
    if (a.description.empty())
      throw ValidationError("artifact '" + a.id + "' has an empty description");
    if (!by_id_.emplace(a.id, artifacts_.size()).second)
      throw ValidationError("duplicate artifact id '" + a.id + "'");
    artifacts_.push_back(std::move(a));
  }

  std::vector<Artifact> artifacts_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

struct IntentSample {
  std::string intent;
  std::string target_id;

  bool operator==(const IntentSample&) const = default;
};

namespace detail {

inline std::string required_string(const nlohmann::json& obj, const char* key,
                                   const std::string& source, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string())
    throw ParseError(source, line, std::string("missing string field '") + key + "'");
  return it->get<std::string>();
}

inline std::string optional_string(const nlohmann::json& obj, const char* key,
                                   const std::string& source, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return {};
  if (!it->is_string())
    throw ParseError(source, line, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

inline nlohmann::json parse_json_line(const std::string& raw, const std::string& source,
                                      std::size_t line) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(source, line, std::string("invalid JSON: ") + e.what());
  }
  if (!obj.is_object()) throw ParseError(source, line, "expected a JSON object");
  return obj;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return in;
}

}  // namespace detail

/// Reads one artifact per non-blank line, preserving file order.
inline ArtifactLibrary parse_library(std::istream& in, const std::string& source = "<stream>") {
  ArtifactLibrary lib;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (text::trim(raw).empty()) continue;
    auto obj = detail::parse_json_line(raw, source, line);

    Artifact a;
    a.id = detail::required_string(obj, "id", source, line);
    if (a.id.empty()) throw ParseError(source, line, "artifact id is empty");
    a.name = detail::optional_string(obj, "name", source, line);
    a.description = std::string(text::trim(detail::required_string(obj, "description", source, line)));
    if (a.description.empty())
      throw ParseError(source, line, "artifact '" + a.id + "' has an empty description");
    a.ecosystem = detail::optional_string(obj, "ecosystem", source, line);
    if (auto it = obj.find("extra"); it != obj.end() && !it->is_null()) {
      if (!it->is_object()) throw ParseError(source, line, "field 'extra' must be an object");
      for (auto& [k, v] : it->items()) a.extra[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
    if (lib.contains(a.id)) throw DuplicateIdError(source, line, a.id);
    lib.add(std::move(a));
  }
  if (lib.empty()) throw ValidationError(source + ": artifact library is empty");
  return lib;
}

inline ArtifactLibrary load_library(const std::string& path) {
  auto in = detail::open_input(path);
  return parse_library(in, path);
}

inline nlohmann::json to_json(const Artifact& a) {
  nlohmann::json j = {{"id", a.id},
                      {"name", a.name},
                      {"description", a.description},
                      {"ecosystem", a.ecosystem}};
  if (!a.extra.empty()) j["extra"] = a.extra;
  return j;
}

inline void write_library(std::ostream& out, const ArtifactLibrary& lib) {
  for (const auto& a : lib) out << to_json(a).dump() << '\n';
}

inline void save_library(const ArtifactLibrary& lib, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  write_library(out, lib);
}

/// Every target_id must resolve against `lib`. An empty input yields an empty list and a warning.
inline std::vector<IntentSample> parse_pairs(std::istream& in, const ArtifactLibrary& lib,
                                             const std::string& source = "<stream>") {
  std::vector<IntentSample> out;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (text::trim(raw).empty()) continue;
    auto obj = detail::parse_json_line(raw, source, line);
    IntentSample s{detail::required_string(obj, "intent", source, line),
                   detail::required_string(obj, "target_id", source, line)};
    if (!lib.contains(s.target_id)) throw UnresolvedIdError(source, line, s.target_id);
    out.push_back(std::move(s));
  }
  if (out.empty()) log().warn("{}: no intent pairs found", source);
  return out;
}

inline std::vector<IntentSample> load_pairs(const std::string& path, const ArtifactLibrary& lib) {
  auto in = detail::open_input(path);
  return parse_pairs(in, lib, path);
}

inline void write_pairs(std::ostream& out, const std::vector<IntentSample>& pairs) {
  for (const auto& p : pairs)
    out << nlohmann::json{{"intent", p.intent}, {"target_id", p.target_id}}.dump() << '\n';
}

struct LibraryStats {
  std::size_t count = 0;
  double mean_words = 0;
  std::size_t max_words = 0;
  std::size_t min_words = 0;
};

inline LibraryStats library_stats(const ArtifactLibrary& lib) {
  if (lib.empty()) throw ValidationError("library_stats: empty library");
  LibraryStats s;
  s.count = lib.size();
  s.min_words = static_cast<std::size_t>(-1);
  std::size_t total = 0;
  for (const auto& a : lib) {
    auto w = text::word_count(a.description);
    total += w;
    s.max_words = std::max(s.max_words, w);
    s.min_words = std::min(s.min_words, w);
  }
  s.mean_words = static_cast<double>(total) / static_cast<double>(s.count);
  return s;
}

inline nlohmann::json to_json(const LibraryStats& s) {
  return {{"count", s.count},
          {"description_words", {{"mean", s.mean_words}, {"max", s.max_words}, {"min", s.min_words}}}};
}

}  // namespace treerec
