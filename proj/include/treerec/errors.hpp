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

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace treerec {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. `line()` is 1-based, 0 when not line-oriented.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class DuplicateIdError : public ParseError {
 public:
  DuplicateIdError(const std::string& source, std::size_t line, std::string id)
      : ParseError(source, line, "duplicate artifact id '" + id + "'"), id_(std::move(id)) {}
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

class UnresolvedIdError : public ParseError {
 public:
  UnresolvedIdError(const std::string& source, std::size_t line, std::string id)
      : ParseError(source, line, "target_id '" + id + "' does not resolve against the library"),
        id_(std::move(id)) {}
  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(std::size_t expected, std::size_t got)
      : Error("dimension mismatch: expected " + std::to_string(expected) + ", got " +
              std::to_string(got)) {}
};

/// Network failure, throttling past the retry budget, or a missing replay entry.
class TransportError : public Error {
 public:
  using Error::Error;
};

class VersionMismatch : public Error {
 public:
  explicit VersionMismatch(int found)
      : Error("unsupported index version " + std::to_string(found)), found_(found) {}
  int found() const { return found_; }

 private:
  int found_;
};

/// Index structure violation found while loading (cycle, orphan leaf, ...).
class IndexError : public Error {
 public:
  using Error::Error;
};

class CycleError : public IndexError {
 public:
  CycleError(std::string from, std::string to)
      : IndexError("cycle detected in index: '" + from + "' -> '" + to + "'"),
        from_(std::move(from)),
        to_(std::move(to)) {}
  const std::string& from() const { return from_; }
  const std::string& to() const { return to_; }

 private:
  std::string from_;
  std::string to_;
};

/// Tree build aborted; carries how far the build got.
class BuildError : public Error {
 public:
  BuildError(const std::string& what, int completed_levels, std::size_t nodes_built)
      : Error(what + " (completed levels: " + std::to_string(completed_levels) +
              ", nodes built: " + std::to_string(nodes_built) + ")"),
        completed_levels_(completed_levels),
        nodes_built_(nodes_built) {}
  int completed_levels() const { return completed_levels_; }
  std::size_t nodes_built() const { return nodes_built_; }

 private:
  int completed_levels_;
  std::size_t nodes_built_;
};

class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

}  // namespace treerec
