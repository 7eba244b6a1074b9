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
#include <cstddef>
#include <exception>
#include <future>
#include <type_traits>
#include <vector>

namespace treerec::detail {

/// Applies `fn(i)` for i in [0, count) with at most `max_in_flight` calls
/// running at once. Results come back in index order; the first exception
/// (by index) is rethrown after all in-flight work finishes.
template <class Fn>
auto bounded_map(std::size_t count, std::size_t max_in_flight, Fn&& fn)
    -> std::vector<std::invoke_result_t<Fn&, std::size_t>> {
  using R = std::invoke_result_t<Fn&, std::size_t>;
  std::vector<R> out;
  out.reserve(count);
  if (max_in_flight <= 1) {
    for (std::size_t i = 0; i < count; ++i) out.push_back(fn(i));
    return out;
  }
  std::exception_ptr first_error;
  for (std::size_t start = 0; start < count; start += max_in_flight) {
    std::size_t stop = std::min(count, start + max_in_flight);
    std::vector<std::future<R>> wave;
    wave.reserve(stop - start);
    for (std::size_t i = start; i < stop; ++i) wave.push_back(std::async(std::launch::async, [&fn, i] { return fn(i); }));
    for (auto& f : wave) {
      try {
        out.push_back(f.get());
      } catch (...) {
        if (!first_error) first_error = std::current_exception();
      }
    }
    if (first_error) std::rethrow_exception(first_error);
  }
  return out;
}

}  // namespace treerec::detail
