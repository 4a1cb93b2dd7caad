// Copyright 2026 The fvem Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace fvem {

/// Runs independent tasks on a fixed number of threads. Tasks must not
/// share mutable state; results therefore do not depend on the worker count.
class WorkerPool {
 public:
  explicit WorkerPool(std::size_t workers = 1) : workers_(std::max<std::size_t>(1, workers)) {}

  [[nodiscard]] std::size_t workers() const { return workers_; }

  /// Calls fn(i) for i in [0, count). If tasks throw, the exception of the
  /// lowest failing index is rethrown after all threads have joined.
  template <typename Fn>
  void for_each(std::size_t count, Fn&& fn) const {
    std::vector<std::exception_ptr> errors(count);
    const std::size_t threads = std::min(workers_, count);
    if (threads <= 1) {
      for (std::size_t i = 0; i < count; ++i) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    } else {
      std::atomic<std::size_t> next{0};
      auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      };
      std::vector<std::jthread> pool;
      pool.reserve(threads);
      for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

 private:
  std::size_t workers_;
};

}  // namespace fvem
