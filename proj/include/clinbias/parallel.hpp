// Copyright 2026 The clinbias Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
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

namespace clinbias {

// Runs fn(i) for i in [0, n) on at most `concurrency` threads. Exceptions are
// captured per index instead of aborting the batch; the returned vector is
// empty when every call succeeded.
template <typename Fn>
std::vector<std::pair<std::size_t, std::exception_ptr>> parallel_for(std::size_t n,
                                                                     std::size_t concurrency,
                                                                     Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(concurrency, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  std::vector<std::pair<std::size_t, std::exception_ptr>> failed;
  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) failed.emplace_back(i, errors[i]);
  }
  return failed;
}

}  // namespace clinbias
