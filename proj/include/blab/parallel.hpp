/*
 * Copyright 2026 The bottleneck-lab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

#include "blab/kernels.hpp"

namespace blab {

/// Runs fn(i) for i in [0, n) across kernels::thread_count() threads.
/// Results must be written to per-index slots. The first exception thrown
/// (lowest index) is rethrown after the loop.
template <class F>
void parallel_for(std::size_t n, F&& fn) {
  const int threads = kernels::thread_count();
  std::exception_ptr error;
  std::size_t error_index = n;
  std::mutex mu;
  const auto guarded = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      std::lock_guard<std::mutex> lock(mu);
      if (i < error_index) {
        error_index = i;
        error = std::current_exception();
      }
    }
  };
#ifdef _OPENMP
  if (threads > 1) {
    const long long count = static_cast<long long>(n);
#pragma omp parallel for num_threads(threads) schedule(dynamic)
    for (long long i = 0; i < count; ++i) guarded(static_cast<std::size_t>(i));
  } else {
    for (std::size_t i = 0; i < n; ++i) guarded(i);
  }
#else
  (void)threads;
  for (std::size_t i = 0; i < n; ++i) guarded(i);
#endif
  if (error) std::rethrow_exception(error);
}

}  // namespace blab
