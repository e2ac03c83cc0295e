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

#include "blab/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace blab::kernels {

namespace {

int threads_from_env() {
  const char* raw = std::getenv("BOTTLENECK_LAB_THREADS");
  if (raw == nullptr || *raw == '\0') return 0;
  try {
    const int n = std::stoi(raw);
    return n < 0 ? 0 : n;
  } catch (const std::exception&) {
    return 0;
  }
}

std::atomic<int>& thread_setting() {
  static std::atomic<int> threads{threads_from_env()};
  return threads;
}

// Below this many multiply-adds the fork/join costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

bool use_parallel(std::size_t m, std::size_t k, std::size_t n) {
  return thread_count() > 1 && m > 1 && m * k * n >= kParallelWork;
}

}  // namespace

int thread_count() { return thread_setting().load(); }

void set_thread_count(int threads) { thread_setting().store(threads < 0 ? 0 : threads); }

void gemm_nn_serial(std::span<const double> a, std::span<const double> b, std::span<double> c,
                    std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

void gemm_nn_parallel(std::span<const double> a, std::span<const double> b, std::span<double> c,
                      std::size_t m, std::size_t k, std::size_t n, int threads) {
  const auto rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) num_threads(threads)
  for (long i = 0; i < rows; ++i) {
    double* crow = c.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
  (void)threads;
}

void gemm_tn_serial(std::span<const double> a, std::span<const double> b, std::span<double> c,
                    std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t q = 0; q < k; ++q) {
    double* crow = c.data() + q * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double aiq = a[i * k + q];
      const double* brow = b.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aiq * brow[j];
    }
  }
}

void gemm_tn_parallel(std::span<const double> a, std::span<const double> b, std::span<double> c,
                      std::size_t m, std::size_t k, std::size_t n, int threads) {
  const auto out_rows = static_cast<long>(k);
#pragma omp parallel for schedule(static) num_threads(threads)
  for (long q = 0; q < out_rows; ++q) {
    double* crow = c.data() + q * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double aiq = a[i * k + q];
      const double* brow = b.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aiq * brow[j];
    }
  }
  (void)threads;
}

void gemm_nt_serial(std::span<const double> a, std::span<const double> b, std::span<double> c,
                    std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a.data() + i * n;
    for (std::size_t q = 0; q < k; ++q) {
      const double* brow = b.data() + q * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += arow[j] * brow[j];
      c[i * k + q] += acc;
    }
  }
}

void gemm_nt_parallel(std::span<const double> a, std::span<const double> b, std::span<double> c,
                      std::size_t m, std::size_t k, std::size_t n, int threads) {
  const auto rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) num_threads(threads)
  for (long i = 0; i < rows; ++i) {
    const double* arow = a.data() + i * n;
    for (std::size_t q = 0; q < k; ++q) {
      const double* brow = b.data() + q * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += arow[j] * brow[j];
      c[i * k + q] += acc;
    }
  }
  (void)threads;
}

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  if (use_parallel(m, k, n)) {
    gemm_nn_parallel(a, b, c, m, k, n, thread_count());
  } else {
    gemm_nn_serial(a, b, c, m, k, n);
  }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  if (use_parallel(k, m, n)) {
    gemm_tn_parallel(a, b, c, m, k, n, thread_count());
  } else {
    gemm_tn_serial(a, b, c, m, k, n);
  }
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  if (use_parallel(m, k, n)) {
    gemm_nt_parallel(a, b, c, m, k, n, thread_count());
  } else {
    gemm_nt_serial(a, b, c, m, k, n);
  }
}

}  // namespace blab::kernels
