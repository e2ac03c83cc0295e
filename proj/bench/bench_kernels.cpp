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

// Serial reference vs OpenMP GEMM kernels, plus one end-to-end encode.
//
//   BOTTLENECK_LAB_THREADS=8 ./bench_kernels

#include <benchmark/benchmark.h>

#include <vector>

#include "blab/kernels.hpp"
#include "blab/model.hpp"
#include "blab/pipeline.hpp"

namespace {

using namespace blab;

int bench_threads() { return std::max(2, kernels::thread_count()); }

std::vector<double> filled(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

void BM_gemm_nn_serial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = filled(n * n, 1), b = filled(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    kernels::gemm_nn_serial(a, b, c, n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}

void BM_gemm_nn_parallel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = filled(n * n, 1), b = filled(n * n, 2);
  std::vector<double> c(n * n);
  const int threads = bench_threads();
  for (auto _ : state) {
    kernels::gemm_nn_parallel(a, b, c, n, n, n, threads);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
  state.counters["threads"] = threads;
}

void BM_gemm_tn_serial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = filled(n * n, 3), b = filled(n * n, 4);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    kernels::gemm_tn_serial(a, b, c, n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}

void BM_gemm_tn_parallel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = filled(n * n, 3), b = filled(n * n, 4);
  std::vector<double> c(n * n);
  const int threads = bench_threads();
  for (auto _ : state) {
    kernels::gemm_tn_parallel(a, b, c, n, n, n, threads);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
  state.counters["threads"] = threads;
}

void BM_gemm_nt_serial(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = filled(n * n, 5), b = filled(n * n, 6);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    kernels::gemm_nt_serial(a, b, c, n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}

void BM_gemm_nt_parallel(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = filled(n * n, 5), b = filled(n * n, 6);
  std::vector<double> c(n * n);
  const int threads = bench_threads();
  for (auto _ : state) {
    kernels::gemm_nt_parallel(a, b, c, n, n, n, threads);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
  state.counters["threads"] = threads;
}

void BM_sentence_vectors(benchmark::State& state) {
  const RunConfig cfg;
  const auto texts = texts_of(generate_toy_corpus(cfg.corpus_spec()));
  ModelConfig mc = cfg.model;
  const Vocabulary vocab = build_vocab(texts);
  mc.encoder.vocab_size = vocab.size();
  const Autobot model = Autobot::initialize(mc, vocab, 0);
  const int saved = kernels::thread_count();
  kernels::set_thread_count(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(sentence_vectors(model, texts));
  kernels::set_thread_count(saved);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(texts.size()));
}

}  // namespace

BENCHMARK(BM_gemm_nn_serial)->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(BM_gemm_nn_parallel)->RangeMultiplier(2)->Range(32, 256)->UseRealTime();
BENCHMARK(BM_gemm_tn_serial)->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(BM_gemm_tn_parallel)->RangeMultiplier(2)->Range(32, 256)->UseRealTime();
BENCHMARK(BM_gemm_nt_serial)->RangeMultiplier(2)->Range(32, 256);
BENCHMARK(BM_gemm_nt_parallel)->RangeMultiplier(2)->Range(32, 256)->UseRealTime();
BENCHMARK(BM_sentence_vectors)->Arg(1)->Arg(4)->UseRealTime()->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
