/*
 * Copyright 2026 The tpsim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */


// Serial reference against the OpenMP kernels, plus whole-block and
// simulator throughput.

#include <benchmark/benchmark.h>

#include "tpsim/exec.hpp"
#include "tpsim/kernels.hpp"
#include "tpsim/perf.hpp"

namespace {

using namespace tpsim;

void BM_MatmulSerial(benchmark::State& state) {
  const auto n = state.range(0);
  const Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::reference::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_MatmulSerial)->Arg(64)->Arg(256);

void BM_MatmulParallel(benchmark::State& state) {
  const auto n = state.range(0);
  const Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_MatmulParallel)->Arg(64)->Arg(256);

void BM_BlockMonolithic(benchmark::State& state) {
  const auto cfg = preset("tinyllama", Mode::kPrompt);
  const auto w = random_block_weights(cfg, 3);
  const Matrix x = random_matrix(cfg.query_len(), cfg.embed_dim, 4);
  for (auto _ : state) benchmark::DoNotOptimize(run_block_monolithic(x, w, cfg));
}
BENCHMARK(BM_BlockMonolithic)->Unit(benchmark::kMillisecond);

void BM_BlockPartitioned(benchmark::State& state) {
  const auto cfg = preset("tinyllama", Mode::kPrompt);
  const auto w = random_block_weights(cfg, 3);
  const Matrix x = random_matrix(cfg.query_len(), cfg.embed_dim, 4);
  const auto plan = plan_partition(cfg, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(run_block_partitioned(x, plan, w, cfg));
}
BENCHMARK(BM_BlockPartitioned)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_Sweep(benchmark::State& state) {
  const auto cfg = preset("tinyllama-scaled", Mode::kAutoregressive);
  const std::vector<int> ns = {1, 2, 4, 8, 16, 32, 64};
  for (auto _ : state) benchmark::DoNotOptimize(sweep(cfg, ns, Platform{}));
}
BENCHMARK(BM_Sweep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
