// Copyright 2026 The hierattn Authors
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

#include <benchmark/benchmark.h>

#include "hierattn/doc_model.hpp"
#include "hierattn/engine.hpp"
#include "hierattn/mask.hpp"
#include "hierattn/rng.hpp"

using namespace hierattn;

namespace {

LinearDoc bench_doc(int n) {
  return make_synthetic_doc(7, n, SynthShape{12, 12, 16, 16, 1000});
}

void BM_TiledForwardSorted(benchmark::State& state) {
  const LinearDoc d = bench_doc(static_cast<int>(state.range(0)));
  rng::Rng gen(1);
  const auto in = engine::random_attention_input<double>(d.n(), 64, gen);
  const auto perm = engine::sort_kv(d);
  for (auto _ : state) {
    auto out = engine::tiled_forward_with_permutation(in, d, perm, 128, 64);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetLabel("n=" + std::to_string(d.n()));
}

void BM_TiledForwardUnsorted(benchmark::State& state) {
  const LinearDoc d = bench_doc(static_cast<int>(state.range(0)));
  rng::Rng gen(1);
  const auto in = engine::random_attention_input<double>(d.n(), 64, gen);
  const auto perm = engine::identity_permutation(d.n());
  for (auto _ : state) {
    auto out = engine::tiled_forward_with_permutation(in, d, perm, 128, 64);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetLabel("n=" + std::to_string(d.n()));
}

void BM_DenseMasked(benchmark::State& state) {
  const LinearDoc d = bench_doc(static_cast<int>(state.range(0)));
  rng::Rng gen(1);
  const auto in = engine::random_attention_input<double>(d.n(), 64, gen);
  const mask::AttnMask m = mask::doc_mask(d);
  for (auto _ : state) {
    auto out = engine::dense_masked_attention(in, m);
    benchmark::DoNotOptimize(out.data());
  }
}

void BM_SparsePairs(benchmark::State& state) {
  const LinearDoc d = bench_doc(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto edges = mask::sparse_pairs(d);
    benchmark::DoNotOptimize(edges.data());
  }
}

void BM_BlockGrid(benchmark::State& state) {
  const LinearDoc d = bench_doc(static_cast<int>(state.range(0)));
  const auto perm = engine::sort_kv(d);
  for (auto _ : state) {
    auto grid = engine::build_block_grid(d, perm, 128, 64);
    benchmark::DoNotOptimize(grid.nonempty.data());
  }
}

}  // namespace

BENCHMARK(BM_TiledForwardSorted)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TiledForwardUnsorted)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DenseMasked)->Arg(1024)->Arg(2048)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SparsePairs)->Arg(4096)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_BlockGrid)->Arg(4096)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
