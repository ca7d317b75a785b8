/*
 * Copyright (C) 2026 The lshformer Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Serial reference kernels against their OpenMP counterparts.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "lshformer/data.hpp"
#include "lshformer/kernels.hpp"
#include "lshformer/model.hpp"
#include "lshformer/trainer.hpp"

namespace {

using namespace lshformer;

std::vector<float> random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> dist;
  std::vector<float> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

template <bool Parallel>
void BM_Gemm(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto n = static_cast<std::size_t>(state.range(2));
  const auto a = random_vector(m * k, 1);
  const auto b = random_vector(k * n, 2);
  std::vector<float> c(m * n);
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::omp::gemm(a.data(), b.data(), c.data(), m, k, n, false);
    else
      kernels::serial::gemm(a.data(), b.data(), c.data(), m, k, n, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m * k * n));
}

template <bool Parallel>
void BM_GemmNt(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const auto k = static_cast<std::size_t>(state.range(2));
  const auto a = random_vector(m * n, 3);
  const auto b = random_vector(k * n, 4);
  std::vector<float> c(m * k);
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::omp::gemm_nt(a.data(), b.data(), c.data(), m, n, k, false);
    else
      kernels::serial::gemm_nt(a.data(), b.data(), c.data(), m, n, k, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m * n * k));
}

template <bool Parallel>
void BM_BatchGradients(benchmark::State& state) {
  ModelConfig config;
  config.T = 420;
  config.d = 64;
  config.H = 4;
  config.L = 2;
  config.K = static_cast<std::uint32_t>(state.range(0));
  config.N_max = 16;
  config.C = 4;
  config.ffn_dim = 64;
  const auto data = synthetic_corpus({.classes = 4, .examples = 32, .seed = 1});
  const auto batches = make_batches(data.examples, config, ProjectionConfig::make(config.T), 32, std::nullopt);
  const auto params = init_params(config, 1);
  const ForwardOptions options{.training = true, .dropout_p = 0.1, .seed = 1};
  for (auto _ : state) {
    auto grads = ModelParams<float>::zeros(config);
    benchmark::DoNotOptimize(batch_gradients(params, config, batches.front(), options, grads, Parallel));
  }
  state.SetItemsProcessed(state.iterations() * 32);
}

}  // namespace

BENCHMARK(BM_Gemm<false>)->Name("gemm/serial")->ArgsProduct({{64, 128}, {768}, {768, 3072}})->UseRealTime();
BENCHMARK(BM_Gemm<true>)->Name("gemm/omp")->ArgsProduct({{64, 128}, {768}, {768, 3072}})->UseRealTime();
BENCHMARK(BM_GemmNt<false>)->Name("gemm_nt/serial")->Args({128, 64, 128})->Args({128, 768, 768})->UseRealTime();
BENCHMARK(BM_GemmNt<true>)->Name("gemm_nt/omp")->Args({128, 64, 128})->Args({128, 768, 768})->UseRealTime();
BENCHMARK(BM_BatchGradients<false>)->Name("batch_gradients/serial")->Arg(1)->Arg(4)->UseRealTime();
BENCHMARK(BM_BatchGradients<true>)->Name("batch_gradients/parallel")->Arg(1)->Arg(4)->UseRealTime();

BENCHMARK_MAIN();
