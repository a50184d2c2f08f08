// Copyright 2026 The strec Authors
// SPDX-License-Identifier: Apache-2.0

// Parallel kernels against their serial references.

#include <benchmark/benchmark.h>

#include <vector>

#include "strec/kernels.hpp"
#include "strec/random.hpp"

namespace {

namespace k = strec::kernels;

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  strec::Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

template <bool kReference>
void BM_Gemm(benchmark::State& state) {
  const auto n = state.range(0);
  const auto a = noise(static_cast<std::size_t>(n * n), 1);
  const auto b = noise(static_cast<std::size_t>(n * n), 2);
  std::vector<double> c(static_cast<std::size_t>(n * n));
  for (auto _ : state) {
    if constexpr (kReference) {
      k::reference::gemm(false, false, n, n, n, 1.0, a.data(), n, b.data(), n, 0.0, c.data(), n);
    } else {
      k::gemm(false, false, n, n, n, 1.0, a.data(), n, b.data(), n, 0.0, c.data(), n);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}

// A middle backbone block: 64 -> 128 channels on an 8x25 map.
k::ConvGeometry conv_geometry(std::int64_t batch) {
  k::ConvGeometry g;
  g.batch = batch;
  g.in_channels = 64;
  g.in_h = 8;
  g.in_w = 25;
  g.out_channels = 128;
  g.kernel_h = g.kernel_w = 3;
  g.pad_h = g.pad_w = 1;
  return g;
}

template <bool kReference>
void BM_Conv(benchmark::State& state) {
  const auto g = conv_geometry(state.range(0));
  const auto x = noise(static_cast<std::size_t>(g.batch * g.in_channels * g.in_h * g.in_w), 3);
  const auto w = noise(static_cast<std::size_t>(g.out_channels * g.in_channels * 9), 4);
  const auto bias = noise(static_cast<std::size_t>(g.out_channels), 5);
  std::vector<double> y(static_cast<std::size_t>(g.batch * g.out_channels * g.out_h() * g.out_w()));
  for (auto _ : state) {
    if constexpr (kReference) {
      k::reference::conv2d_forward(g, x.data(), w.data(), bias.data(), y.data());
    } else {
      k::conv2d_forward(g, x.data(), w.data(), bias.data(), y.data());
    }
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool kReference>
void BM_GridSample(benchmark::State& state) {
  k::SampleGeometry g;
  g.batch = state.range(0);
  g.channels = 3;
  g.in_h = 64;
  g.in_w = 256;
  g.out_h = 32;
  g.out_w = 100;
  const auto x = noise(static_cast<std::size_t>(g.batch * 3 * 64 * 256), 6);
  auto grid = noise(static_cast<std::size_t>(g.batch * 32 * 100 * 2), 7);
  for (double& v : grid) v = 0.5 + 0.5 * v;
  std::vector<double> y(static_cast<std::size_t>(g.batch * 3 * 32 * 100));
  for (auto _ : state) {
    if constexpr (kReference) {
      k::reference::grid_sample_forward(g, x.data(), grid.data(), y.data());
    } else {
      k::grid_sample_forward(g, x.data(), grid.data(), y.data());
    }
    benchmark::DoNotOptimize(y.data());
  }
}

BENCHMARK(BM_Gemm<true>)->Name("gemm/reference")->Arg(64)->Arg(256);
BENCHMARK(BM_Gemm<false>)->Name("gemm/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_Conv<true>)->Name("conv3x3/reference")->Arg(1)->Arg(16);
BENCHMARK(BM_Conv<false>)->Name("conv3x3/parallel")->Arg(1)->Arg(16);
BENCHMARK(BM_GridSample<true>)->Name("grid_sample/reference")->Arg(1)->Arg(16);
BENCHMARK(BM_GridSample<false>)->Name("grid_sample/parallel")->Arg(1)->Arg(16);

}  // namespace

BENCHMARK_MAIN();
