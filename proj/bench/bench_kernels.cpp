// Copyright 2026 The wdaseg Authors
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

// Parallel kernels against the serial direct-loop references, at the shapes
// the segmentation network uses for a 64x64 batch of four.

#include <benchmark/benchmark.h>

#include "wdaseg/kernels.hpp"
#include "wdaseg/rng.hpp"

namespace {

using namespace wdaseg;
namespace k = wdaseg::kernels;

Tensor random_tensor(int n, int h, int w, int c, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(n, h, w, c);
  for (auto& v : t.v) v = rng.normal();
  return t;
}

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

// Args: input extent, in channels, out channels, stride.
struct ConvCase {
  Tensor x;
  k::ConvShape s;
  std::vector<double> w, b;
  Tensor dy;

  explicit ConvCase(const benchmark::State& state) {
    const int hw = static_cast<int>(state.range(0));
    s = {static_cast<int>(state.range(1)), static_cast<int>(state.range(2)), 3, static_cast<int>(state.range(3))};
    x = random_tensor(4, hw, hw, s.in_c, 1);
    w = random_vec(s.weight_count(), 2);
    b = random_vec(s.out_c, 3);
    dy = random_tensor(4, s.out_extent(hw), s.out_extent(hw), s.out_c, 4);
  }
  double flops() const { return 2.0 * dy.size() * s.patch(); }
};

template <bool Reference>
void BM_ConvForward(benchmark::State& state) {
  ConvCase c(state);
  Tensor y;
  for (auto _ : state) {
    if constexpr (Reference) {
      k::reference::conv_forward(c.x, c.w, c.b, c.s, y);
    } else {
      k::conv_forward(c.x, c.w, c.b, c.s, y);
    }
    benchmark::DoNotOptimize(y.v.data());
  }
  state.counters["GFLOP/s"] = benchmark::Counter(c.flops() * 1e-9, benchmark::Counter::kIsIterationInvariantRate);
}

template <bool Reference>
void BM_ConvBackward(benchmark::State& state) {
  ConvCase c(state);
  std::vector<double> dw(c.w.size()), db(c.b.size());
  Tensor dx;
  for (auto _ : state) {
    if constexpr (Reference) {
      k::reference::conv_backward(c.x, c.dy, c.w, c.s, dw, db, &dx);
    } else {
      k::conv_backward(c.x, c.dy, c.w, c.s, dw, db, &dx);
    }
    benchmark::DoNotOptimize(dx.v.data());
  }
  state.counters["GFLOP/s"] =
      benchmark::Counter(2.0 * c.flops() * 1e-9, benchmark::Counter::kIsIterationInvariantRate);
}

template <bool Reference>
void BM_Upsample(benchmark::State& state) {
  const Tensor a = random_tensor(4, 16, 16, 6, 5);
  Tensor out;
  for (auto _ : state) {
    if constexpr (Reference) {
      k::reference::upsample_bilinear(a, 4, out);
    } else {
      k::upsample_bilinear(a, 4, out);
    }
    benchmark::DoNotOptimize(out.v.data());
  }
}

template <bool Reference>
void BM_UpsampleBackward(benchmark::State& state) {
  const Tensor g = random_tensor(4, 64, 64, 6, 6);
  Tensor da;
  for (auto _ : state) {
    if constexpr (Reference) {
      k::reference::upsample_bilinear_backward(g, 4, da);
    } else {
      k::upsample_bilinear_backward(g, 4, da);
    }
    benchmark::DoNotOptimize(da.v.data());
  }
}

void conv_args(benchmark::internal::Benchmark* b) {
  b->Args({64, 3, 32, 1})->Args({64, 32, 32, 2})->Args({32, 32, 32, 1})->Args({32, 32, 32, 2});
  b->Unit(benchmark::kMillisecond);
}

BENCHMARK(BM_ConvForward<false>)->Apply(conv_args)->Name("conv_forward/parallel");
BENCHMARK(BM_ConvForward<true>)->Apply(conv_args)->Name("conv_forward/reference");
BENCHMARK(BM_ConvBackward<false>)->Apply(conv_args)->Name("conv_backward/parallel");
BENCHMARK(BM_ConvBackward<true>)->Apply(conv_args)->Name("conv_backward/reference");
BENCHMARK(BM_Upsample<false>)->Name("upsample/parallel")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Upsample<true>)->Name("upsample/reference")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_UpsampleBackward<false>)->Name("upsample_backward/parallel")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_UpsampleBackward<true>)->Name("upsample_backward/reference")->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
