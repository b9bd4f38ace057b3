#include <benchmark/benchmark.h>

#include <vector>

#include "csmri/kernels.hpp"
#include "csmri/rng.hpp"

namespace k = csmri::kernels;

namespace {

struct Problem {
  k::Dims xd, yd;
  k::ConvGeometry g{3, 1, 1};
  std::vector<double> x, w, b, y, dw, db;

  Problem(int channels, int size) {
    xd = {channels, size, size};
    yd = k::conv_output_dims(xd, channels, g);
    csmri::Rng rng(7);
    auto fill = [&](std::vector<double>& v, std::size_t n) {
      v.resize(n);
      for (double& e : v) e = rng.normal();
    };
    fill(x, static_cast<std::size_t>(xd.size()));
    fill(w, static_cast<std::size_t>(channels) * channels * 9);
    fill(b, static_cast<std::size_t>(channels));
    y.assign(static_cast<std::size_t>(yd.size()), 0.0);
    dw.assign(w.size(), 0.0);
    db.assign(b.size(), 0.0);
  }
};

template <int Mode>
void BM_forward(benchmark::State& state) {
  Problem p(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state) {
    if constexpr (Mode == 0) {
      k::serial::conv2d_forward(p.x, p.xd, p.w, p.b, p.g, p.y, p.yd);
    } else {
      k::parallel::conv2d_forward(p.x, p.xd, p.w, p.b, p.g, p.y, p.yd);
    }
    benchmark::DoNotOptimize(p.y.data());
  }
}

template <int Mode>
void BM_backward_input(benchmark::State& state) {
  Problem p(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  std::vector<double> dx(p.x.size());
  for (auto _ : state) {
    if constexpr (Mode == 0) {
      k::serial::conv2d_backward_input(p.x, p.yd, p.w, p.g, dx, p.xd);
    } else {
      k::parallel::conv2d_backward_input(p.x, p.yd, p.w, p.g, dx, p.xd);
    }
    benchmark::DoNotOptimize(dx.data());
  }
}

template <int Mode>
void BM_backward_weight(benchmark::State& state) {
  Problem p(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state) {
    if constexpr (Mode == 0) {
      k::serial::conv2d_backward_weight(p.x, p.xd, p.x, p.yd, p.g, p.dw, p.db);
    } else {
      k::parallel::conv2d_backward_weight(p.x, p.xd, p.x, p.yd, p.g, p.dw, p.db);
    }
    benchmark::DoNotOptimize(p.dw.data());
  }
}

void shapes(benchmark::internal::Benchmark* b) {
  b->Args({8, 32})->Args({32, 32})->Args({32, 64})->Unit(benchmark::kMicrosecond);
}

}  // namespace

BENCHMARK(BM_forward<0>)->Name("conv_forward/serial")->Apply(shapes);
BENCHMARK(BM_forward<1>)->Name("conv_forward/parallel")->Apply(shapes);
BENCHMARK(BM_backward_input<0>)->Name("conv_backward_input/serial")->Apply(shapes);
BENCHMARK(BM_backward_input<1>)->Name("conv_backward_input/parallel")->Apply(shapes);
BENCHMARK(BM_backward_weight<0>)->Name("conv_backward_weight/serial")->Apply(shapes);
BENCHMARK(BM_backward_weight<1>)->Name("conv_backward_weight/parallel")->Apply(shapes);

BENCHMARK_MAIN();
