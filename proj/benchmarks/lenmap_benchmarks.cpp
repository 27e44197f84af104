#include <benchmark/benchmark.h>

#include <vector>

#include "lenmap/activation.hpp"
#include "lenmap/length_map.hpp"
#include "lenmap/quadrature.hpp"
#include "lenmap/random.hpp"
#include "lenmap/simulator.hpp"

namespace {

void BM_FillNormals(benchmark::State& state) {
  std::vector<double> out(static_cast<std::size_t>(state.range(0)));
  const auto key = lenmap::key_from_seed(1);
  std::uint32_t row = 0;
  for (auto _ : state) {
    lenmap::fill_normals(key, {row++, 0, 0}, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FillNormals)->Arg(1024)->Arg(4096);

void BM_FillUniforms(benchmark::State& state) {
  std::vector<double> out(static_cast<std::size_t>(state.range(0)));
  const auto key = lenmap::key_from_seed(1);
  std::uint32_t row = 0;
  for (auto _ : state) {
    lenmap::fill_uniforms(key, {row++, 0, 0}, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FillUniforms)->Arg(4096);

void BM_ForwardOnce(benchmark::State& state) {
  lenmap::NetworkConfig cfg;
  cfg.width = static_cast<std::size_t>(state.range(0));
  cfg.depth = 2;
  cfg.sigma_w = 1.4142135623730951;
  std::uint64_t trial = 0;
  for (auto _ : state) benchmark::DoNotOptimize(lenmap::forward_once(cfg, trial++));
  state.SetItemsProcessed(state.iterations() * state.range(0) * (state.range(0) + 1) * 2);
}
BENCHMARK(BM_ForwardOnce)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_SecondMoment(benchmark::State& state) {
  const auto act = state.range(0) == 0 ? lenmap::Activation::tanh() : lenmap::Activation::relu();
  double q = 0.5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(lenmap::gaussian_second_moment(act, q));
    q = q < 4.0 ? q * 1.01 : 0.5;
  }
  state.SetLabel(act.name());
}
BENCHMARK(BM_SecondMoment)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_LengthMap(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(lenmap::compute_length_map(lenmap::Activation::tanh(), 1.3, 0.2, 50));
  }
}
BENCHMARK(BM_LengthMap)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
