#include <benchmark/benchmark.h>

#include <vector>

#include "sploc/kernels.hpp"
#include "sploc/phantom.hpp"

namespace {

const sploc::Volume& bench_volume() {
  static const sploc::Volume v = [] {
    sploc::PhantomSpec spec;
    spec.class_label = 1;
    spec.rotation = {0.3, -0.2, 0.4};
    spec.seed = 7;
    return sploc::generate_phantom(spec).volume;
  }();
  return v;
}

sploc::kernels::SliceGrid bench_grid(int size) {
  return {{1.0, -2.0, 0.5}, {0.8, 0.6, 0.0}, {0.0, 0.0, 1.0}, size, 64.0};
}

template <auto Kernel>
void BM_Slice(benchmark::State& state) {
  const auto& v = bench_volume();
  const auto grid = bench_grid(static_cast<int>(state.range(0)));
  std::vector<double> out(static_cast<std::size_t>(grid.size) * grid.size);
  for (auto _ : state) {
    Kernel(v, grid, out);
    benchmark::DoNotOptimize(out.data());
  }
}
BENCHMARK(BM_Slice<sploc::kernels::slice_serial>)->Name("slice_serial")->Arg(64)->Arg(128);
BENCHMARK(BM_Slice<sploc::kernels::slice_parallel>)->Name("slice_parallel")->Arg(64)->Arg(128);

template <auto Kernel>
void BM_Pool(benchmark::State& state) {
  const auto& v = bench_volume();
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(v, 4));
}
BENCHMARK(BM_Pool<sploc::kernels::pool_volume_serial>)->Name("pool_serial");
BENCHMARK(BM_Pool<sploc::kernels::pool_volume_parallel>)->Name("pool_parallel");

template <auto Kernel>
void BM_Ssim(benchmark::State& state) {
  const auto& v = bench_volume();
  const int n = static_cast<int>(state.range(0));
  std::vector<double> a(static_cast<std::size_t>(n) * n), b(a.size());
  sploc::kernels::slice_serial(v, bench_grid(n), a);
  auto g = bench_grid(n);
  g.center = {0.0, 0.0, 0.0};
  sploc::kernels::slice_serial(v, g, b);
  const sploc::kernels::SsimParams params;
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(a, b, n, n, params));
}
BENCHMARK(BM_Ssim<sploc::kernels::ssim_serial>)->Name("ssim_serial")->Arg(64)->Arg(128);
BENCHMARK(BM_Ssim<sploc::kernels::ssim_parallel>)->Name("ssim_parallel")->Arg(64)->Arg(128);

void BM_Phantom(benchmark::State& state) {
  sploc::PhantomSpec spec;
  spec.seed = 3;
  for (auto _ : state) benchmark::DoNotOptimize(sploc::generate_phantom(spec));
}
BENCHMARK(BM_Phantom)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
