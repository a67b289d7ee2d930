// Serial vs OpenMP kernels. Sizes follow the real workloads: a 25 fps teleop
// session scored against a densified shape, and a 1000 fps linearity capture.

#include "magscan/kernels.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

using namespace magscan;

namespace {

std::vector<Point2> random_points(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<Point2> out(n);
  for (auto& p : out) p = {u(rng), u(rng)};
  return out;
}

std::vector<SpotSample> spot_line(std::size_t n) {
  std::vector<SpotSample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = std::sin(2.0 * 3.141592653589793 * static_cast<double>(i) / static_cast<double>(n));
    out[i] = {{0.36 * s, 0.36 * s}, 0.57, static_cast<double>(i) * 1e-3};
  }
  return out;
}

template <auto Kernel>
void nearest(benchmark::State& st) {
  const auto q = random_points(static_cast<std::size_t>(st.range(0)), 1);
  const auto t = random_points(static_cast<std::size_t>(st.range(1)), 2);
  std::vector<double> out(q.size());
  for (auto _ : st) {
    Kernel(q, t, out);
    benchmark::DoNotOptimize(out.data());
  }
  st.SetItemsProcessed(st.iterations() * st.range(0) * st.range(1));
}

template <auto Kernel>
void render_detect(benchmark::State& st) {
  const auto spots = spot_line(static_cast<std::size_t>(st.range(0)));
  vision::FrameGeometry g;
  g.noise_sigma = 2.0;
  const vision::DetectionConfig d;
  for (auto _ : st) benchmark::DoNotOptimize(Kernel(spots, g, d, 7));
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

}  // namespace

BENCHMARK(nearest<kernels::nearest_distances_serial>)->Name("nearest/serial")->Args({213, 16000})->Args({2000, 4000});
BENCHMARK(nearest<kernels::nearest_distances_parallel>)->Name("nearest/omp")->Args({213, 16000})->Args({2000, 4000});
BENCHMARK(render_detect<kernels::render_detect_serial>)->Name("render_detect/serial")->Arg(200)->Unit(benchmark::kMillisecond);
BENCHMARK(render_detect<kernels::render_detect_parallel>)->Name("render_detect/omp")->Arg(200)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
