#include "splash/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <limits>

#include <omp.h>

#include "splash/rasterizer.hpp"
#include "splash/synthetic.hpp"

namespace splash {
namespace {

template <typename F>
double best_ms(int repeats, F&& f) {
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

}  // namespace

std::string BenchResult::to_text() const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "gaussians=%d\nwidth=%d\nheight=%d\nrepeats=%d\nthreads=%d\ntiled_ms=%.3f\nnaive_ms=%.3f\n"
                "speedup=%.2f\nmax_abs_diff=%.3e\n",
                gaussians, width, height, repeats, threads, tiled_ms, naive_ms, speedup, max_abs_diff);
  return buf;
}

BenchResult run_bench(int gaussians, int width, int height, int repeats, std::uint64_t seed) {
  if (gaussians < 1 || width < 1 || height < 1 || repeats < 1) throw UsageError("bench: invalid arguments");
  const Camera cam = default_camera(width, height);
  const GaussianCloud cloud = random_cloud(seed, gaussians, cam);

  BenchResult r;
  r.gaussians = gaussians;
  r.width = width;
  r.height = height;
  r.repeats = repeats;
  r.threads = omp_get_max_threads();

  RenderOutput tiled, naive;
  r.tiled_ms = best_ms(repeats, [&] { tiled = render(cloud, cam, nullptr, RenderMode::kClean); });
  r.naive_ms = best_ms(repeats, [&] { naive = render_naive(cloud, cam, nullptr, RenderMode::kClean); });
  r.speedup = r.naive_ms / std::max(r.tiled_ms, 1e-9);
  for (std::size_t i = 0; i < tiled.color.size(); ++i) {
    r.max_abs_diff = std::max(r.max_abs_diff, std::abs(tiled.color.data[i] - naive.color.data[i]));
  }
  return r;
}

}  // namespace splash
