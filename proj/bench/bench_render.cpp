// Tiled vs naive render timing across scene sizes.
#include <cstdio>
#include <cstdlib>

#include "splash/bench.hpp"

int main(int argc, char** argv) {
  const int repeats = argc > 1 ? std::atoi(argv[1]) : 3;
  std::printf("%9s %9s %11s %11s %8s %10s\n", "gaussians", "size", "tiled_ms", "naive_ms", "speedup", "max_diff");
  for (int n : {100, 500, 2000}) {
    for (int size : {64, 256}) {
      const splash::BenchResult r = splash::run_bench(n, size, size, repeats);
      std::printf("%9d %6dx%-3d %11.3f %11.3f %8.2f %10.2e\n", n, size, size, r.tiled_ms, r.naive_ms, r.speedup,
                  r.max_abs_diff);
    }
  }
  return 0;
}
