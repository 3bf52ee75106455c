#pragma once

#include <cstdint>
#include <string>

namespace splash {

struct BenchResult {
  int gaussians = 0;
  int width = 0;
  int height = 0;
  int repeats = 0;
  int threads = 0;
  double tiled_ms = 0.0;  // best of `repeats`
  double naive_ms = 0.0;
  double speedup = 0.0;
  double max_abs_diff = 0.0;  // tiled vs naive, clean color

  std::string to_text() const;
};

/// Times the tiled renderer against the serial all-pairs reference on a
/// random scene.
BenchResult run_bench(int gaussians = 500, int width = 256, int height = 256, int repeats = 3,
                      std::uint64_t seed = 1);

}  // namespace splash
