#pragma once

#include <cstddef>
#include <vector>

#include "splash/common.hpp"

namespace splash {

/// Row-major interleaved float64 raster with a compile-time channel count.
template <int Channels>
struct Raster {
  static constexpr int kChannels = Channels;

  int width = 0;
  int height = 0;
  std::vector<double> data;

  Raster() = default;
  Raster(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h * Channels, fill) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }

  double& at(int x, int y, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * Channels + c];
  }
  double at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * Channels + c];
  }

  bool same_shape(int w, int h) const { return width == w && height == h; }
  template <int Other>
  bool same_shape(const Raster<Other>& o) const {
    return width == o.width && height == o.height;
  }
};

/// Linear (non gamma-encoded) RGB image.
using LinearImage = Raster<3>;

enum class DepthUnits { kRaw, kRemapped };

/// Per-pixel scene depth. Remapped depths lie in [0, 1).
struct DepthMap : Raster<1> {
  DepthUnits units = DepthUnits::kRemapped;

  DepthMap() = default;
  DepthMap(int w, int h, double fill = 0.0, DepthUnits u = DepthUnits::kRemapped)
      : Raster<1>(w, h, fill), units(u) {}
};

}  // namespace splash
