#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "splash/image.hpp"
#include "splash/projection.hpp"
#include "splash/scene.hpp"

namespace splash::test {

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("splash_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline LinearImage random_image(std::mt19937_64& rng, int w, int h, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  LinearImage im(w, h);
  for (double& v : im.data) v = u(rng);
  return im;
}

inline Vec4 random_quaternion(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec4 q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized();
}

inline Camera axis_camera(int w, int h, double f) {
  Camera cam;
  cam.width = w;
  cam.height = h;
  cam.fx = cam.fy = f;
  cam.cx = 0.5 * w;
  cam.cy = 0.5 * h;
  return cam;
}

/// Isotropic screen-space splat, built without the projection module.
inline Projected2D make_splat(Vec2 mean, double sigma, double opacity, double depth, Vec3 color,
                              std::uint32_t index) {
  Projected2D p;
  p.mean2d = mean;
  p.cov2d = Mat2::Identity() * sigma * sigma;
  const double inv = 1.0 / (sigma * sigma);
  p.conic = Vec3(inv, 0.0, inv);
  p.depth = depth;
  p.opacity = opacity;
  p.color = color;
  p.radius = 3.0 * sigma;
  p.source_index = index;
  return p;
}

struct CompositeOracle {
  long double r = 0, g = 0, b = 0, depth = 0, weight = 0;
};

/// Front-to-back compositing in extended precision with the same alpha floor,
/// clamp and stopping rule as the renderer.
inline CompositeOracle composite_oracle(const std::vector<Projected2D>& sorted, Vec2 pixel) {
  CompositeOracle o;
  long double t = 1.0L;
  for (const Projected2D& p : sorted) {
    const long double dx = pixel.x() - p.mean2d.x();
    const long double dy = pixel.y() - p.mean2d.y();
    const long double power = -0.5L * (p.conic[0] * dx * dx + 2.0L * p.conic[1] * dx * dy + p.conic[2] * dy * dy);
    long double a = p.opacity * std::exp(power);
    if (a > 0.99L) a = 0.99L;
    if (a < 1.0L / 255.0L) continue;
    const long double next = t * (1.0L - a);
    if (next < 1e-4L) break;
    const long double w = a * t;
    o.r += w * p.color.x();
    o.g += w * p.color.y();
    o.b += w * p.color.z();
    o.depth += w * p.depth;
    o.weight += w;
    t = next;
  }
  if (o.weight > 1e-8L) o.depth /= o.weight;
  return o;
}

}  // namespace splash::test
