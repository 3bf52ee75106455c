#include "splash/projection.hpp"

#include <algorithm>

#include "splash/sh.hpp"

namespace splash {
namespace {

struct PixelRange {
  int x0, y0, x1, y1;
};

// Pixels whose centers fall in [mean - radius, mean + radius], clipped to the image.
PixelRange pixel_range(const Vec2& mean, double radius, int width, int height) {
  PixelRange r;
  r.x0 = std::max(0, static_cast<int>(std::ceil(mean.x() - radius - 0.5)));
  r.y0 = std::max(0, static_cast<int>(std::ceil(mean.y() - radius - 0.5)));
  r.x1 = std::min(width - 1, static_cast<int>(std::floor(mean.x() + radius - 0.5)));
  r.y1 = std::min(height - 1, static_cast<int>(std::floor(mean.y() + radius - 0.5)));
  return r;
}

}  // namespace

double max_eigenvalue(const Mat2& m) {
  const double mid = 0.5 * (m(0, 0) + m(1, 1));
  const double half_diff = 0.5 * (m(0, 0) - m(1, 1));
  return mid + std::sqrt(half_diff * half_diff + m(0, 1) * m(0, 1));
}

std::optional<Projected2D> project_gaussian(const Gaussian& g, int sh_degree, const Camera& cam,
                                            std::uint32_t source_index, bool screen_cull) {
  const Vec3 p = cam.to_view(g.position);
  if (!(p.z() > cam.near_plane) || !(p.z() < cam.far_plane)) {
    return std::nullopt;
  }
  const double op = opacity(g);
  if (op < kAlphaMin) {
    return std::nullopt;
  }

  Projected2D out;
  out.source_index = source_index;
  out.view_position = p;
  out.depth = p.z();
  out.opacity = op;

  const double inv_z = 1.0 / p.z();
  out.mean2d = Vec2(cam.fx * p.x() * inv_z + cam.cx, cam.fy * p.y() * inv_z + cam.cy);

  Mat23& j = out.jacobian;
  j << cam.fx * inv_z, 0.0, -cam.fx * p.x() * inv_z * inv_z,
      0.0, cam.fy * inv_z, -cam.fy * p.y() * inv_z * inv_z;
  const Mat23 t = j * cam.rotation;
  out.cov2d = t * covariance(g) * t.transpose();
  out.cov2d(0, 1) = out.cov2d(1, 0) = 0.5 * (out.cov2d(0, 1) + out.cov2d(1, 0));
  out.cov2d(0, 0) += kCovDilation;
  out.cov2d(1, 1) += kCovDilation;

  const double det = out.cov2d.determinant();
  if (!(det > 0.0)) {
    return std::nullopt;
  }
  out.conic = Vec3(out.cov2d(1, 1) / det, -out.cov2d(0, 1) / det, out.cov2d(0, 0) / det);

  // alpha = opacity * exp(-q/2) >= 1/255 needs q <= 2 ln(255 opacity), and q >= |d|^2 / lambda_max,
  // so every pixel with alpha >= 1/255 lies within this radius.
  const double mahalanobis_sq = 2.0 * std::log(op / kAlphaMin);
  out.radius = std::sqrt(max_eigenvalue(out.cov2d) * mahalanobis_sq) * (1.0 + 1e-9) + 1e-9;

  const PixelRange r = pixel_range(out.mean2d, out.radius, cam.width, cam.height);
  if (screen_cull && (r.x1 < r.x0 || r.y1 < r.y0)) {
    return std::nullopt;
  }
  out.color = sh_color(g, sh_degree, cam.center());
  return out;
}

std::vector<Projected2D> project_cloud(const GaussianCloud& cloud, const Camera& cam) {
  const auto n = static_cast<std::int64_t>(cloud.size());
  std::vector<std::optional<Projected2D>> slots(cloud.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    slots[i] = project_gaussian(cloud.gaussians[i], cloud.sh_degree, cam, static_cast<std::uint32_t>(i));
  }
  std::vector<Projected2D> out;
  out.reserve(cloud.size());
  for (auto& s : slots) {
    if (s) out.push_back(std::move(*s));
  }
  return out;
}

TileRect tile_span(const Projected2D& p, int image_width, int image_height, int tile_size) {
  const PixelRange r = pixel_range(p.mean2d, p.radius, image_width, image_height);
  if (r.x1 < r.x0 || r.y1 < r.y0) {
    return TileRect{};
  }
  return TileRect{r.x0 / tile_size, r.y0 / tile_size, r.x1 / tile_size, r.y1 / tile_size};
}

}  // namespace splash
