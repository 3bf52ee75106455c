#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "splash/scene.hpp"

namespace splash {

/// Screen-space footprint of one Gaussian for one camera.
struct Projected2D {
  Vec2 mean2d = Vec2::Zero();  // pixels; pixel (x, y) has its center at (x + 0.5, y + 0.5)
  Mat2 cov2d = Mat2::Identity();
  Vec3 conic = Vec3::Zero();   // inverse of cov2d as (a, b, c)
  double depth = 0.0;          // view-space z of the mean
  double radius = 0.0;         // pixels; alpha < 1/255 outside this disc
  double opacity = 0.0;        // sigmoid(logit)
  Vec3 color = Vec3::Zero();   // SH-evaluated for this view
  std::uint32_t source_index = 0;

  // Retained for the backward pass.
  Vec3 view_position = Vec3::Zero();
  Mat23 jacobian = Mat23::Zero();  // d mean2d / d view_position
};

/// Inclusive tile rectangle.
struct TileRect {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;

  bool empty() const { return x1 < x0 || y1 < y0; }
  bool contains(int tx, int ty) const { return tx >= x0 && tx <= x1 && ty >= y0 && ty <= y1; }
  int area() const { return empty() ? 0 : (x1 - x0 + 1) * (y1 - y0 + 1); }
};

/// Largest eigenvalue of a symmetric 2x2 matrix.
double max_eigenvalue(const Mat2& m);

/// Projects one Gaussian with the local affine (EWA) approximation of the
/// pinhole camera. Returns nullopt when the Gaussian is culled: depth outside
/// (near, far), opacity too low to ever reach 1/255, or no pixel center within
/// its footprint radius. With `screen_cull` off only the depth and opacity
/// tests apply.
std::optional<Projected2D> project_gaussian(const Gaussian& g, int sh_degree, const Camera& cam,
                                            std::uint32_t source_index = 0, bool screen_cull = true);

/// Projects the whole cloud in parallel; culled Gaussians are omitted and the
/// survivors keep ascending source_index order.
std::vector<Projected2D> project_cloud(const GaussianCloud& cloud, const Camera& cam);

/// Tiles holding at least one pixel center whose distance to mean2d is within
/// the footprint radius. Empty when no such pixel lies inside the image.
TileRect tile_span(const Projected2D& p, int image_width, int image_height, int tile_size = kTileSize);

}  // namespace splash
