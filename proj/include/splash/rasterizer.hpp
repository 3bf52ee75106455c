#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "splash/image.hpp"
#include "splash/projection.hpp"
#include "splash/scene.hpp"

namespace splash {

enum class RenderMode { kClean, kUnderwater };

/// Per-tile contributor lists in CSR form. `indices` point into the projected
/// array; each tile's slice is sorted by (depth, source_index).
struct TileBins {
  int tiles_x = 0;
  int tiles_y = 0;
  std::vector<std::uint32_t> offsets;  // tiles_x * tiles_y + 1
  std::vector<std::uint32_t> indices;

  int tile_count() const { return tiles_x * tiles_y; }
  std::span<const std::uint32_t> tile(int t) const {
    return std::span(indices).subspan(offsets[t], offsets[t + 1] - offsets[t]);
  }
};

TileBins bin_and_sort(std::span<const Projected2D> projected, int image_width, int image_height,
                      int tile_size = kTileSize);

struct AlphaSample {
  double alpha = 0.0;     // clamped, zero below the 1/255 floor
  double falloff = 0.0;   // exp(-d^T conic d / 2)
  bool clamped = false;   // opacity * falloff exceeded kAlphaMax
};

AlphaSample sample_alpha(const Projected2D& p, const Vec2& pixel_center);

/// opacity * exp(-d^T cov2d^-1 d / 2), clamped to kAlphaMax; values below
/// 1/255 are reported as zero.
inline double alpha_at(const Projected2D& p, const Vec2& pixel_center) {
  return sample_alpha(p, pixel_center).alpha;
}

inline Vec2 pixel_center(int x, int y) { return Vec2(x + 0.5, y + 0.5); }

struct PixelComposite {
  Vec3 color = Vec3::Zero();  // sum c_i alpha_i T_i
  double depth = 0.0;         // raw view-space depth; far plane when weight <= 1e-8
  double weight = 0.0;        // sum alpha_i T_i
  double transmittance = 1.0; // T after the last contributor
  std::uint32_t end = 0;      // one past the last list entry that was composited
  std::uint32_t count = 0;    // contributors actually blended
  bool terminated = false;    // stopped because T would drop below kTransmittanceMin
};

/// Front-to-back compositing over `contributors` (indices into `projected`,
/// already depth-sorted).
PixelComposite composite_pixel(std::span<const Projected2D> projected,
                               std::span<const std::uint32_t> contributors, const Vec2& pixel_center,
                               double far_plane);

struct RenderOutput {
  int width = 0;
  int height = 0;
  RenderMode mode = RenderMode::kClean;

  LinearImage color;         // C (clean) or C_uw (underwater)
  LinearImage clean_color;   // C in both modes
  DepthMap depth;            // raw view-space depth per pixel
  DepthMap medium_depth;     // logistic-remapped depth used by the medium terms
  Raster<1> weight;
  Raster<1> final_transmittance;
  std::vector<std::uint32_t> contributor_count;
  std::vector<std::uint32_t> list_end;
  std::vector<std::uint8_t> terminated;

  // Retained for the backward pass.
  std::vector<Projected2D> projected;
  TileBins bins;
  MediumParams medium;
};

/// Tile-parallel forward pass. Underwater mode requires `medium`.
RenderOutput render(const GaussianCloud& cloud, const Camera& cam, const MediumParams* medium,
                    RenderMode mode);

/// Serial reference: every in-frustum Gaussian is evaluated at every pixel,
/// with no tiling or screen-space culling. Only the color, depth and weight
/// buffers are filled.
RenderOutput render_naive(const GaussianCloud& cloud, const Camera& cam, const MediumParams* medium,
                          RenderMode mode);

}  // namespace splash
