#include "splash/rasterizer.hpp"

#include <algorithm>
#include <numeric>

#include "splash/medium.hpp"

namespace splash {
namespace {

// Global (depth, source_index) order over the projected array.
std::vector<std::uint32_t> depth_order(std::span<const Projected2D> projected) {
  std::vector<std::uint32_t> order(projected.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    const auto& pa = projected[a];
    const auto& pb = projected[b];
    if (pa.depth != pb.depth) return pa.depth < pb.depth;
    return pa.source_index < pb.source_index;
  });
  return order;
}

void apply_medium_terms(RenderOutput& out, const MediumParams& m) {
  const auto n = static_cast<std::int64_t>(out.color.pixel_count());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const double z = out.medium_depth.data[i];
    for (int c = 0; c < 3; ++c) {
      const double clean = out.clean_color.data[i * 3 + c];
      out.color.data[i * 3 + c] = clean * std::exp(-m.attenuation[c] * z) +
                                  m.veiling_light[c] * (1.0 - std::exp(-m.backscatter[c] * z));
    }
  }
}

RenderOutput allocate_output(const Camera& cam, RenderMode mode) {
  RenderOutput out;
  out.width = cam.width;
  out.height = cam.height;
  out.mode = mode;
  out.color = LinearImage(cam.width, cam.height);
  out.clean_color = LinearImage(cam.width, cam.height);
  out.depth = DepthMap(cam.width, cam.height, cam.far_plane, DepthUnits::kRaw);
  out.medium_depth = DepthMap(cam.width, cam.height, 0.0, DepthUnits::kRemapped);
  out.weight = Raster<1>(cam.width, cam.height);
  out.final_transmittance = Raster<1>(cam.width, cam.height, 1.0);
  const std::size_t n = out.color.pixel_count();
  out.contributor_count.assign(n, 0);
  out.list_end.assign(n, 0);
  out.terminated.assign(n, 0);
  return out;
}

void store_pixel(RenderOutput& out, int x, int y, const PixelComposite& px) {
  const std::size_t i = static_cast<std::size_t>(y) * out.width + x;
  for (int c = 0; c < 3; ++c) {
    out.clean_color.data[i * 3 + c] = px.color[c];
    out.color.data[i * 3 + c] = px.color[c];
  }
  out.depth.data[i] = px.depth;
  out.medium_depth.data[i] = logistic_remap(px.depth);
  out.weight.data[i] = px.weight;
  out.final_transmittance.data[i] = px.transmittance;
  out.contributor_count[i] = px.count;
  out.list_end[i] = px.end;
  out.terminated[i] = px.terminated ? 1 : 0;
}

void check_mode(const MediumParams* medium, RenderMode mode) {
  if (mode == RenderMode::kUnderwater && medium == nullptr) {
    throw UsageError("render: underwater mode requires medium parameters");
  }
}

}  // namespace

TileBins bin_and_sort(std::span<const Projected2D> projected, int image_width, int image_height,
                      int tile_size) {
  TileBins bins;
  bins.tiles_x = (image_width + tile_size - 1) / tile_size;
  bins.tiles_y = (image_height + tile_size - 1) / tile_size;
  const int tiles = bins.tile_count();

  std::vector<TileRect> spans(projected.size());
  std::vector<std::uint32_t> counts(tiles + 1, 0);
  for (std::size_t i = 0; i < projected.size(); ++i) {
    spans[i] = tile_span(projected[i], image_width, image_height, tile_size);
    const TileRect& r = spans[i];
    for (int ty = r.y0; ty <= r.y1; ++ty) {
      for (int tx = r.x0; tx <= r.x1; ++tx) ++counts[ty * bins.tiles_x + tx];
    }
  }
  bins.offsets.assign(tiles + 1, 0);
  for (int t = 0; t < tiles; ++t) bins.offsets[t + 1] = bins.offsets[t] + counts[t];
  bins.indices.resize(bins.offsets[tiles]);

  // Scattering in global depth order leaves every tile slice sorted.
  std::vector<std::uint32_t> cursor(bins.offsets.begin(), bins.offsets.end() - 1);
  for (std::uint32_t idx : depth_order(projected)) {
    const TileRect& r = spans[idx];
    for (int ty = r.y0; ty <= r.y1; ++ty) {
      for (int tx = r.x0; tx <= r.x1; ++tx) bins.indices[cursor[ty * bins.tiles_x + tx]++] = idx;
    }
  }
  return bins;
}

AlphaSample sample_alpha(const Projected2D& p, const Vec2& center) {
  const Vec2 d = center - p.mean2d;
  const double power =
      -0.5 * (p.conic[0] * d.x() * d.x() + p.conic[2] * d.y() * d.y()) - p.conic[1] * d.x() * d.y();
  AlphaSample s;
  if (power > 0.0) return s;
  s.falloff = std::exp(power);
  const double a = p.opacity * s.falloff;
  s.clamped = a > kAlphaMax;
  s.alpha = s.clamped ? kAlphaMax : a;
  if (s.alpha < kAlphaMin) s.alpha = 0.0;
  return s;
}

PixelComposite composite_pixel(std::span<const Projected2D> projected,
                               std::span<const std::uint32_t> contributors, const Vec2& center,
                               double far_plane) {
  PixelComposite px;
  double t = 1.0;
  double depth_sum = 0.0;
  for (std::uint32_t k = 0; k < contributors.size(); ++k) {
    const Projected2D& p = projected[contributors[k]];
    const double alpha = sample_alpha(p, center).alpha;
    if (alpha == 0.0) continue;
    const double next_t = t * (1.0 - alpha);
    if (next_t < kTransmittanceMin) {
      px.terminated = true;
      break;
    }
    const double w = alpha * t;
    px.color += w * p.color;
    depth_sum += w * p.depth;
    px.weight += w;
    t = next_t;
    px.end = k + 1;
    ++px.count;
  }
  px.transmittance = t;
  px.depth = px.weight > 1e-8 ? depth_sum / px.weight : far_plane;
  return px;
}

RenderOutput render(const GaussianCloud& cloud, const Camera& cam, const MediumParams* medium,
                    RenderMode mode) {
  check_mode(medium, mode);
  cam.validate();
  RenderOutput out = allocate_output(cam, mode);
  out.projected = project_cloud(cloud, cam);
  out.bins = bin_and_sort(out.projected, cam.width, cam.height);
  if (medium) out.medium = *medium;

  const int tiles = out.bins.tile_count();
#pragma omp parallel for schedule(dynamic, 1)
  for (int t = 0; t < tiles; ++t) {
    const auto list = out.bins.tile(t);
    const int tx = t % out.bins.tiles_x;
    const int ty = t / out.bins.tiles_x;
    const int x_end = std::min(cam.width, (tx + 1) * kTileSize);
    const int y_end = std::min(cam.height, (ty + 1) * kTileSize);
    for (int y = ty * kTileSize; y < y_end; ++y) {
      for (int x = tx * kTileSize; x < x_end; ++x) {
        store_pixel(out, x, y, composite_pixel(out.projected, list, pixel_center(x, y), cam.far_plane));
      }
    }
  }
  if (mode == RenderMode::kUnderwater) apply_medium_terms(out, *medium);
  return out;
}

RenderOutput render_naive(const GaussianCloud& cloud, const Camera& cam, const MediumParams* medium,
                          RenderMode mode) {
  check_mode(medium, mode);
  cam.validate();
  RenderOutput out = allocate_output(cam, mode);
  if (medium) out.medium = *medium;

  std::vector<Projected2D> all;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    auto p = project_gaussian(cloud.gaussians[i], cloud.sh_degree, cam, static_cast<std::uint32_t>(i),
                              /*screen_cull=*/false);
    if (p) all.push_back(*p);
  }
  const std::vector<std::uint32_t> order = depth_order(all);
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      store_pixel(out, x, y, composite_pixel(all, order, pixel_center(x, y), cam.far_plane));
    }
  }
  if (mode == RenderMode::kUnderwater) apply_medium_terms(out, *medium);
  return out;
}

}  // namespace splash
