#include "splash/backscatter.hpp"

#include <algorithm>
#include <array>
#include <numeric>

#include "splash/medium.hpp"

namespace splash {
namespace {

struct FitState {
  double b_inf;
  double b_b;
};

double cost(std::span<const double> z, std::span<const double> y, const FitState& s) {
  double c = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double r = s.b_inf * (1.0 - std::exp(-s.b_b * z[i])) - y[i];
    c += r * r;
  }
  return c;
}

FitState levenberg_marquardt(std::span<const double> z, std::span<const double> y, FitState s,
                             double binf_max, double bb_max) {
  double lambda = 1e-3;
  double current = cost(z, y, s);
  for (int iter = 0; iter < 200; ++iter) {
    Mat2 jtj = Mat2::Zero();
    Vec2 jtr = Vec2::Zero();
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double e = std::exp(-s.b_b * z[i]);
      const Vec2 j(1.0 - e, s.b_inf * z[i] * e);
      const double r = s.b_inf * (1.0 - e) - y[i];
      jtj += j * j.transpose();
      jtr += j * r;
    }
    bool accepted = false;
    double step = 0.0;
    while (lambda < 1e16) {
      Mat2 a = jtj;
      a(0, 0) += lambda * (jtj(0, 0) + 1e-12);
      a(1, 1) += lambda * (jtj(1, 1) + 1e-12);
      const Vec2 delta = a.ldlt().solve(-jtr);
      FitState next{std::clamp(s.b_inf + delta[0], 0.0, binf_max), std::clamp(s.b_b + delta[1], 0.0, bb_max)};
      const double c = cost(z, y, next);
      if (c < current) {
        step = std::hypot(next.b_inf - s.b_inf, next.b_b - s.b_b);
        s = next;
        current = c;
        lambda = std::max(lambda * 0.1, 1e-12);
        accepted = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted || step < 1e-10) break;
  }
  return s;
}

void zero_negatives(std::vector<double>& v) {
  for (auto& x : v) x = std::max(x, 0.0);
}

}  // namespace

std::vector<double> linspace(double lo, double hi, int n) {
  if (n < 2) throw UsageError("linspace: need at least two points");
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = lo + (hi - lo) * i / (n - 1);
  out.back() = hi;
  return out;
}

ClusterLabels cluster_range(const DepthMap& z, std::span<const double> edges) {
  if (edges.size() < 2) throw UsageError("cluster_range: need at least two edges");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) throw UsageError("cluster_range: edges must be strictly increasing");
  }
  ClusterLabels out;
  out.clusters = static_cast<int>(edges.size()) - 1;
  out.labels.assign(z.pixel_count(), -1);
  if (z.empty()) return out;

  const auto [lo, hi] = std::minmax_element(z.data.begin(), z.data.end());
  if (*lo == *hi) {
    out.degenerate = true;
    std::fill(out.labels.begin(), out.labels.end(), 0);
    return out;
  }
  for (std::size_t i = 0; i < z.data.size(); ++i) {
    const double d = z.data[i];
    if (d < edges.front() || d > edges.back()) continue;
    if (d == edges.back()) {
      out.labels[i] = out.clusters - 1;
      continue;
    }
    out.labels[i] = static_cast<int>(std::upper_bound(edges.begin(), edges.end(), d) - edges.begin()) - 1;
  }
  return out;
}

DarkPixelSet select_dark_pixels(const LinearImage& image, const DepthMap& z, double p_dark, int edges_num) {
  if (image.empty()) throw DataError("select_dark_pixels: empty image");
  if (!image.same_shape(z)) throw DataError("select_dark_pixels: image and depth shapes differ");
  if (!(p_dark > 0.0 && p_dark <= 1.0)) throw UsageError("select_dark_pixels: p_dark must be in (0, 1]");

  std::vector<double> color = image.data;
  std::vector<double> depth = z.data;
  zero_negatives(color);
  zero_negatives(depth);

  DepthMap zc(z.width, z.height, 0.0, z.units);
  zc.data = depth;
  const auto [lo, hi] = std::minmax_element(depth.begin(), depth.end());
  ClusterLabels labels;
  if (*lo == *hi) {
    labels.clusters = 1;
    labels.degenerate = true;
    labels.labels.assign(depth.size(), 0);
  } else {
    const auto edges = linspace(*lo, *hi, edges_num);
    labels = cluster_range(zc, edges);
  }

  std::vector<std::vector<std::uint32_t>> members(labels.clusters);
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    if (labels.labels[i] >= 0) members[labels.labels[i]].push_back(static_cast<std::uint32_t>(i));
  }

  DarkPixelSet out;
  out.degenerate = labels.degenerate;
  auto brightness = [&](std::uint32_t i) { return color[i * 3] + color[i * 3 + 1] + color[i * 3 + 2]; };
  for (auto& m : members) {
    if (m.empty()) continue;
    std::stable_sort(m.begin(), m.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return brightness(a) < brightness(b); });
    const auto take = static_cast<std::size_t>(std::ceil(p_dark * m.size() - 1e-9));
    for (std::size_t k = 0; k < std::max<std::size_t>(take, 1); ++k) {
      const std::uint32_t i = m[k];
      out.depth.push_back(depth[i]);
      out.color.emplace_back(color[i * 3], color[i * 3 + 1], color[i * 3 + 2]);
    }
  }
  return out;
}

ExpFit fit_saturating_exponential(std::span<const double> z, std::span<const double> y, double binf_max,
                                  double bb_max) {
  if (z.size() != y.size()) throw DataError("fit_saturating_exponential: length mismatch");
  if (z.empty()) throw DataError("fit_saturating_exponential: no data");

  ExpFit out;
  const double n = static_cast<double>(y.size());
  if (std::all_of(y.begin(), y.end(), [](double v) { return v == 0.0; })) return out;

  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / n;
  const double max = *std::max_element(y.begin(), y.end());
  const auto [zlo, zhi] = std::minmax_element(z.begin(), z.end());
  if (*zlo == *zhi) {
    out.b_inf = std::clamp(mean, 0.0, binf_max);
    out.b_b = bb_max;
    out.residual = std::sqrt(cost(z, y, {out.b_inf, out.b_b}) / n);
    out.flagged = true;
    return out;
  }

  FitState best{0.0, 0.0};
  double best_cost = std::numeric_limits<double>::infinity();
  for (double bb : {0.1, 0.5, 1.0, 2.0, 4.0}) {
    for (double binf : {mean, max}) {
      FitState s{std::clamp(binf, 0.0, binf_max), std::clamp(bb, 0.0, bb_max)};
      s = levenberg_marquardt(z, y, s, binf_max, bb_max);
      const double c = cost(z, y, s);
      if (c < best_cost) {
        best_cost = c;
        best = s;
      }
    }
  }
  out.b_inf = best.b_inf;
  out.b_b = best.b_b;
  out.residual = std::sqrt(best_cost / n);
  return out;
}

LinearImage resize_bilinear(const LinearImage& image, int width, int height) {
  if (image.same_shape(width, height)) return image;
  LinearImage out(width, height);
  const double sx = static_cast<double>(image.width) / width;
  const double sy = static_cast<double>(image.height) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double ty = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double tx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = image.at(x0, y0, c) * (1.0 - tx) + image.at(x1, y0, c) * tx;
        const double bottom = image.at(x0, y1, c) * (1.0 - tx) + image.at(x1, y1, c) * tx;
        out.at(x, y, c) = top * (1.0 - ty) + bottom * ty;
      }
    }
  }
  return out;
}

DepthMap resize_nearest(const DepthMap& depth, int width, int height) {
  if (depth.same_shape(width, height)) return depth;
  DepthMap out(width, height, 0.0, depth.units);
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(depth.height - 1, static_cast<int>((y + 0.5) * depth.height / height));
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(depth.width - 1, static_cast<int>((x + 0.5) * depth.width / width));
      out.at(x, y) = depth.at(sx, sy);
    }
  }
  return out;
}

DarkPixelSet backscatter_dark_pixels(const LinearImage& image, const DepthMap& z, const BackscatterOptions& opt) {
  if (image.empty()) throw DataError("estimate_backscatter: empty image");
  if (!image.same_shape(z)) throw DataError("estimate_backscatter: image and depth shapes differ");
  if (opt.intervals_num < 2 || opt.edges_num < 2 || opt.resized_height < 1) {
    throw UsageError("estimate_backscatter: invalid options");
  }

  const int h = std::min(opt.resized_height, image.height);
  const int w = std::max(1, static_cast<int>(std::lround(static_cast<double>(image.width) * h / image.height)));
  LinearImage small = resize_bilinear(image, w, h);
  DepthMap depth = resize_nearest(z, w, h);
  if (depth.units == DepthUnits::kRaw) depth = logistic_remap(depth);
  zero_negatives(small.data);
  zero_negatives(depth.data);
  return select_dark_pixels(small, depth, opt.p_dark, opt.edges_num);
}

BackscatterEstimate fit_backscatter(const DarkPixelSet& dark, const BackscatterOptions& opt) {
  if (dark.size() == 0) throw DataError("estimate_backscatter: no dark pixels");
  if (opt.intervals_num < 2) throw UsageError("estimate_backscatter: invalid options");
  BackscatterEstimate out;
  out.dark_pixels = dark.size();
  out.flagged = dark.degenerate;

  const auto [lo, hi] = std::minmax_element(dark.depth.begin(), dark.depth.end());
  const int buckets = opt.intervals_num - 1;
  std::vector<double> edges;
  if (*lo < *hi) edges = linspace(*lo, *hi, opt.intervals_num);

  for (int c = 0; c < 3; ++c) {
    std::vector<double> best_v(buckets, std::numeric_limits<double>::infinity());
    std::vector<double> best_z(buckets, 0.0);
    for (std::size_t i = 0; i < dark.size(); ++i) {
      int b = 0;
      if (!edges.empty()) {
        b = static_cast<int>(std::upper_bound(edges.begin(), edges.end(), dark.depth[i]) - edges.begin()) - 1;
        b = std::clamp(b, 0, buckets - 1);
      }
      if (dark.color[i][c] < best_v[b]) {
        best_v[b] = dark.color[i][c];
        best_z[b] = dark.depth[i];
      }
    }
    std::vector<double> zs, vs;
    for (int b = 0; b < buckets; ++b) {
      if (std::isfinite(best_v[b])) {
        zs.push_back(best_z[b]);
        vs.push_back(best_v[b]);
      }
    }
    const ExpFit fit = fit_saturating_exponential(zs, vs, MediumParams::kMaxVeilingLight,
                                                  MediumParams::kMaxBackscatter);
    out.veiling_light[c] = fit.b_inf;
    out.backscatter[c] = fit.b_b;
    out.residual[c] = fit.residual;
    out.flagged = out.flagged || fit.flagged;
  }
  return out;
}

BackscatterEstimate estimate_backscatter(const LinearImage& image, const DepthMap& z,
                                         const BackscatterOptions& opt) {
  return fit_backscatter(backscatter_dark_pixels(image, z, opt), opt);
}

BackscatterEstimate estimate_backscatter(std::span<const LinearImage> images, std::span<const DepthMap> depths,
                                         const BackscatterOptions& opt) {
  if (images.size() != depths.size()) throw DataError("estimate_backscatter: image and depth counts differ");
  if (images.empty()) throw DataError("estimate_backscatter: no views");
  DarkPixelSet pooled;
  pooled.degenerate = true;
  for (std::size_t v = 0; v < images.size(); ++v) {
    DarkPixelSet d = backscatter_dark_pixels(images[v], depths[v], opt);
    pooled.depth.insert(pooled.depth.end(), d.depth.begin(), d.depth.end());
    pooled.color.insert(pooled.color.end(), d.color.begin(), d.color.end());
    pooled.degenerate = pooled.degenerate && d.degenerate;
  }
  return fit_backscatter(pooled, opt);
}

}  // namespace splash
