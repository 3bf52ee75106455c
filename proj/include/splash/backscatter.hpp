#pragma once

#include <span>
#include <vector>

#include "splash/image.hpp"
#include "splash/scene.hpp"

namespace splash {

/// n evenly spaced values from lo to hi inclusive.
std::vector<double> linspace(double lo, double hi, int n);

struct ClusterLabels {
  std::vector<int> labels;  // interval index per pixel, -1 when outside [edges.front(), edges.back()]
  int clusters = 0;
  bool degenerate = false;  // fewer than two distinct depths: everything in cluster 0
};

/// Labels each pixel with the interval [edges[i], edges[i+1]) holding its
/// depth; the last interval also includes its upper edge.
ClusterLabels cluster_range(const DepthMap& z, std::span<const double> edges);

struct DarkPixelSet {
  std::vector<double> depth;
  std::vector<Vec3> color;
  bool degenerate = false;

  std::size_t size() const { return depth.size(); }
};

/// Per depth cluster, the ceil(p_dark * n) pixels with the smallest channel
/// sum (ties by raster order). Negative inputs are treated as zero.
DarkPixelSet select_dark_pixels(const LinearImage& image, const DepthMap& z, double p_dark = 0.01,
                                int edges_num = 10);

struct ExpFit {
  double b_inf = 0.0;
  double b_b = 0.0;
  double residual = 0.0;  // root mean squared error at the returned parameters
  bool flagged = false;
};

/// Bounded least squares fit of y = b_inf (1 - exp(-b_b z)) with projected
/// Levenberg-Marquardt and a fixed multi-start grid.
ExpFit fit_saturating_exponential(std::span<const double> z, std::span<const double> y,
                                  double binf_max = 1.0, double bb_max = 5.0);

struct BackscatterOptions {
  double p_dark = 0.01;
  int edges_num = 10;
  int intervals_num = 25;
  int resized_height = 300;
};

struct BackscatterEstimate {
  Vec3 veiling_light = Vec3::Zero();
  Vec3 backscatter = Vec3::Zero();
  Vec3 residual = Vec3::Zero();
  std::size_t dark_pixels = 0;
  bool flagged = false;

  BackscatterGuidance guidance() const { return {veiling_light, backscatter}; }
};

/// Dark-pixel backscatter estimate from an observed image and its depth.
/// Raw depths are logistic-remapped first.
BackscatterEstimate estimate_backscatter(const LinearImage& image, const DepthMap& z,
                                         const BackscatterOptions& options = {});

/// Pooled estimate over several views: dark pixels are selected per view and
/// fitted together.
BackscatterEstimate estimate_backscatter(std::span<const LinearImage> images, std::span<const DepthMap> depths,
                                         const BackscatterOptions& options = {});

/// Dark pixels of one view after resizing and remapping, as used by the
/// estimator.
DarkPixelSet backscatter_dark_pixels(const LinearImage& image, const DepthMap& z,
                                     const BackscatterOptions& options = {});

/// Per-interval minima of a dark-pixel set fitted per channel.
BackscatterEstimate fit_backscatter(const DarkPixelSet& dark, const BackscatterOptions& options = {});

/// Bilinear resize with half-pixel centers.
LinearImage resize_bilinear(const LinearImage& image, int width, int height);
/// Nearest-neighbour resize with half-pixel centers.
DepthMap resize_nearest(const DepthMap& depth, int width, int height);

}  // namespace splash
