#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "splash/image.hpp"
#include "splash/rasterizer.hpp"
#include "splash/scene.hpp"

namespace splash {

/// Gradients co-indexed with a GaussianCloud, plus the medium triplets.
struct GradientBuffer {
  std::vector<Gaussian> gaussians;
  MediumGrad medium;
  /// |dL/d mean2d| in normalized device units, zero for Gaussians not on screen.
  std::vector<double> mean2d_norm;
  std::vector<std::uint8_t> visible;

  explicit GradientBuffer(std::size_t n = 0)
      : gaussians(n, Gaussian::zero()), mean2d_norm(n, 0.0), visible(n, 0) {}

  void reset(std::size_t n);
  bool all_finite() const;
};

/// Screen-space gradients for one projected Gaussian.
struct SplatGrad {
  Vec3 color = Vec3::Zero();
  Vec2 mean2d = Vec2::Zero();
  Vec3 conic = Vec3::Zero();   // w.r.t. (a, b, c) of the inverse covariance
  double opacity_logit = 0.0;

  SplatGrad& operator+=(const SplatGrad& o) {
    color += o.color;
    mean2d += o.mean2d;
    conic += o.conic;
    opacity_logit += o.opacity_logit;
    return *this;
  }
};

/// Back-to-front pass over one pixel's contributors. `d_color` is dL/dC for
/// the clean composite (callers fold in the e^{-B_d z} attenuation). Writes
/// per-entry gradients into `out`, which is co-indexed with `contributors`.
void backward_pixel(std::span<const Projected2D> projected, std::span<const std::uint32_t> contributors,
                    const Vec2& pixel_center, const PixelComposite& forward, const Vec3& d_color,
                    std::span<SplatGrad> out);

/// Chains screen-space gradients of one projection into the 3D parameters.
void backward_projection(const Gaussian& g, int sh_degree, const Camera& cam, const Projected2D& p,
                         const SplatGrad& d, Gaussian& grad);

/// Gradients of the scene parameters given dL/d(rendered color). In
/// underwater mode the remapped depth is treated as a constant. The medium
/// part of the buffer is left untouched.
GradientBuffer backward_render(const GaussianCloud& cloud, const Camera& cam, const RenderOutput& forward,
                               const LinearImage& d_rendered);

/// Medium gradients from one underwater render, plus lambda2 * sign(...) for
/// the guidance anchor when present.
MediumGrad backward_medium(const RenderOutput& forward, const LinearImage& d_rendered,
                           const MediumParams& medium, double lambda2);

// ---------------------------------------------------------------------------
// Finite-difference verification

/// One learnable scalar in a gradient check.
struct FdEntry {
  std::string name;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  double step = 0.0;  // step size whose central difference was used
  bool flagged = false;
};

struct FdReport {
  std::vector<FdEntry> entries;
  double max_rel_error = 0.0;
  std::size_t flagged = 0;
  bool has_medium_rows = false;

  std::string to_table() const;
};

struct FdProblem {
  GaussianCloud cloud;
  MediumParams medium;
  Camera camera;
  RenderMode mode = RenderMode::kUnderwater;
  /// Scalar objective evaluated on (cloud, medium).
  std::function<double(const GaussianCloud&, const MediumParams&)> loss;
  /// Analytic gradient of the same objective.
  std::function<GradientBuffer(const GaussianCloud&, const MediumParams&)> gradient;
};

struct FdOptions {
  double eps_color = 1e-3;
  double eps_logit = 1e-3;
  double eps_position = 1e-4;
  double eps_scale = 1e-4;
  double eps_rotation = 1e-4;
  double eps_medium = 1e-4;
  double tolerance = 1e-3;
  /// Denominator floor of the relative error.
  double floor = 1e-6;
  /// A central difference is trusted once it agrees (within `tolerance`) with
  /// the one at a ten times smaller step; otherwise the step shrinks, at most
  /// this many times. This keeps steps from straddling the 1/255 alpha
  /// cutoff or a depth-order swap.
  int refinements = 2;
};

/// Central differences for every learnable scalar of the problem. Throws
/// NumericError if the loss is not finite.
FdReport finite_diff_check(const FdProblem& problem, const FdOptions& options = {});

}  // namespace splash
