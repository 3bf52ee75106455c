#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "splash/common.hpp"

namespace splash {

inline constexpr int kMaxShDegree = 3;
inline constexpr int kMaxShCoeffs = (kMaxShDegree + 1) * (kMaxShDegree + 1);

inline constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

/// One 3D Gaussian primitive.
///
/// `sh[0]` holds the base RGB color directly; higher bands (when the cloud's
/// degree allows) add view-dependent offsets. Opacity is stored as a logit and
/// the rotation as a (w, x, y, z) quaternion that is normalized on use.
struct Gaussian {
  Vec3 position = Vec3::Zero();
  Vec3 log_scale = Vec3::Zero();
  Vec4 rotation = Vec4(1.0, 0.0, 0.0, 0.0);
  std::array<Vec3, kMaxShCoeffs> sh = make_zero_sh();
  double opacity_logit = 0.0;

  static std::array<Vec3, kMaxShCoeffs> make_zero_sh() {
    std::array<Vec3, kMaxShCoeffs> out;
    out.fill(Vec3::Zero());
    return out;
  }

  /// All-zero parameter block, used for gradients and optimizer moments.
  static Gaussian zero() {
    Gaussian g;
    g.rotation.setZero();
    return g;
  }
};

/// Rotation matrix of the normalized quaternion (w, x, y, z).
Mat3 rotation_matrix(const Vec4& q);

/// Sigma = R S S^T R^T with S = diag(exp(log_scale)).
Mat3 covariance(const Gaussian& g);

/// sigmoid(opacity_logit).
double opacity(const Gaussian& g);

struct GaussianCloud {
  std::vector<Gaussian> gaussians;
  int sh_degree = 0;
  /// Bumped whenever densification or pruning changes the set of primitives.
  std::uint64_t generation = 0;

  std::size_t size() const { return gaussians.size(); }
  bool empty() const { return gaussians.empty(); }
};

/// Backscatter estimate used to anchor the learned medium parameters.
struct BackscatterGuidance {
  Vec3 veiling_light = Vec3::Zero();  // estimated B_inf
  Vec3 backscatter = Vec3::Zero();    // estimated B_b
};

/// Per-channel medium coefficients of the underwater image-formation model.
struct MediumParams {
  Vec3 attenuation = Vec3::Zero();    // B_d >= 0
  Vec3 veiling_light = Vec3::Zero();  // B_inf in [0, 1]
  Vec3 backscatter = Vec3::Zero();    // B_b in [0, 5]
  std::optional<BackscatterGuidance> guidance;

  static constexpr double kMaxVeilingLight = 1.0;
  static constexpr double kMaxBackscatter = 5.0;

  /// Projects the coefficients back into their admissible boxes.
  void clamp();
  bool within_bounds() const;
};

/// Gradient (or optimizer moment) for the three medium triplets.
struct MediumGrad {
  Vec3 attenuation = Vec3::Zero();
  Vec3 veiling_light = Vec3::Zero();
  Vec3 backscatter = Vec3::Zero();
};

/// Pinhole camera. View space is x right, y down, z forward.
struct Camera {
  int width = 0;
  int height = 0;
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  Mat3 rotation = Mat3::Identity();  // world -> view
  Vec3 translation = Vec3::Zero();   // world -> view
  double near_plane = 0.01;
  double far_plane = 100.0;

  /// Throws DataError when the intrinsics or clip planes are invalid.
  void validate() const;

  Vec3 to_view(const Vec3& world) const { return rotation * world + translation; }
  Vec3 center() const { return -(rotation.transpose() * translation); }

  /// Camera at `eye` looking at `target`; `up` is the world up direction.
  static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width, int height,
                        double focal, double near_plane = 0.01, double far_plane = 100.0);
};

/// Everything needed to resume optimization.
struct TrainState {
  GaussianCloud cloud;
  MediumParams medium;

  std::vector<Gaussian> moment1;  // co-indexed with cloud.gaussians
  std::vector<Gaussian> moment2;
  MediumGrad medium_moment1;
  MediumGrad medium_moment2;
  std::uint64_t adam_steps = 0;

  std::uint64_t iteration = 0;

  // Densification statistics.
  std::vector<double> grad_accum;
  std::vector<std::uint32_t> grad_count;

  /// Resizes moments and statistics to match the cloud, zero-filled.
  void reset_auxiliary();
  bool consistent() const;
};

}  // namespace splash
