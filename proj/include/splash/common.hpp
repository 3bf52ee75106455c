#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace splash {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat23 = Eigen::Matrix<double, 2, 3>;

/// Side length of a screen tile in pixels.
inline constexpr int kTileSize = 16;
/// Contributions below this opacity are skipped.
inline constexpr double kAlphaMin = 1.0 / 255.0;
/// Per-splat opacity is clamped to this value.
inline constexpr double kAlphaMax = 0.99;
/// Front-to-back traversal stops once transmittance would fall below this.
inline constexpr double kTransmittanceMin = 1e-4;
/// Low-pass dilation added to the screen-space covariance diagonal (pixel^2).
inline constexpr double kCovDilation = 0.3;

// Error classes map one-to-one onto CLI exit codes (2, 3, 4).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double sign_or_zero(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace splash
