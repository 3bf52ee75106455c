#pragma once

#include <array>

#include "splash/scene.hpp"

namespace splash {

/// Real spherical-harmonic basis (bands 1..3) evaluated at a unit direction,
/// together with its gradient with respect to the direction. Index k matches
/// `Gaussian::sh[k]`; entry 0 is unused (the base color is not SH-weighted).
struct ShBasis {
  std::array<double, kMaxShCoeffs> value{};
  std::array<Vec3, kMaxShCoeffs> grad{};
};

ShBasis sh_basis(const Vec3& dir, int degree);

/// View-dependent color of `g` seen from `camera_center`.
Vec3 sh_color(const Gaussian& g, int degree, const Vec3& camera_center);

/// Accumulates dL/dsh into `d_sh` and returns dL/dposition contributed by the
/// view direction.
Vec3 sh_color_backward(const Gaussian& g, int degree, const Vec3& camera_center, const Vec3& d_color,
                       std::array<Vec3, kMaxShCoeffs>& d_sh);

}  // namespace splash
