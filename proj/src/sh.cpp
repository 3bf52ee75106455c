#include "splash/sh.hpp"

namespace splash {
namespace {

constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                          -1.0925484305920792, 0.5462742152960396};
constexpr double kC3[] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                          0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                          -0.5900435899266435};

}  // namespace

ShBasis sh_basis(const Vec3& d, int degree) {
  ShBasis b;
  if (degree < 1) return b;
  const double x = d.x(), y = d.y(), z = d.z();
  b.value[1] = -kC1 * y;
  b.value[2] = kC1 * z;
  b.value[3] = -kC1 * x;
  b.grad[1] = Vec3(0.0, -kC1, 0.0);
  b.grad[2] = Vec3(0.0, 0.0, kC1);
  b.grad[3] = Vec3(-kC1, 0.0, 0.0);
  if (degree < 2) return b;

  const double xx = x * x, yy = y * y, zz = z * z;
  b.value[4] = kC2[0] * x * y;
  b.value[5] = kC2[1] * y * z;
  b.value[6] = kC2[2] * (2.0 * zz - xx - yy);
  b.value[7] = kC2[3] * x * z;
  b.value[8] = kC2[4] * (xx - yy);
  b.grad[4] = kC2[0] * Vec3(y, x, 0.0);
  b.grad[5] = kC2[1] * Vec3(0.0, z, y);
  b.grad[6] = kC2[2] * Vec3(-2.0 * x, -2.0 * y, 4.0 * z);
  b.grad[7] = kC2[3] * Vec3(z, 0.0, x);
  b.grad[8] = kC2[4] * Vec3(2.0 * x, -2.0 * y, 0.0);
  if (degree < 3) return b;

  b.value[9] = kC3[0] * y * (3.0 * xx - yy);
  b.value[10] = kC3[1] * x * y * z;
  b.value[11] = kC3[2] * y * (4.0 * zz - xx - yy);
  b.value[12] = kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
  b.value[13] = kC3[4] * x * (4.0 * zz - xx - yy);
  b.value[14] = kC3[5] * z * (xx - yy);
  b.value[15] = kC3[6] * x * (xx - 3.0 * yy);
  b.grad[9] = kC3[0] * Vec3(6.0 * x * y, 3.0 * xx - 3.0 * yy, 0.0);
  b.grad[10] = kC3[1] * Vec3(y * z, x * z, x * y);
  b.grad[11] = kC3[2] * Vec3(-2.0 * x * y, 4.0 * zz - xx - 3.0 * yy, 8.0 * y * z);
  b.grad[12] = kC3[3] * Vec3(-6.0 * x * z, -6.0 * y * z, 6.0 * zz - 3.0 * xx - 3.0 * yy);
  b.grad[13] = kC3[4] * Vec3(4.0 * zz - 3.0 * xx - yy, -2.0 * x * y, 8.0 * x * z);
  b.grad[14] = kC3[5] * Vec3(2.0 * x * z, -2.0 * y * z, xx - yy);
  b.grad[15] = kC3[6] * Vec3(3.0 * xx - 3.0 * yy, -6.0 * x * y, 0.0);
  return b;
}

Vec3 sh_color(const Gaussian& g, int degree, const Vec3& camera_center) {
  Vec3 color = g.sh[0];
  if (degree < 1) return color;
  const Vec3 dir = (g.position - camera_center).normalized();
  const ShBasis b = sh_basis(dir, degree);
  for (int k = 1; k < sh_coeff_count(degree); ++k) color += b.value[k] * g.sh[k];
  return color;
}

Vec3 sh_color_backward(const Gaussian& g, int degree, const Vec3& camera_center, const Vec3& d_color,
                       std::array<Vec3, kMaxShCoeffs>& d_sh) {
  d_sh[0] += d_color;
  if (degree < 1) return Vec3::Zero();
  const Vec3 offset = g.position - camera_center;
  const double r = offset.norm();
  const Vec3 dir = offset / r;
  const ShBasis b = sh_basis(dir, degree);
  Vec3 d_dir = Vec3::Zero();
  for (int k = 1; k < sh_coeff_count(degree); ++k) {
    d_sh[k] += b.value[k] * d_color;
    d_dir += d_color.dot(g.sh[k]) * b.grad[k];
  }
  // dir = offset / |offset|
  return (d_dir - dir * dir.dot(d_dir)) / r;
}

}  // namespace splash
