#include "splash/scene.hpp"

#include <algorithm>

namespace splash {

Mat3 rotation_matrix(const Vec4& q_raw) {
  const Vec4 q = q_raw / q_raw.norm();
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 r;
  r << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
      2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
      2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
  return r;
}

Mat3 covariance(const Gaussian& g) {
  const Mat3 r = rotation_matrix(g.rotation);
  const Mat3 m = r * g.log_scale.array().exp().matrix().asDiagonal();
  return m * m.transpose();
}

double opacity(const Gaussian& g) { return sigmoid(g.opacity_logit); }

void MediumParams::clamp() {
  attenuation = attenuation.cwiseMax(0.0);
  veiling_light = veiling_light.cwiseMax(0.0).cwiseMin(kMaxVeilingLight);
  backscatter = backscatter.cwiseMax(0.0).cwiseMin(kMaxBackscatter);
}

bool MediumParams::within_bounds() const {
  return (attenuation.array() >= 0.0).all() && (veiling_light.array() >= 0.0).all() &&
         (veiling_light.array() <= kMaxVeilingLight).all() && (backscatter.array() >= 0.0).all() &&
         (backscatter.array() <= kMaxBackscatter).all();
}

void Camera::validate() const {
  if (width <= 0 || height <= 0) {
    throw DataError("camera: image size must be positive");
  }
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw DataError("camera: focal lengths must be positive");
  }
  if (!(near_plane > 0.0) || !(far_plane > near_plane)) {
    throw DataError("camera: require 0 < near < far");
  }
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width, int height,
                       double focal, double near_plane, double far_plane) {
  const Vec3 forward = (target - eye).normalized();
  // View y points down, so "down" in the image is -up projected.
  const Vec3 right = forward.cross(up).normalized();
  const Vec3 down = forward.cross(right);
  Camera cam;
  cam.width = width;
  cam.height = height;
  cam.fx = focal;
  cam.fy = focal;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  cam.rotation.row(0) = right.transpose();
  cam.rotation.row(1) = down.transpose();
  cam.rotation.row(2) = forward.transpose();
  cam.translation = -(cam.rotation * eye);
  cam.near_plane = near_plane;
  cam.far_plane = far_plane;
  return cam;
}

void TrainState::reset_auxiliary() {
  const std::size_t n = cloud.size();
  moment1.assign(n, Gaussian::zero());
  moment2.assign(n, Gaussian::zero());
  grad_accum.assign(n, 0.0);
  grad_count.assign(n, 0);
}

bool TrainState::consistent() const {
  const std::size_t n = cloud.size();
  return moment1.size() == n && moment2.size() == n && grad_accum.size() == n &&
         grad_count.size() == n;
}

}  // namespace splash
