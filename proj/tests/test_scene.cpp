#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "splash/checkpoint.hpp"
#include "splash/synthetic.hpp"
#include "support.hpp"

using namespace splash;

TEST_CASE("covariance closed forms") {
  Gaussian g;
  CHECK((covariance(g) - Mat3::Identity()).norm() < 1e-15);

  g.log_scale = Vec3(std::log(2.0), 0.0, 0.0);
  const Mat3 expected = Vec3(4.0, 1.0, 1.0).asDiagonal();
  CHECK((covariance(g) - expected).norm() < 1e-14);
}

TEST_CASE("covariance eigenvalues are the squared scales") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Gaussian g;
    g.rotation = test::random_quaternion(rng);
    g.log_scale = Vec3(u(rng), u(rng), u(rng));
    const Mat3 cov = covariance(g);
    CHECK((cov - cov.transpose()).norm() < 1e-14);

    Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
    std::vector<double> got(eig.eigenvalues().data(), eig.eigenvalues().data() + 3);
    std::vector<double> want;
    for (int k = 0; k < 3; ++k) want.push_back(std::exp(2.0 * g.log_scale[k]));
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    for (int k = 0; k < 3; ++k) {
      CHECK(got[k] > 0.0);
      CHECK(std::abs(got[k] - want[k]) < 1e-10);
    }
  }
}

TEST_CASE("rotation matrix normalizes the quaternion") {
  const Vec4 q(2.0, 0.0, 0.0, 0.0);
  CHECK((rotation_matrix(q) - Mat3::Identity()).norm() < 1e-15);
  std::mt19937_64 rng(5);
  const Mat3 r = rotation_matrix(3.0 * test::random_quaternion(rng));
  CHECK((r * r.transpose() - Mat3::Identity()).norm() < 1e-12);
  CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("opacity is the sigmoid of the logit") {
  Gaussian g;
  CHECK(opacity(g) == 0.5);
  g.opacity_logit = 1e308;
  CHECK(opacity(g) == 1.0);
  g.opacity_logit = -1e308;
  CHECK(opacity(g) == 0.0);
  g.opacity_logit = std::log(9.0);
  CHECK(opacity(g) == doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("medium clamping is idempotent") {
  MediumParams m;
  m.attenuation = Vec3(-1.0, 0.5, 3.0);
  m.veiling_light = Vec3(-0.2, 0.4, 1.7);
  m.backscatter = Vec3(9.0, -3.0, 2.0);
  CHECK_FALSE(m.within_bounds());
  m.clamp();
  CHECK(m.within_bounds());
  CHECK(m.attenuation == Vec3(0.0, 0.5, 3.0));
  CHECK(m.veiling_light == Vec3(0.0, 0.4, 1.0));
  CHECK(m.backscatter == Vec3(5.0, 0.0, 2.0));
  const MediumParams once = m;
  m.clamp();
  CHECK(m.attenuation == once.attenuation);
  CHECK(m.veiling_light == once.veiling_light);
  CHECK(m.backscatter == once.backscatter);
}

TEST_CASE("camera validation") {
  Camera cam = test::axis_camera(8, 8, 10.0);
  CHECK_NOTHROW(cam.validate());
  cam.fx = 0.0;
  CHECK_THROWS_AS(cam.validate(), DataError);
  cam = test::axis_camera(8, 8, 10.0);
  cam.near_plane = 0.0;
  CHECK_THROWS_AS(cam.validate(), DataError);
  cam = test::axis_camera(8, 8, 10.0);
  cam.far_plane = cam.near_plane;
  CHECK_THROWS_AS(cam.validate(), DataError);
}

namespace {

TrainState random_state(std::uint64_t seed, int n, bool guidance) {
  TrainState st;
  st.cloud = random_cloud(seed, n, default_camera(64, 64), 1);
  st.cloud.generation = 4;
  st.reset_auxiliary();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t i = 0; i < st.cloud.size(); ++i) {
    st.moment1[i].position = Vec3(u(rng), u(rng), u(rng));
    st.moment2[i].opacity_logit = u(rng) + 1.0;
    st.grad_accum[i] = u(rng) + 1.0;
    st.grad_count[i] = static_cast<std::uint32_t>(i % 7);
  }
  st.medium.attenuation = Vec3(0.1, 0.2, 0.3);
  st.medium.veiling_light = Vec3(0.4, 0.5, 0.6);
  st.medium.backscatter = Vec3(0.7, 0.8, 0.9);
  if (guidance) st.medium.guidance = BackscatterGuidance{Vec3(0.3, 0.2, 0.1), Vec3(1.0, 2.0, 3.0)};
  st.medium_moment1.backscatter = Vec3(u(rng), u(rng), u(rng));
  st.adam_steps = 123;
  st.iteration = 456;
  return st;
}

}  // namespace

TEST_CASE("checkpoint round trip without guidance") {
  const TrainState st = random_state(1, 20, false);
  const TrainState back = load_checkpoint(save_checkpoint(st));
  CHECK_FALSE(back.medium.guidance.has_value());
  CHECK(back.cloud.size() == st.cloud.size());
  CHECK(back.iteration == 456);
  CHECK(back.adam_steps == 123);
  CHECK(back.cloud.generation == 4);
  CHECK(back.consistent());
}

TEST_CASE("checkpoint of 1000 Gaussians is byte-identical after save, load, save") {
  const TrainState st = random_state(2, 1000, true);
  const auto bytes = save_checkpoint(st);
  const TrainState back = load_checkpoint(bytes);
  CHECK(save_checkpoint(back) == bytes);
  REQUIRE(back.medium.guidance.has_value());
  CHECK(back.medium.guidance->backscatter == Vec3(1.0, 2.0, 3.0));
  for (std::size_t i = 0; i < st.cloud.size(); i += 97) {
    CHECK(back.cloud.gaussians[i].position == st.cloud.gaussians[i].position);
    CHECK(back.cloud.gaussians[i].sh[3] == st.cloud.gaussians[i].sh[3]);
    CHECK(back.grad_count[i] == st.grad_count[i]);
  }
}

TEST_CASE("checkpoint rejects damaged input") {
  const auto bytes = save_checkpoint(random_state(3, 10, true));
  std::vector<std::uint8_t> truncated(bytes.begin(), bytes.end() - 9);
  CHECK_THROWS_AS(load_checkpoint(truncated), DataError);
  std::vector<std::uint8_t> bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(load_checkpoint(bad_magic), DataError);
  std::vector<std::uint8_t> bad_version = bytes;
  bad_version[8] = 99;
  CHECK_THROWS_AS(load_checkpoint(bad_version), DataError);
  CHECK_THROWS_AS(load_checkpoint(std::span<const std::uint8_t>()), DataError);
}

TEST_CASE("checkpoint files") {
  const auto dir = test::temp_dir("ckpt");
  const TrainState st = random_state(4, 30, true);
  write_checkpoint_file(dir / "a.ckpt", st);
  CHECK(save_checkpoint(read_checkpoint_file(dir / "a.ckpt")) == save_checkpoint(st));
  CHECK_THROWS_AS(read_checkpoint_file(dir / "missing.ckpt"), DataError);
}
