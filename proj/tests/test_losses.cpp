#include <doctest.h>

#include <cmath>
#include <random>

#include "splash/losses.hpp"
#include "support.hpp"

using namespace splash;

namespace {

// Central differences of f at every pixel of `a`, compared against `grad`.
template <typename F>
double max_fd_error(LinearImage a, const LinearImage& grad, F f, double eps = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double saved = a.data[i];
    a.data[i] = saved + eps;
    const double up = f(a);
    a.data[i] = saved - eps;
    const double down = f(a);
    a.data[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    worst = std::max(worst, std::abs(grad.data[i] - numeric) / std::max(std::abs(numeric), 1e-6));
  }
  return worst;
}

}  // namespace

TEST_CASE("l1 loss") {
  std::mt19937_64 rng(91);
  const LinearImage a = test::random_image(rng, 12, 9);
  CHECK(l1_loss(a, a).value == 0.0);

  LinearImage b = a;
  for (double& v : b.data) v += 0.5;
  const ImageLoss l = l1_loss(a, b);
  CHECK(l.value == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(l.grad.data[0] == doctest::Approx(-1.0 / a.data.size()));

  const LinearImage c = test::random_image(rng, 12, 9);
  long double sum = 0.0L;
  for (std::size_t i = 0; i < a.data.size(); ++i) sum += std::abs(static_cast<long double>(a.data[i]) - c.data[i]);
  CHECK(std::abs(l1_loss(a, c).value - static_cast<double>(sum / a.data.size())) <= 1e-10);

  CHECK_THROWS(l1_loss(a, LinearImage(9, 12)));
}

TEST_CASE("ssim of identical images") {
  std::mt19937_64 rng(93);
  const LinearImage a = test::random_image(rng, 16, 16);
  CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  const ImageLoss l = d_ssim_loss(a, a);
  CHECK(std::abs(l.value) < 1e-12);
  CHECK_THROWS(ssim(LinearImage(10, 10), LinearImage(10, 10)));
}

TEST_CASE("d-ssim of an image against its negative") {
  LinearImage a(16, 16);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      for (int c = 0; c < 3; ++c) a.at(x, y, c) = ((x / 2 + y / 3 + c) % 2) ? 0.9 : 0.1;
    }
  }
  LinearImage b = a;
  for (double& v : b.data) v = 1.0 - v;
  const ImageLoss l = d_ssim_loss(a, b);
  CHECK(l.value > 0.0);
  CHECK(l.value <= 2.0);
  CHECK(max_fd_error(a, l.grad, [&](const LinearImage& x) { return d_ssim_loss(x, b).value; }) < 1e-3);
}

TEST_CASE("d-ssim gradient on random images") {
  std::mt19937_64 rng(97);
  const LinearImage a = test::random_image(rng, 16, 16);
  const LinearImage b = test::random_image(rng, 16, 16);
  const ImageLoss l = d_ssim_loss(a, b);
  CHECK(max_fd_error(a, l.grad, [&](const LinearImage& x) { return d_ssim_loss(x, b).value; }) < 1e-3);
}

TEST_CASE("ssim of constant images has a closed form") {
  for (double c : {0.1, 0.4, 0.7}) {
    for (double k : {0.05, 0.2}) {
      const LinearImage a(13, 12, c), b(13, 12, c + k);
      const double expected = (2.0 * c * (c + k) + kSsimC1) / (c * c + (c + k) * (c + k) + kSsimC1);
      CHECK(ssim(a, b) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("backscatter guidance loss") {
  MediumParams m;
  m.veiling_light = Vec3(0.3, 0.4, 0.5);
  m.backscatter = Vec3(1.0, 2.0, 3.0);
  BsLoss l = bs_loss(m);
  CHECK(l.flagged);
  CHECK(l.value == 0.0);

  m.guidance = BackscatterGuidance{m.veiling_light, m.backscatter};
  l = bs_loss(m);
  CHECK_FALSE(l.flagged);
  CHECK(l.value == 0.0);
  CHECK(l.grad.veiling_light == Vec3::Zero());
  CHECK(l.grad.backscatter == Vec3::Zero());

  m.guidance->veiling_light = m.veiling_light - Vec3(0.1, 0.0, 0.0);
  l = bs_loss(m);
  CHECK(l.value == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(l.grad.veiling_light == Vec3(1.0, 0.0, 0.0));

  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    MediumParams r;
    r.veiling_light = Vec3(u(rng), u(rng), u(rng));
    r.backscatter = 5.0 * Vec3(u(rng), u(rng), u(rng));
    r.guidance = BackscatterGuidance{Vec3(u(rng), u(rng), u(rng)), 5.0 * Vec3(u(rng), u(rng), u(rng))};
    const double expected = (r.veiling_light - r.guidance->veiling_light).cwiseAbs().sum() +
                            (r.backscatter - r.guidance->backscatter).cwiseAbs().sum();
    CHECK(bs_loss(r).value == doctest::Approx(expected).epsilon(1e-14));
    CHECK(bs_loss(r).grad.attenuation == Vec3::Zero());
  }
}

TEST_CASE("total loss") {
  std::mt19937_64 rng(103);
  const LinearImage gt = test::random_image(rng, 16, 16);
  MediumParams m;
  m.veiling_light = Vec3(0.2, 0.3, 0.4);
  m.backscatter = Vec3(1.0, 1.1, 1.2);
  m.guidance = BackscatterGuidance{m.veiling_light, m.backscatter};
  const TotalLoss perfect = total_loss(gt, gt, m);
  CHECK(std::abs(perfect.breakdown.total) < 1e-12);

  const LinearImage r = test::random_image(rng, 16, 16);
  m.guidance->backscatter += Vec3(0.3, -0.2, 0.1);
  const TotalLoss no_ssim = total_loss(r, gt, m, 0.0, 0.1);
  CHECK(no_ssim.breakdown.total ==
        doctest::Approx(l1_loss(r, gt).value + 0.1 * bs_loss(m).value).epsilon(1e-14));
  CHECK(no_ssim.medium_grad.backscatter == Vec3(-0.1, 0.1, -0.1));

  const TotalLoss full = total_loss(r, gt, m, 0.3, 0.1);
  const LossBreakdown& b = full.breakdown;
  CHECK(b.total == doctest::Approx(0.7 * b.l1 + 0.3 * b.d_ssim + 0.1 * b.l_bs).epsilon(1e-14));
  CHECK(b.l1 >= 0.0);
  CHECK(b.d_ssim >= 0.0);
  CHECK(max_fd_error(r, full.grad, [&](const LinearImage& x) { return total_loss(x, gt, m).breakdown.total; }) <
        1e-3);
}
