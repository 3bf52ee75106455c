#include <doctest.h>

#include <cmath>
#include <random>

#include <omp.h>

#include "splash/backward.hpp"
#include "splash/losses.hpp"
#include "splash/pipeline.hpp"
#include "splash/synthetic.hpp"
#include "support.hpp"

using namespace splash;

namespace {

bool same_buffers(const GradientBuffer& a, const GradientBuffer& b) {
  if (a.gaussians.size() != b.gaussians.size()) return false;
  for (std::size_t i = 0; i < a.gaussians.size(); ++i) {
    const Gaussian& x = a.gaussians[i];
    const Gaussian& y = b.gaussians[i];
    if (x.position != y.position || x.log_scale != y.log_scale || x.rotation != y.rotation ||
        x.opacity_logit != y.opacity_logit || x.sh != y.sh) {
      return false;
    }
  }
  return a.mean2d_norm == b.mean2d_norm;
}

}  // namespace

TEST_CASE("single contributor color gradient is alpha") {
  std::vector<Projected2D> ps{test::make_splat(Vec2(4.5, 4.5), 1.5, 0.7, 2.0, Vec3(0.2, 0.4, 0.6), 0)};
  const std::vector<std::uint32_t> list{0};
  const Vec2 pix(5.5, 4.5);
  const PixelComposite fwd = composite_pixel(ps, list, pix, 100.0);
  std::vector<SplatGrad> out(1);
  backward_pixel(ps, list, pix, fwd, Vec3(1.0, 0.0, 0.0), out);
  const double alpha = alpha_at(ps[0], pix);
  CHECK(out[0].color.x() == doctest::Approx(alpha).epsilon(1e-14));
  CHECK(out[0].color.y() == 0.0);
  CHECK(out[0].color.z() == 0.0);
  // dC_r/d alpha = c_r, chained through the sigmoid.
  CHECK(out[0].opacity_logit == doctest::Approx(0.2 * alpha * (1.0 - 0.7)).epsilon(1e-12));

  std::vector<SplatGrad> zero(1);
  backward_pixel(ps, list, pix, fwd, Vec3::Zero(), zero);
  CHECK(zero[0].color == Vec3::Zero());
  CHECK(zero[0].mean2d == Vec2::Zero());
  CHECK(zero[0].conic == Vec3::Zero());
  CHECK(zero[0].opacity_logit == 0.0);
}

TEST_CASE("zero upstream gives zero gradients") {
  const GradientScene s = make_gradient_scene();
  const RenderOutput out = render(s.cloud, s.camera, &s.medium, RenderMode::kUnderwater);
  const LinearImage zero(out.width, out.height);
  const GradientBuffer g = backward_render(s.cloud, s.camera, out, zero);
  for (const Gaussian& d : g.gaussians) {
    CHECK(d.position == Vec3::Zero());
    CHECK(d.opacity_logit == 0.0);
    CHECK(d.sh[0] == Vec3::Zero());
  }
  MediumParams m = s.medium;
  m.guidance.reset();
  const MediumGrad dm = backward_medium(out, zero, m, 0.1);
  CHECK(dm.attenuation == Vec3::Zero());
  CHECK(dm.veiling_light == Vec3::Zero());
  CHECK(dm.backscatter == Vec3::Zero());
}

TEST_CASE("guidance subgradient is zero at the kink") {
  const GradientScene s = make_gradient_scene();
  const RenderOutput out = render(s.cloud, s.camera, &s.medium, RenderMode::kUnderwater);
  const LinearImage zero(out.width, out.height);
  MediumParams m = s.medium;
  m.guidance = BackscatterGuidance{m.veiling_light + Vec3(0.1, -0.1, 0.0), m.backscatter};
  const MediumGrad dm = backward_medium(out, zero, m, 0.25);
  CHECK(dm.backscatter == Vec3::Zero());
  CHECK(dm.veiling_light == Vec3(-0.25, 0.25, 0.0));
}

TEST_CASE("finite differences on the canonical gradient scene") {
  const FdReport r = finite_diff_check(gradient_problem(make_gradient_scene(), RenderMode::kUnderwater));
  CHECK(r.has_medium_rows);
  CHECK(r.flagged == 0);
  CHECK(r.max_rel_error < 1e-3);
  CHECK(r.entries.size() > 50 * 20);
}

TEST_CASE("finite differences on a small scene with random medium") {
  const FdReport r = finite_diff_check(gradient_problem(make_gradient_scene(5, 20, 16), RenderMode::kUnderwater));
  CHECK(r.flagged == 0);
  CHECK(r.max_rel_error < 1e-3);
  int medium_rows = 0;
  for (const FdEntry& e : r.entries) medium_rows += e.name.rfind("medium.", 0) == 0;
  CHECK(medium_rows == 9);
}

TEST_CASE("clean-mode check has no medium rows") {
  const FdReport r = finite_diff_check(gradient_problem(make_gradient_scene(6, 10, 16), RenderMode::kClean));
  CHECK_FALSE(r.has_medium_rows);
  for (const FdEntry& e : r.entries) CHECK(e.name.rfind("medium.", 0) != 0);
  CHECK(r.max_rel_error < 1e-3);
}

TEST_CASE("zeroed analytic gradients are flagged") {
  FdProblem p = gradient_problem(make_gradient_scene(7, 10, 16), RenderMode::kUnderwater);
  p.gradient = [](const GaussianCloud& cloud, const MediumParams&) { return GradientBuffer(cloud.size()); };
  const FdOptions opts;
  const FdReport r = finite_diff_check(p, opts);
  std::size_t nontrivial = 0;
  for (const FdEntry& e : r.entries) {
    if (std::abs(e.numeric) > 10.0 * opts.floor) {
      ++nontrivial;
      CHECK(e.flagged);
    }
  }
  CHECK(nontrivial > 0);
  CHECK(r.flagged >= nontrivial);
}

TEST_CASE("backward is bit-identical across thread counts") {
  const GradientScene s = make_gradient_scene(11, 200, 64);
  const RenderOutput out = render(s.cloud, s.camera, &s.medium, RenderMode::kUnderwater);
  const TotalLoss loss = total_loss(out.color, s.target, s.medium);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const GradientBuffer ref = backward_render(s.cloud, s.camera, out, loss.grad);
  const MediumGrad ref_m = backward_medium(out, loss.grad, s.medium, 0.1);
  for (int threads : {2, 8}) {
    omp_set_num_threads(threads);
    CHECK(same_buffers(backward_render(s.cloud, s.camera, out, loss.grad), ref));
    const MediumGrad m = backward_medium(out, loss.grad, s.medium, 0.1);
    CHECK(m.attenuation == ref_m.attenuation);
    CHECK(m.backscatter == ref_m.backscatter);
  }
  omp_set_num_threads(saved);
  CHECK(ref.all_finite());
}

TEST_CASE("zero-opacity Gaussians get no color gradient") {
  GradientScene s = make_gradient_scene();
  s.cloud.gaussians[3].opacity_logit = -1e3;
  const RenderOutput out = render(s.cloud, s.camera, &s.medium, RenderMode::kUnderwater);
  const TotalLoss loss = total_loss(out.color, s.target, s.medium);
  const GradientBuffer g = backward_render(s.cloud, s.camera, out, loss.grad);
  CHECK(g.gaussians[3].sh[0] == Vec3::Zero());
  CHECK(g.gaussians[3].opacity_logit == 0.0);
  CHECK(g.visible[3] == 0);
}
