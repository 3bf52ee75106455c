#include "splash/backward.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "splash/sh.hpp"

namespace splash {
namespace {

bool finite(const Gaussian& g) {
  bool ok = g.position.allFinite() && g.log_scale.allFinite() && g.rotation.allFinite() &&
            std::isfinite(g.opacity_logit);
  for (const auto& s : g.sh) ok = ok && s.allFinite();
  return ok;
}

// d R(q_hat) / d q_hat contracted with dL/dR.
Vec4 rotation_backward(const Vec4& q, const Mat3& g) {
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Vec4 d;
  d[0] = 2.0 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
  d[1] = 2.0 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2.0 * x * g(1, 1) - w * g(1, 2) + z * g(2, 0) +
                w * g(2, 1) - 2.0 * x * g(2, 2));
  d[2] = 2.0 * (-2.0 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) - w * g(2, 0) +
                z * g(2, 1) - 2.0 * y * g(2, 2));
  d[3] = 2.0 * (-2.0 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2.0 * z * g(1, 1) +
                y * g(1, 2) + x * g(2, 0) + y * g(2, 1));
  return d;
}

}  // namespace

void GradientBuffer::reset(std::size_t n) {
  gaussians.assign(n, Gaussian::zero());
  medium = MediumGrad{};
  mean2d_norm.assign(n, 0.0);
  visible.assign(n, 0);
}

bool GradientBuffer::all_finite() const {
  for (const auto& g : gaussians) {
    if (!finite(g)) return false;
  }
  return medium.attenuation.allFinite() && medium.veiling_light.allFinite() &&
         medium.backscatter.allFinite();
}

void backward_pixel(std::span<const Projected2D> projected, std::span<const std::uint32_t> contributors,
                    const Vec2& center, const PixelComposite& forward, const Vec3& d_color,
                    std::span<SplatGrad> out) {
  double t = forward.transmittance;
  Vec3 behind = Vec3::Zero();  // sum_{j > i} c_j alpha_j T_j
  for (std::uint32_t k = forward.end; k-- > 0;) {
    const Projected2D& p = projected[contributors[k]];
    const AlphaSample s = sample_alpha(p, center);
    if (s.alpha == 0.0) continue;
    const double alpha = s.alpha;
    t /= (1.0 - alpha);  // T_i

    SplatGrad& g = out[k];
    g.color += alpha * t * d_color;
    const double d_alpha = d_color.dot(p.color * t - behind / (1.0 - alpha));
    behind += p.color * alpha * t;
    if (s.clamped) continue;

    // alpha = opacity * exp(power), power = -(a dx^2 + c dy^2)/2 - b dx dy
    g.opacity_logit += d_alpha * s.falloff * p.opacity * (1.0 - p.opacity);
    const double d_power = d_alpha * alpha;
    const Vec2 d = center - p.mean2d;
    const double a = p.conic[0], b = p.conic[1], c = p.conic[2];
    g.mean2d += d_power * Vec2(a * d.x() + b * d.y(), b * d.x() + c * d.y());
    g.conic += d_power * Vec3(-0.5 * d.x() * d.x(), -d.x() * d.y(), -0.5 * d.y() * d.y());
  }
}

void backward_projection(const Gaussian& g, int sh_degree, const Camera& cam, const Projected2D& p,
                         const SplatGrad& d, Gaussian& grad) {
  Vec3 d_position = sh_color_backward(g, sh_degree, cam.center(), d.color, grad.sh);
  grad.opacity_logit += d.opacity_logit;

  // conic = cov2d^-1:  dL/dcov2d = -Q (dL/dQ) Q
  Mat2 q;
  q << p.conic[0], p.conic[1], p.conic[1], p.conic[2];
  Mat2 d_q;
  d_q << d.conic[0], 0.5 * d.conic[1], 0.5 * d.conic[1], d.conic[2];
  const Mat2 d_cov2d = -q * d_q * q;

  // cov2d = T Sigma T^T + dilation, T = J W
  const Mat23& j = p.jacobian;
  const Mat23 t = j * cam.rotation;
  const Mat3 sigma = covariance(g);
  const Mat3 d_sigma = t.transpose() * d_cov2d * t;
  const Mat23 d_t = 2.0 * d_cov2d * t * sigma;
  const Mat23 d_j = d_t * cam.rotation.transpose();

  const Vec3& v = p.view_position;
  const double inv_z = 1.0 / v.z();
  const double inv_z2 = inv_z * inv_z;
  const double inv_z3 = inv_z2 * inv_z;
  Vec3 d_view = j.transpose() * d.mean2d;
  d_view.x() += d_j(0, 2) * (-cam.fx * inv_z2);
  d_view.y() += d_j(1, 2) * (-cam.fy * inv_z2);
  d_view.z() += d_j(0, 0) * (-cam.fx * inv_z2) + d_j(0, 2) * (2.0 * cam.fx * v.x() * inv_z3) +
                d_j(1, 1) * (-cam.fy * inv_z2) + d_j(1, 2) * (2.0 * cam.fy * v.y() * inv_z3);
  d_position += cam.rotation.transpose() * d_view;
  grad.position += d_position;

  // Sigma = M M^T, M = R diag(s)
  const Mat3 r = rotation_matrix(g.rotation);
  const Vec3 scale = g.log_scale.array().exp();
  const Mat3 m = r * scale.asDiagonal();
  const Mat3 d_m = 2.0 * d_sigma * m;
  for (int k = 0; k < 3; ++k) {
    grad.log_scale[k] += scale[k] * d_m.col(k).dot(r.col(k));
  }
  const Mat3 d_r = d_m * scale.asDiagonal();
  const double norm = g.rotation.norm();
  const Vec4 q_hat = g.rotation / norm;
  const Vec4 d_q_hat = rotation_backward(q_hat, d_r);
  grad.rotation += (d_q_hat - q_hat * q_hat.dot(d_q_hat)) / norm;
}

GradientBuffer backward_render(const GaussianCloud& cloud, const Camera& cam, const RenderOutput& fwd,
                               const LinearImage& d_rendered) {
  if (!d_rendered.same_shape(fwd.width, fwd.height)) {
    throw DataError("backward: gradient image shape mismatch");
  }
  const TileBins& bins = fwd.bins;
  std::vector<SplatGrad> entry_grads(bins.indices.size());

  const int tiles = bins.tile_count();
#pragma omp parallel for schedule(dynamic, 1)
  for (int t = 0; t < tiles; ++t) {
    const auto list = bins.tile(t);
    std::span<SplatGrad> scratch(entry_grads.data() + bins.offsets[t], list.size());
    const int tx = t % bins.tiles_x;
    const int ty = t / bins.tiles_x;
    const int x_end = std::min(fwd.width, (tx + 1) * kTileSize);
    const int y_end = std::min(fwd.height, (ty + 1) * kTileSize);
    for (int y = ty * kTileSize; y < y_end; ++y) {
      for (int x = tx * kTileSize; x < x_end; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * fwd.width + x;
        if (fwd.list_end[i] == 0) continue;
        Vec3 d_color(d_rendered.data[i * 3], d_rendered.data[i * 3 + 1], d_rendered.data[i * 3 + 2]);
        if (fwd.mode == RenderMode::kUnderwater) {
          const double z = fwd.medium_depth.data[i];
          for (int c = 0; c < 3; ++c) d_color[c] *= std::exp(-fwd.medium.attenuation[c] * z);
        }
        PixelComposite px;
        px.transmittance = fwd.final_transmittance.data[i];
        px.end = fwd.list_end[i];
        backward_pixel(fwd.projected, list, pixel_center(x, y), px, d_color, scratch);
      }
    }
  }

  // Fixed tile order keeps the reduction bitwise reproducible.
  std::vector<SplatGrad> splat_grads(fwd.projected.size());
  for (std::size_t e = 0; e < bins.indices.size(); ++e) splat_grads[bins.indices[e]] += entry_grads[e];

  GradientBuffer out(cloud.size());
  const auto n = static_cast<std::int64_t>(fwd.projected.size());
  const double half_w = 0.5 * cam.width;
  const double half_h = 0.5 * cam.height;
#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < n; ++k) {
    const Projected2D& p = fwd.projected[k];
    const std::uint32_t src = p.source_index;
    backward_projection(cloud.gaussians[src], cloud.sh_degree, cam, p, splat_grads[k], out.gaussians[src]);
    const Vec2& dm = splat_grads[k].mean2d;
    out.mean2d_norm[src] = std::hypot(dm.x() * half_w, dm.y() * half_h);
    out.visible[src] = 1;
  }
  return out;
}

MediumGrad backward_medium(const RenderOutput& fwd, const LinearImage& d_rendered, const MediumParams& m,
                           double lambda2) {
  if (fwd.mode != RenderMode::kUnderwater) {
    throw UsageError("backward_medium: requires an underwater render");
  }
  if (!d_rendered.same_shape(fwd.width, fwd.height)) {
    throw DataError("backward_medium: gradient image shape mismatch");
  }
  // Row partial sums, reduced in row order.
  std::vector<MediumGrad> rows(fwd.height);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < fwd.height; ++y) {
    MediumGrad& acc = rows[y];
    for (int x = 0; x < fwd.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * fwd.width + x;
      const double z = fwd.medium_depth.data[i];
      for (int c = 0; c < 3; ++c) {
        const double g = d_rendered.data[i * 3 + c];
        const double direct = std::exp(-m.attenuation[c] * z);
        const double back = std::exp(-m.backscatter[c] * z);
        acc.attenuation[c] -= fwd.clean_color.data[i * 3 + c] * z * direct * g;
        acc.veiling_light[c] += (1.0 - back) * g;
        acc.backscatter[c] += m.veiling_light[c] * z * back * g;
      }
    }
  }
  MediumGrad out;
  for (const auto& r : rows) {
    out.attenuation += r.attenuation;
    out.veiling_light += r.veiling_light;
    out.backscatter += r.backscatter;
  }
  if (m.guidance && lambda2 != 0.0) {
    for (int c = 0; c < 3; ++c) {
      out.veiling_light[c] += lambda2 * sign_or_zero(m.veiling_light[c] - m.guidance->veiling_light[c]);
      out.backscatter[c] += lambda2 * sign_or_zero(m.backscatter[c] - m.guidance->backscatter[c]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string FdReport::to_table() const {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-28s %16s %16s %8s %12s %s\n", "parameter", "analytic", "numeric", "step",
                "rel_error", "flag");
  os << line;
  for (const auto& e : entries) {
    std::snprintf(line, sizeof line, "%-28s %16.9e %16.9e %8.0e %12.3e %s\n", e.name.c_str(), e.analytic,
                  e.numeric, e.step, e.rel_error, e.flagged ? "FAIL" : "ok");
    os << line;
  }
  std::snprintf(line, sizeof line, "entries=%zu flagged=%zu max_rel_error=%.3e\n", entries.size(), flagged,
                max_rel_error);
  os << line;
  return os.str();
}

FdReport finite_diff_check(const FdProblem& problem, const FdOptions& opt) {
  const GradientBuffer analytic = problem.gradient(problem.cloud, problem.medium);
  FdReport report;

  GaussianCloud cloud = problem.cloud;
  MediumParams medium = problem.medium;
  auto eval = [&]() {
    const double v = problem.loss(cloud, medium);
    if (!std::isfinite(v)) throw NumericError("finite_diff_check: non-finite loss");
    return v;
  };
  auto central = [&](double& param, double eps) {
    const double saved = param;
    param = saved + eps;
    const double plus = eval();
    param = saved - eps;
    const double minus = eval();
    param = saved;
    return (plus - minus) / (2.0 * eps);
  };
  auto rel = [&](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), opt.floor); };
  auto record = [&](std::string name, double& param, double eps, double analytic_value) {
    double numeric = central(param, eps);
    double step = eps;
    for (int r = 0; r < opt.refinements; ++r) {
      const double finer = central(param, step * 0.1);
      const bool agree = rel(numeric, finer) < opt.tolerance;
      if (agree) break;
      numeric = finer;
      step *= 0.1;
    }
    FdEntry e;
    e.name = std::move(name);
    e.analytic = analytic_value;
    e.numeric = numeric;
    e.step = step;
    e.rel_error = rel(e.analytic, e.numeric);
    e.flagged = !(e.rel_error < opt.tolerance);
    report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
    report.flagged += e.flagged ? 1 : 0;
    report.entries.push_back(std::move(e));
  };

  const int coeffs = sh_coeff_count(cloud.sh_degree);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    Gaussian& g = cloud.gaussians[i];
    const Gaussian& a = analytic.gaussians[i];
    const std::string base = "g" + std::to_string(i) + ".";
    for (int k = 0; k < coeffs; ++k) {
      for (int c = 0; c < 3; ++c) {
        record(base + "sh" + std::to_string(k) + "[" + std::to_string(c) + "]", g.sh[k][c], opt.eps_color,
               a.sh[k][c]);
      }
    }
    record(base + "opacity_logit", g.opacity_logit, opt.eps_logit, a.opacity_logit);
    for (int c = 0; c < 3; ++c) {
      record(base + "position[" + std::to_string(c) + "]", g.position[c], opt.eps_position, a.position[c]);
    }
    for (int c = 0; c < 3; ++c) {
      record(base + "log_scale[" + std::to_string(c) + "]", g.log_scale[c], opt.eps_scale, a.log_scale[c]);
    }
    for (int c = 0; c < 4; ++c) {
      record(base + "rotation[" + std::to_string(c) + "]", g.rotation[c], opt.eps_rotation, a.rotation[c]);
    }
  }
  if (problem.mode == RenderMode::kUnderwater) {
    report.has_medium_rows = true;
    for (int c = 0; c < 3; ++c) {
      record("medium.B_d[" + std::to_string(c) + "]", medium.attenuation[c], opt.eps_medium,
             analytic.medium.attenuation[c]);
    }
    for (int c = 0; c < 3; ++c) {
      record("medium.B_inf[" + std::to_string(c) + "]", medium.veiling_light[c], opt.eps_medium,
             analytic.medium.veiling_light[c]);
    }
    for (int c = 0; c < 3; ++c) {
      record("medium.B_b[" + std::to_string(c) + "]", medium.backscatter[c], opt.eps_medium,
             analytic.medium.backscatter[c]);
    }
  }
  return report;
}

}  // namespace splash
