#include "splash/losses.hpp"

#include <array>

namespace splash {
namespace {

using Plane = std::vector<double>;

std::array<double, kSsimWindow> gaussian_window() {
  std::array<double, kSsimWindow> w{};
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimWindow / 2;
    w[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += w[i];
  }
  for (auto& v : w) v /= sum;
  return w;
}

const std::array<double, kSsimWindow>& window() {
  static const auto w = gaussian_window();
  return w;
}

// Separable "valid" correlation: (w, h) -> (w - 10, h - 10).
Plane blur_valid(const Plane& in, int w, int h) {
  const auto& k = window();
  const int ow = w - kSsimWindow + 1;
  const int oh = h - kSsimWindow + 1;
  Plane rows(static_cast<std::size_t>(ow) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < kSsimWindow; ++i) s += k[i] * in[y * w + x + i];
      rows[y * ow + x] = s;
    }
  }
  Plane out(static_cast<std::size_t>(ow) * oh);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < kSsimWindow; ++i) s += k[i] * rows[(y + i) * ow + x];
      out[y * ow + x] = s;
    }
  }
  return out;
}

// Adjoint of blur_valid: (w - 10, h - 10) -> (w, h).
Plane blur_adjoint(const Plane& in, int w, int h) {
  const auto& k = window();
  const int ow = w - kSsimWindow + 1;
  const int oh = h - kSsimWindow + 1;
  Plane rows(static_cast<std::size_t>(ow) * h, 0.0);
  for (int y = 0; y < oh; ++y) {
    for (int i = 0; i < kSsimWindow; ++i) {
      for (int x = 0; x < ow; ++x) rows[(y + i) * ow + x] += k[i] * in[y * ow + x];
    }
  }
  Plane out(static_cast<std::size_t>(w) * h, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      for (int i = 0; i < kSsimWindow; ++i) out[y * w + x + i] += k[i] * rows[y * ow + x];
    }
  }
  return out;
}

Plane channel(const LinearImage& img, int c) {
  Plane p(img.pixel_count());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = img.data[i * 3 + c];
  return p;
}

void check_pair(const LinearImage& a, const LinearImage& b, const char* what) {
  if (!a.same_shape(b)) throw DataError(std::string(what) + ": image shape mismatch");
  if (a.empty()) throw DataError(std::string(what) + ": empty image");
}

void check_ssim_size(const LinearImage& a) {
  if (a.width < kSsimWindow || a.height < kSsimWindow) {
    throw DataError("ssim: image smaller than the 11x11 window");
  }
}

// Per-channel SSIM statistics and, when requested, the gradient of the mean
// SSIM with respect to `a`.
double ssim_impl(const LinearImage& a, const LinearImage& b, LinearImage* grad) {
  check_pair(a, b, "ssim");
  check_ssim_size(a);
  const int w = a.width;
  const int h = a.height;
  const std::size_t m = static_cast<std::size_t>(w - kSsimWindow + 1) * (h - kSsimWindow + 1);
  const double norm = 1.0 / (3.0 * static_cast<double>(m));
  if (grad) *grad = LinearImage(w, h);

  std::array<double, 3> sums{};
#pragma omp parallel for schedule(static)
  for (int c = 0; c < 3; ++c) {
    const Plane x = channel(a, c);
    const Plane y = channel(b, c);
    Plane xx(x.size()), yy(x.size()), xy(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const Plane mu_x = blur_valid(x, w, h);
    const Plane mu_y = blur_valid(y, w, h);
    const Plane m_xx = blur_valid(xx, w, h);
    const Plane m_yy = blur_valid(yy, w, h);
    const Plane m_xy = blur_valid(xy, w, h);

    Plane d_mu(m), d_mxx(m), d_mxy(m);
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double mx = mu_x[i], my = mu_y[i];
      const double a1 = 2.0 * mx * my + kSsimC1;
      const double a2 = 2.0 * (m_xy[i] - mx * my) + kSsimC2;
      const double b1 = mx * mx + my * my + kSsimC1;
      const double b2 = (m_xx[i] - mx * mx) + (m_yy[i] - my * my) + kSsimC2;
      const double s = a1 * a2 / (b1 * b2);
      sum += s;
      d_mu[i] = norm * (2.0 * my * (a2 - a1) / (b1 * b2) - 2.0 * mx * s / b1 + 2.0 * mx * s / b2);
      d_mxx[i] = norm * (-s / b2);
      d_mxy[i] = norm * (2.0 * a1 / (b1 * b2));
    }
    sums[c] = sum;
    if (grad) {
      const Plane g_mu = blur_adjoint(d_mu, w, h);
      const Plane g_xx = blur_adjoint(d_mxx, w, h);
      const Plane g_xy = blur_adjoint(d_mxy, w, h);
      for (std::size_t i = 0; i < x.size(); ++i) {
        grad->data[i * 3 + c] = g_mu[i] + 2.0 * x[i] * g_xx[i] + y[i] * g_xy[i];
      }
    }
  }
  return (sums[0] + sums[1] + sums[2]) * norm;
}

}  // namespace

ImageLoss l1_loss(const LinearImage& a, const LinearImage& b) {
  check_pair(a, b, "l1_loss");
  ImageLoss out;
  out.grad = LinearImage(a.width, a.height);
  const double inv = 1.0 / static_cast<double>(a.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    sum += std::abs(d);
    out.grad.data[i] = sign_or_zero(d) * inv;
  }
  out.value = sum * inv;
  return out;
}

double ssim(const LinearImage& a, const LinearImage& b) { return ssim_impl(a, b, nullptr); }

ImageLoss d_ssim_loss(const LinearImage& a, const LinearImage& b) {
  ImageLoss out;
  out.value = 1.0 - ssim_impl(a, b, &out.grad);
  for (auto& v : out.grad.data) v = -v;
  return out;
}

BsLoss bs_loss(const MediumParams& m) {
  BsLoss out;
  if (!m.guidance) {
    out.flagged = true;
    return out;
  }
  for (int c = 0; c < 3; ++c) {
    const double dv = m.veiling_light[c] - m.guidance->veiling_light[c];
    const double db = m.backscatter[c] - m.guidance->backscatter[c];
    out.value += std::abs(dv) + std::abs(db);
    out.grad.veiling_light[c] = sign_or_zero(dv);
    out.grad.backscatter[c] = sign_or_zero(db);
  }
  return out;
}

TotalLoss total_loss(const LinearImage& rendered, const LinearImage& gt, const MediumParams& medium,
                     double lambda1, double lambda2) {
  const ImageLoss l1 = l1_loss(rendered, gt);
  const ImageLoss ds = d_ssim_loss(rendered, gt);
  const BsLoss bs = bs_loss(medium);

  TotalLoss out;
  LossBreakdown& b = out.breakdown;
  b.l1 = l1.value;
  b.d_ssim = ds.value;
  b.l_bs = bs.value;
  b.lambda1 = lambda1;
  b.lambda2 = lambda2;
  b.total = (1.0 - lambda1) * b.l1 + lambda1 * b.d_ssim + lambda2 * b.l_bs;

  out.grad = LinearImage(rendered.width, rendered.height);
  for (std::size_t i = 0; i < out.grad.size(); ++i) {
    out.grad.data[i] = (1.0 - lambda1) * l1.grad.data[i] + lambda1 * ds.grad.data[i];
  }
  out.medium_grad.veiling_light = lambda2 * bs.grad.veiling_light;
  out.medium_grad.backscatter = lambda2 * bs.grad.backscatter;
  return out;
}

}  // namespace splash
