#pragma once

#include "splash/image.hpp"
#include "splash/scene.hpp"

namespace splash {

/// A scalar image loss together with its gradient with respect to the first
/// argument.
struct ImageLoss {
  double value = 0.0;
  LinearImage grad;
};

/// Mean absolute difference; the gradient is sign(a - b) / count.
ImageLoss l1_loss(const LinearImage& a, const LinearImage& b);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Mean SSIM over all valid 11x11 window positions and the three channels.
/// Images must be at least 11x11.
double ssim(const LinearImage& a, const LinearImage& b);

/// 1 - ssim(a, b) with its analytic gradient.
ImageLoss d_ssim_loss(const LinearImage& a, const LinearImage& b);

struct BsLoss {
  double value = 0.0;
  MediumGrad grad;  // subgradient, only veiling_light and backscatter are non-zero
  bool flagged = false;  // no guidance available, loss reported as 0
};

/// |B_inf - B_inf_hat|_1 + |B_b - B_b_hat|_1.
BsLoss bs_loss(const MediumParams& m);

struct LossBreakdown {
  double l1 = 0.0;
  double d_ssim = 0.0;
  double l_bs = 0.0;
  double total = 0.0;
  double lambda1 = 0.3;
  double lambda2 = 0.1;
};

struct TotalLoss {
  LossBreakdown breakdown;
  LinearImage grad;       // dL/d rendered
  MediumGrad medium_grad; // lambda2 * dL_bs/d medium
};

/// (1 - lambda1) l1 + lambda1 d_ssim + lambda2 l_bs.
TotalLoss total_loss(const LinearImage& rendered, const LinearImage& gt, const MediumParams& medium,
                     double lambda1 = 0.3, double lambda2 = 0.1);

}  // namespace splash
