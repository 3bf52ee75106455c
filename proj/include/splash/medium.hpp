#pragma once

#include <cstdint>
#include <vector>

#include "splash/image.hpp"
#include "splash/scene.hpp"

namespace splash {

/// z = 2 / (1 + exp(-0.1 * raw)) - 1, mapping raw depth >= 0 into [0, 1).
double logistic_remap(double raw_depth);

DepthMap logistic_remap(const DepthMap& raw);

/// Largest direct-signal gain e^{B_d z} allowed when restoring.
inline constexpr double kMaxRestoreGain = 1e3;

/// I = J e^{-B_d z} + B_inf (1 - e^{-B_b z}) per channel, clamped to [0, 1]
/// unless `clamp_output` is off. `z` must be remapped depth.
LinearImage apply_medium(const LinearImage& clean, const DepthMap& z, const MediumParams& m,
                         bool clamp_output = true);

struct RestoreResult {
  LinearImage image;
  /// 1 where no direct signal survives backscatter removal (J <= 0) or J > 1.
  std::vector<std::uint8_t> saturated;
};

/// J = (I - B_inf (1 - e^{-B_b z})) e^{B_d z}, with the gain capped at
/// kMaxRestoreGain and the result clamped to [0, 1].
RestoreResult invert_medium(const LinearImage& observed, const DepthMap& z, const MediumParams& m);

}  // namespace splash
