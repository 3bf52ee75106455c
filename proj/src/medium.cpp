#include "splash/medium.hpp"

#include <algorithm>

namespace splash {
namespace {

void require_remapped(const LinearImage& img, const DepthMap& z) {
  if (!img.same_shape(z)) {
    throw DataError("medium: image and depth map shapes differ");
  }
  if (z.units != DepthUnits::kRemapped) {
    throw DataError("medium: depth map must be logistic-remapped");
  }
}

}  // namespace

double logistic_remap(double raw_depth) { return 2.0 / (1.0 + std::exp(-0.1 * raw_depth)) - 1.0; }

DepthMap logistic_remap(const DepthMap& raw) {
  DepthMap out(raw.width, raw.height, 0.0, DepthUnits::kRemapped);
  std::transform(raw.data.begin(), raw.data.end(), out.data.begin(),
                 [](double d) { return logistic_remap(d); });
  return out;
}

LinearImage apply_medium(const LinearImage& clean, const DepthMap& z, const MediumParams& m, bool clamp_output) {
  require_remapped(clean, z);
  LinearImage out(clean.width, clean.height);
  const auto rows = static_cast<std::int64_t>(clean.height);
#pragma omp parallel for schedule(static)
  for (std::int64_t y = 0; y < rows; ++y) {
    for (int x = 0; x < clean.width; ++x) {
      const double depth = z.at(x, static_cast<int>(y));
      for (int c = 0; c < 3; ++c) {
        const double direct = clean.at(x, y, c) * std::exp(-m.attenuation[c] * depth);
        const double back = m.veiling_light[c] * (1.0 - std::exp(-m.backscatter[c] * depth));
        out.at(x, y, c) = clamp_output ? std::clamp(direct + back, 0.0, 1.0) : direct + back;
      }
    }
  }
  return out;
}

RestoreResult invert_medium(const LinearImage& observed, const DepthMap& z, const MediumParams& m) {
  require_remapped(observed, z);
  RestoreResult r;
  r.image = LinearImage(observed.width, observed.height);
  r.saturated.assign(observed.pixel_count(), 0);
  const auto rows = static_cast<std::int64_t>(observed.height);
#pragma omp parallel for schedule(static)
  for (std::int64_t y = 0; y < rows; ++y) {
    for (int x = 0; x < observed.width; ++x) {
      const double depth = z.at(x, static_cast<int>(y));
      bool flagged = false;
      for (int c = 0; c < 3; ++c) {
        const double back = m.veiling_light[c] * (1.0 - std::exp(-m.backscatter[c] * depth));
        const double gain = std::min(std::exp(m.attenuation[c] * depth), kMaxRestoreGain);
        const double j = (observed.at(x, y, c) - back) * gain;
        flagged = flagged || j <= 0.0 || j > 1.0;
        r.image.at(x, y, c) = std::clamp(j, 0.0, 1.0);
      }
      r.saturated[static_cast<std::size_t>(y) * observed.width + x] = flagged ? 1 : 0;
    }
  }
  return r;
}

}  // namespace splash
