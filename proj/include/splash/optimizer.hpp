#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "splash/backward.hpp"
#include "splash/scene.hpp"

namespace splash {

struct OptimConfig {
  int iterations = 30000;

  double position_lr_init = 0.00016;
  double position_lr_final = 0.0000016;
  double position_lr_delay_mult = 0.01;
  int position_lr_delay_steps = 0;
  int position_lr_max_steps = 30000;

  double feature_lr = 0.0025;
  double attenuation_lr = 0.0025;  // B_d
  double backscatter_lr = 0.0025;  // B_inf and B_b
  double opacity_lr = 0.05;
  double scaling_lr = 0.005;
  double rotation_lr = 0.001;

  bool densify = true;
  int densification_interval = 100;
  int opacity_reset_interval = 3000;
  int densify_from = 1500;
  int densify_until = 15000;
  double densify_grad_threshold = 0.0002;
  double min_opacity = 0.1;
  double percent_dense = 0.01;

  double lambda1 = 0.3;
  double lambda2 = 0.1;
  int refit_period = 500;
  /// Refit guidance from all training views pooled instead of the current one.
  bool guidance_all_views = false;
  /// Fit guidance before the first step and start B_inf, B_b from it.
  bool guidance_warm_start = true;
  int checkpoint_interval = 1000;

  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-15;

  /// Throws UsageError when a value is out of range.
  void validate() const;

  std::string to_json() const;
  /// Keys absent from the document keep their defaults; unknown keys are an error.
  static OptimConfig from_json(const std::string& text);
  static OptimConfig load(const std::filesystem::path& path);
};

/// Exponential (log-linear) decay from init to final over max_steps, times a
/// sine ramp from delay_mult to 1 over the first delay_steps iterations.
double position_lr(const OptimConfig& cfg, int iteration);

/// One bias-corrected Adam update of a scalar; `step` counts from 1.
void adam_update(double& param, double& m, double& v, double grad, double lr, std::uint64_t step,
                 double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-15);

/// Adam over every Gaussian and medium parameter. Quaternions are
/// renormalized and the medium clamped into its boxes afterwards. Returns
/// false, leaving the state untouched, when any gradient is non-finite.
/// `spatial_lr_scale` multiplies the position learning rate.
bool adam_step(TrainState& state, const GradientBuffer& grads, const OptimConfig& cfg, double position_lr,
               double spatial_lr_scale = 1.0);

/// Adds this iteration's screen-space gradient norms to the densification
/// statistics of visible Gaussians.
void accumulate_densify_stats(TrainState& state, const GradientBuffer& grads);

struct DensifyReport {
  std::size_t cloned = 0;
  std::size_t split = 0;
  std::size_t pruned = 0;
  bool prune_skipped = false;
};

/// Clone small / split large Gaussians whose mean screen gradient exceeds the
/// threshold, then prune those below min_opacity. New entries get zero
/// moments and statistics are reset.
DensifyReport densify_and_prune(TrainState& state, const OptimConfig& cfg, double scene_extent,
                                std::mt19937_64& rng);

/// Sets every opacity to 0.01 and zeroes the opacity moments.
void reset_opacity(TrainState& state);

}  // namespace splash
