#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "splash/backward.hpp"
#include "splash/dataset.hpp"
#include "splash/losses.hpp"
#include "splash/optimizer.hpp"
#include "splash/rasterizer.hpp"
#include "splash/scene.hpp"
#include "splash/synthetic.hpp"

namespace splash {

struct IterationLog {
  int iteration = 0;
  LossBreakdown loss;
  std::size_t num_gaussians = 0;
  MediumParams medium;
  double lr_position = 0.0;
  bool skipped = false;  // non-finite loss or gradient, no update applied
};

inline constexpr const char* kTrainLogHeader =
    "iter,l1,d_ssim,l_bs,total,num_gaussians,B_d_r,B_d_g,B_d_b,B_inf_r,B_inf_g,B_inf_b,B_b_r,B_b_g,B_b_b,"
    "lr_position";

std::string format_log_row(const IterationLog& row);

struct TrainOptions {
  OptimConfig config;
  std::uint64_t seed = 0;
  /// Random-init Gaussian count when the dataset has no point seed.
  int random_init_count = 300;
  /// When set, the log and checkpoints are written here.
  std::filesystem::path out_dir;
  std::function<void(const IterationLog&)> on_iteration;
  std::function<void(int, const BackscatterGuidance&)> on_refit;
};

struct TrainResult {
  TrainState state;
  std::vector<IterationLog> log;
  std::vector<std::size_t> views_used;  // every view index read for a gradient step
  std::size_t skipped = 0;
  double scene_extent = 0.0;

  std::string csv() const;
};

/// Initial state: the dataset's point seed when present, otherwise random
/// positions inside the bounding box of the camera frusta. Medium starts at
/// B_d = B_b = 0.05, B_inf = 0.3.
TrainState initialize_state(const Dataset& data, std::uint64_t seed, int random_count = 300);

/// 1.1 x the largest distance of a camera center from their mean.
double scene_extent(const std::vector<Camera>& cameras);

/// Trains on the split's training views; test views are never read.
TrainResult train(const Dataset& data, const TrainOptions& options);
/// Continues from an existing state.
TrainResult train(const Dataset& data, const TrainOptions& options, TrainState initial);

/// Peak signal-to-noise ratio for signals in [0, 1], capped at 99 dB.
double psnr(const LinearImage& a, const LinearImage& b);

struct ViewMetrics {
  std::size_t view = 0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct EvalReport {
  std::vector<ViewMetrics> views;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;

  std::string to_table() const;
};

/// Underwater renders of `views` compared against their ground-truth images.
EvalReport evaluate(const TrainState& state, const Dataset& data, const std::vector<std::size_t>& views);

/// Renders every camera in clean and underwater mode and writes
/// {underwater,clean}_NNN.{png,pfm} and depth_NNN.pfm into `out_dir`.
/// Returns the number of poses written.
std::size_t render_novel(const TrainState& state, const std::vector<Camera>& cameras,
                         const std::filesystem::path& out_dir);

/// Camera path JSON: {"intrinsics": {...}, "poses": [{"rotation": [9], "translation": [3]}]}.
std::vector<Camera> read_camera_path(const std::filesystem::path& path);
void write_camera_path(const std::filesystem::path& path, const std::vector<Camera>& cameras);

/// `count` poses on an arc around the vertical axis through `target`.
std::vector<Camera> orbit_path(const Camera& intrinsics, const Vec3& target, double radius, double height,
                               double arc_degrees, int count);

/// Full training objective on a gradient scene, as a finite-difference
/// problem. Clean mode drops the medium and the guidance term.
FdProblem gradient_problem(const GradientScene& scene, RenderMode mode, double lambda1 = 0.3,
                           double lambda2 = 0.1);

}  // namespace splash
