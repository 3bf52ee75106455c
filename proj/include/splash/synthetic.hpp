#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "splash/dataset.hpp"
#include "splash/image.hpp"
#include "splash/scene.hpp"

namespace splash {

/// Procedural underwater scene: a textured floor, colored blobs resting on it,
/// near-black rocks floating above it, and a camera arc around the vertical
/// axis. Rocks are stacked pairs of identical Gaussians so almost no light
/// from behind them survives; they provide the dark pixels at every depth.
struct SyntheticSpec {
  std::uint64_t seed = 7;
  int num_gaussians = 300;
  int num_poses = 24;
  int width = 64;
  int height = 64;
  double focal = 70.0;

  double blob_fraction = 0.1;     // share of Gaussians used for colored blobs
  double shadow_fraction = 0.3;   // share of Gaussians used for near-black rocks
  // Rocks: horizontal range from the arc and downward viewing angle (radians).
  double rock_range_min = 4.0;
  double rock_range_max = 14.0;
  double rock_pitch_min = 0.3;
  double rock_pitch_max = 0.45;

  // Camera arc: eye at `arc_radius` from the target, `arc_height` above the floor.
  double arc_radius = 5.0;
  double arc_height = 4.0;
  double arc_degrees = 80.0;
  double target_height = 0.0;  // cameras look at this point above the floor center

  MediumParams medium;

  /// seed 7, 300 Gaussians, 24 poses, 64x64, B_d (0.6, 0.45, 0.3),
  /// B_inf (0.2, 0.35, 0.5), B_b (0.8, 1.0, 1.2).
  static SyntheticSpec canonical();
};

struct SyntheticScene {
  GaussianCloud cloud;
  std::vector<Camera> cameras;
  std::vector<LinearImage> clean;
  std::vector<LinearImage> observed;
  std::vector<DepthMap> depth;  // raw view-space depth
  std::vector<SeedPoint> points;
  MediumParams medium;
};

/// Builds the scene and renders every pose in memory.
SyntheticScene build_synthetic(const SyntheticSpec& spec);

/// In-memory dataset (observed images, raw depths, point seed) for `scene`.
Dataset to_dataset(const SyntheticScene& scene);

/// Writes images/, clean/, depth/ (PFM), points.txt, truth.json,
/// truth.ckpt and manifest.json into `dir`.
void generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& dir);

/// Ground truth plus the end-to-end recovery thresholds. The tolerances come
/// from a reference training run with `reference_config` (a JSON object of
/// OptimConfig overrides); `backscatter_target` is the tighter B_b goal that
/// run did not reach, kept so reports can show the gap.
struct SyntheticTruth {
  MediumParams medium;
  double psnr_min = 25.0;
  double veiling_tolerance = 0.07;
  double backscatter_tolerance = 1.5;
  double backscatter_target = 0.3;
  std::string reference_config =
      R"({"iterations":2000,"position_lr_max_steps":2000,"densify_from":1000,"densify_until":1800})";
};

std::string truth_to_json(const SyntheticTruth& truth);
SyntheticTruth read_truth(const std::filesystem::path& path);

/// Small scene for gradient checks: `n` random Gaussians in front of one camera.
struct GradientScene {
  GaussianCloud cloud;
  Camera camera;
  MediumParams medium;
  LinearImage target;
};

GradientScene make_gradient_scene(std::uint64_t seed = 11, int n = 50, int size = 32);

/// Random cloud in front of a single camera, used by render oracles and benchmarks.
GaussianCloud random_cloud(std::uint64_t seed, int n, const Camera& cam, int sh_degree = 0);
Camera default_camera(int width, int height);

}  // namespace splash
