#include "splash/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "splash/checkpoint.hpp"
#include "splash/image_io.hpp"
#include "splash/medium.hpp"
#include "splash/rasterizer.hpp"

namespace splash {
namespace {

using nlohmann::json;

// Floor patch in world coordinates (y up, floor at y = 0).
constexpr double kFloorX0 = -8.0, kFloorX1 = 8.0;
constexpr double kFloorZ0 = -3.5, kFloorZ1 = 5.5;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
  double normal() {
    // Box-Muller on our own uniforms keeps streams identical across standard libraries.
    const double u1 = std::max(unit(), 1e-300);
    const double u2 = unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  Vec4 quaternion() {
    Vec4 q(normal(), normal(), normal(), normal());
    return q / q.norm();
  }

 private:
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  std::mt19937_64 engine_;
};

Vec4 yaw_quaternion(double angle) { return Vec4(std::cos(0.5 * angle), 0.0, std::sin(0.5 * angle), 0.0); }

std::string view_name(const char* dir, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s/view_%03zu.pfm", dir, i);
  return buf;
}

}  // namespace

SyntheticSpec SyntheticSpec::canonical() {
  SyntheticSpec s;
  s.medium.attenuation = Vec3(0.6, 0.45, 0.3);
  s.medium.veiling_light = Vec3(0.2, 0.35, 0.5);
  s.medium.backscatter = Vec3(0.8, 1.0, 1.2);
  return s;
}

SyntheticScene build_synthetic(const SyntheticSpec& spec) {
  if (spec.num_gaussians < 4 || spec.num_poses < 1 || spec.width < 1 || spec.height < 1) {
    throw UsageError("synthetic: invalid spec");
  }
  Rng rng(spec.seed);
  SyntheticScene scene;
  scene.medium = spec.medium;
  scene.cloud.sh_degree = 0;

  const double half_arc = 0.5 * spec.arc_degrees * std::numbers::pi / 180.0;
  for (int k = 0; k < spec.num_poses; ++k) {
    const double phi = spec.num_poses == 1 ? 0.0 : -half_arc + 2.0 * half_arc * k / (spec.num_poses - 1);
    const Vec3 eye(spec.arc_radius * std::sin(phi), spec.arc_height, -spec.arc_radius * std::cos(phi));
    scene.cameras.push_back(Camera::look_at(eye, Vec3(0.0, spec.target_height, 0.0), Vec3::UnitY(), spec.width, spec.height, spec.focal,
                                            0.1, 100.0));
  }

  const int rock_pairs = static_cast<int>(std::lround(0.5 * spec.num_gaussians * spec.shadow_fraction));
  const int blobs = static_cast<int>(std::lround(spec.num_gaussians * spec.blob_fraction));
  const int floor_target = spec.num_gaussians - blobs - 2 * rock_pairs;
  if (floor_target < 1) throw UsageError("synthetic: blob and shadow fractions leave no floor");
  const double lx = kFloorX1 - kFloorX0;
  const double lz = kFloorZ1 - kFloorZ0;
  const int nx = std::max(1, static_cast<int>(std::lround(std::sqrt(floor_target * lx / lz))));
  const int nz = std::max(1, floor_target / nx);
  const double sx = lx / nx;
  const double sz = lz / nz;

  Vec3 phase_x, phase_z;
  for (int c = 0; c < 3; ++c) {
    phase_x[c] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    phase_z[c] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
  const double sigma = 0.45 * std::max(sx, sz);
  for (int iz = 0; iz < nz; ++iz) {
    for (int ix = 0; ix < nx; ++ix) {
      Gaussian g;
      const double x = kFloorX0 + (ix + 0.5 + rng.uniform(-0.15, 0.15)) * sx;
      const double z = kFloorZ0 + (iz + 0.5 + rng.uniform(-0.15, 0.15)) * sz;
      g.position = Vec3(x, 0.0, z);
      // Cells beside a camera only show up as smeared edge artifacts.
      if (std::any_of(scene.cameras.begin(), scene.cameras.end(),
                      [&](const Camera& cam) { return cam.to_view(g.position).z() < 3.0; })) {
        continue;
      }
      g.log_scale = Vec3(std::log(sigma * rng.uniform(0.9, 1.1)), std::log(0.03), std::log(sigma * rng.uniform(0.9, 1.1)));
      g.rotation = yaw_quaternion(rng.uniform(0.0, std::numbers::pi));
      g.opacity_logit = logit(0.92);
      Vec3 color;
      for (int c = 0; c < 3; ++c) {
        color[c] = 0.5 + 0.3 * std::sin(0.8 * x + phase_x[c]) * std::cos(0.6 * z + phase_z[c]) + rng.uniform(-0.05, 0.05);
      }
      g.sh[0] = color.cwiseMax(0.05).cwiseMin(0.95);
      // The far band is black so the horizon, where a view has few pixels, stays dark.
      if (z > kFloorZ1 - 2.0) g.sh[0].setZero();
      scene.cloud.gaussians.push_back(g);
    }
  }
  const int blob_count = spec.num_gaussians - static_cast<int>(scene.cloud.size()) - 2 * rock_pairs;
  for (int b = 0; b < blob_count; ++b) {
    Gaussian g;
    const Vec3 scale(rng.uniform(0.15, 0.45), rng.uniform(0.15, 0.45), rng.uniform(0.15, 0.45));
    g.position = Vec3(rng.uniform(-5.0, 5.0), scale.maxCoeff() + rng.uniform(0.0, 0.8), rng.uniform(-0.5, 5.0));
    g.log_scale = scale.array().log();
    g.rotation = rng.quaternion();
    g.opacity_logit = rng.uniform(2.0, 4.0);
    Vec3 color(rng.uniform(0.1, 0.95), rng.uniform(0.1, 0.95), rng.uniform(0.1, 0.95));
    color[b % 3] = rng.uniform(0.7, 0.95);
    g.sh[0] = color;
    scene.cloud.gaussians.push_back(g);
  }
  // Rocks line a fan of rays from the camera arc through its pivot, spread in
  // range, so every view has dark pixels across its whole depth range.
  constexpr int kRockRays = 6;
  const int per_ray = (rock_pairs + kRockRays - 1) / kRockRays;
  for (int r = 0; r < rock_pairs; ++r) {
    const int ray = r % kRockRays;
    const int step = r / kRockRays;
    Gaussian g;
    const double phi = -half_arc + 2.0 * half_arc * (ray + rng.uniform(0.3, 0.7)) / kRockRays;
    const Vec3 eye(spec.arc_radius * std::sin(phi), 0.0, -spec.arc_radius * std::cos(phi));
    const Vec3 toward(-std::sin(phi), 0.0, std::cos(phi));
    const Vec3 side(std::cos(phi), 0.0, std::sin(phi));
    const double range =
        spec.rock_range_min + (spec.rock_range_max - spec.rock_range_min) * (step + rng.uniform(0.2, 0.8)) / per_ray;
    const double drop = range * std::tan(rng.uniform(spec.rock_pitch_min, spec.rock_pitch_max));
    g.position = eye + range * toward + rng.uniform(-0.6, 0.6) * side;
    g.position.y() = std::clamp(spec.arc_height - drop, 0.6, 2.6);
    g.log_scale = Vec3(std::log(rng.uniform(0.2, 0.35)), std::log(rng.uniform(0.2, 0.35)), std::log(rng.uniform(0.2, 0.35)));
    g.rotation = rng.quaternion();
    g.opacity_logit = 6.0;
    scene.cloud.gaussians.push_back(g);
    scene.cloud.gaussians.push_back(g);
  }

  for (const Camera& cam : scene.cameras) {
    const RenderOutput out = render(scene.cloud, cam, &scene.medium, RenderMode::kUnderwater);
    scene.clean.push_back(out.clean_color);
    scene.observed.push_back(apply_medium(out.clean_color, out.medium_depth, scene.medium));
    scene.depth.push_back(out.depth);
  }

  for (const Gaussian& g : scene.cloud.gaussians) {
    SeedPoint p;
    p.position = g.position + 0.1 * Vec3(rng.normal(), rng.normal(), rng.normal());
    p.color = (g.sh[0] + 0.05 * Vec3(rng.normal(), rng.normal(), rng.normal())).cwiseMax(0.0).cwiseMin(1.0);
    scene.points.push_back(p);
  }
  return scene;
}

Dataset to_dataset(const SyntheticScene& scene) {
  Dataset d;
  const Camera& c0 = scene.cameras.front();
  d.manifest.width = c0.width;
  d.manifest.height = c0.height;
  d.manifest.fx = c0.fx;
  d.manifest.fy = c0.fy;
  d.manifest.cx = c0.cx;
  d.manifest.cy = c0.cy;
  d.manifest.near_plane = c0.near_plane;
  d.manifest.far_plane = c0.far_plane;
  d.cameras = scene.cameras;
  d.images = scene.observed;
  for (const auto& z : scene.depth) d.depths.emplace_back(z);
  d.points = scene.points;
  return d;
}

void generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& dir) {
  const SyntheticScene scene = build_synthetic(spec);
  std::error_code ec;
  for (const char* sub : {"images", "clean", "depth"}) {
    std::filesystem::create_directories(dir / sub, ec);
    if (ec) throw DataError("synthetic: cannot create " + (dir / sub).string());
  }

  DatasetManifest m;
  const Camera& c0 = scene.cameras.front();
  m.width = c0.width;
  m.height = c0.height;
  m.fx = c0.fx;
  m.fy = c0.fy;
  m.cx = c0.cx;
  m.cy = c0.cy;
  m.near_plane = c0.near_plane;
  m.far_plane = c0.far_plane;
  for (std::size_t i = 0; i < scene.cameras.size(); ++i) {
    ViewRecord v;
    v.image = view_name("images", i);
    v.depth = view_name("depth", i);
    v.rotation = scene.cameras[i].rotation;
    v.translation = scene.cameras[i].translation;
    write_pfm(dir / v.image, scene.observed[i]);
    write_pfm(dir / view_name("clean", i), scene.clean[i]);
    write_pfm(dir / *v.depth, static_cast<const Raster<1>&>(scene.depth[i]));
    m.views.push_back(std::move(v));
  }
  m.points = "points.txt";
  m.truth = "truth.json";
  write_points(dir / *m.points, scene.points);

  SyntheticTruth truth;
  truth.medium = scene.medium;
  write_text_atomic(dir / *m.truth, truth_to_json(truth));

  TrainState gt;
  gt.cloud = scene.cloud;
  gt.medium = scene.medium;
  gt.reset_auxiliary();
  write_checkpoint_file(dir / "truth.ckpt", gt);
  write_manifest(dir, m);
}

std::string truth_to_json(const SyntheticTruth& t) {
  auto vec = [](const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); };
  json j;
  j["attenuation"] = vec(t.medium.attenuation);
  j["veiling_light"] = vec(t.medium.veiling_light);
  j["backscatter"] = vec(t.medium.backscatter);
  j["thresholds"] = {{"psnr_min", t.psnr_min},
                     {"veiling_tolerance", t.veiling_tolerance},
                     {"backscatter_tolerance", t.backscatter_tolerance},
                     {"backscatter_target", t.backscatter_target}};
  j["reference_config"] = json::parse(t.reference_config);
  return j.dump(2) + "\n";
}

SyntheticTruth read_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  SyntheticTruth t;
  try {
    const json j = json::parse(in);
    auto vec = [&](const char* key) {
      const auto v = j.at(key).get<std::vector<double>>();
      if (v.size() != 3) throw DataError(std::string("truth: bad ") + key);
      return Vec3(v[0], v[1], v[2]);
    };
    t.medium.attenuation = vec("attenuation");
    t.medium.veiling_light = vec("veiling_light");
    t.medium.backscatter = vec("backscatter");
    if (j.contains("thresholds")) {
      const json& th = j.at("thresholds");
      t.psnr_min = th.value("psnr_min", t.psnr_min);
      t.veiling_tolerance = th.value("veiling_tolerance", t.veiling_tolerance);
      t.backscatter_tolerance = th.value("backscatter_tolerance", t.backscatter_tolerance);
      t.backscatter_target = th.value("backscatter_target", t.backscatter_target);
    }
    if (j.contains("reference_config")) t.reference_config = j.at("reference_config").dump();
  } catch (const json::exception& e) {
    throw DataError(std::string("truth: ") + e.what());
  }
  return t;
}

Camera default_camera(int width, int height) {
  Camera cam;
  cam.width = width;
  cam.height = height;
  cam.fx = cam.fy = 1.1 * width;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  cam.near_plane = 0.1;
  cam.far_plane = 100.0;
  return cam;
}

GaussianCloud random_cloud(std::uint64_t seed, int n, const Camera& cam, int sh_degree) {
  Rng rng(seed);
  GaussianCloud cloud;
  cloud.sh_degree = sh_degree;
  const int coeffs = sh_coeff_count(sh_degree);
  for (int i = 0; i < n; ++i) {
    Gaussian g;
    const double z = rng.uniform(3.0, 8.0);
    const double x = (rng.uniform(0.0, cam.width) - cam.cx) * z / cam.fx;
    const double y = (rng.uniform(0.0, cam.height) - cam.cy) * z / cam.fy;
    g.position = cam.rotation.transpose() * (Vec3(x, y, z) - cam.translation);
    for (int k = 0; k < 3; ++k) g.log_scale[k] = std::log(rng.uniform(0.04, 0.3));
    g.rotation = rng.quaternion();
    g.opacity_logit = rng.uniform(-1.0, 3.0);
    g.sh[0] = Vec3(rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0));
    for (int k = 1; k < coeffs; ++k) g.sh[k] = 0.1 * Vec3(rng.normal(), rng.normal(), rng.normal());
    cloud.gaussians.push_back(g);
  }
  return cloud;
}

GradientScene make_gradient_scene(std::uint64_t seed, int n, int size) {
  GradientScene s;
  s.camera = default_camera(size, size);
  Rng rng(seed);
  s.cloud.sh_degree = 1;
  for (int i = 0; i < n; ++i) {
    Gaussian g;
    const double z = rng.uniform(3.0, 6.0);
    const double x = (rng.uniform(2.0, size - 2.0) - s.camera.cx) * z / s.camera.fx;
    const double y = (rng.uniform(2.0, size - 2.0) - s.camera.cy) * z / s.camera.fy;
    g.position = Vec3(x, y, z);
    for (int k = 0; k < 3; ++k) g.log_scale[k] = std::log(rng.uniform(0.08, 0.3));
    g.rotation = rng.quaternion();
    g.opacity_logit = rng.uniform(-1.0, 1.0);
    g.sh[0] = Vec3(rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9));
    for (int k = 1; k < 4; ++k) g.sh[k] = 0.1 * Vec3(rng.normal(), rng.normal(), rng.normal());
    s.cloud.gaussians.push_back(g);
  }
  s.medium.attenuation = Vec3(rng.uniform(0.2, 1.5), rng.uniform(0.2, 1.5), rng.uniform(0.2, 1.5));
  s.medium.veiling_light = Vec3(rng.uniform(0.1, 0.6), rng.uniform(0.1, 0.6), rng.uniform(0.1, 0.6));
  s.medium.backscatter = Vec3(rng.uniform(0.3, 2.0), rng.uniform(0.3, 2.0), rng.uniform(0.3, 2.0));
  BackscatterGuidance guide;
  for (int c = 0; c < 3; ++c) {
    guide.veiling_light[c] = s.medium.veiling_light[c] + (rng.uniform(0.0, 1.0) < 0.5 ? -0.08 : 0.08);
    guide.backscatter[c] = s.medium.backscatter[c] + (rng.uniform(0.0, 1.0) < 0.5 ? -0.2 : 0.2);
  }
  s.medium.guidance = guide;

  // Target offset from the initial render so no l1 residual sits near its kink.
  const RenderOutput out = render(s.cloud, s.camera, &s.medium, RenderMode::kUnderwater);
  s.target = LinearImage(size, size);
  for (std::size_t i = 0; i < s.target.size(); ++i) {
    const double offset = rng.uniform(0.1, 0.3);
    s.target.data[i] = out.color.data[i] + (rng.uniform(0.0, 1.0) < 0.5 ? -offset : offset);
  }
  return s;
}

}  // namespace splash
