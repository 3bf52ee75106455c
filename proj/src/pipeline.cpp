#include "splash/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "splash/backscatter.hpp"
#include "splash/backward.hpp"
#include "splash/checkpoint.hpp"
#include "splash/image_io.hpp"
#include "splash/medium.hpp"

namespace splash {
namespace {

using nlohmann::json;

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Fisher-Yates with our own draws so the order does not depend on the standard library.
void shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

// Mean distance to the three nearest neighbours, per point.
std::vector<double> neighbour_scale(const std::vector<Vec3>& pts) {
  std::vector<double> out(pts.size(), 0.1);
  if (pts.size() < 2) return out;
  const std::size_t k = std::min<std::size_t>(3, pts.size() - 1);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::vector<double> d;
    d.reserve(pts.size() - 1);
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (j != i) d.push_back((pts[i] - pts[j]).norm());
    }
    std::partial_sort(d.begin(), d.begin() + k, d.end());
    double s = 0.0;
    for (std::size_t m = 0; m < k; ++m) s += d[m];
    out[i] = std::max(s / k, 1e-4);
  }
  return out;
}

std::array<double, 9> matrix_row_major(const Mat3& m) {
  std::array<double, 9> r{};
  for (int i = 0; i < 9; ++i) r[i] = m(i / 3, i % 3);
  return r;
}

}  // namespace

std::string format_log_row(const IterationLog& r) {
  char buf[640];
  const MediumParams& m = r.medium;
  std::snprintf(buf, sizeof buf,
                "%d,%.17g,%.17g,%.17g,%.17g,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g",
                r.iteration, r.loss.l1, r.loss.d_ssim, r.loss.l_bs, r.loss.total, r.num_gaussians,
                m.attenuation[0], m.attenuation[1], m.attenuation[2], m.veiling_light[0], m.veiling_light[1],
                m.veiling_light[2], m.backscatter[0], m.backscatter[1], m.backscatter[2], r.lr_position);
  return buf;
}

std::string TrainResult::csv() const {
  std::string out = std::string(kTrainLogHeader) + "\n";
  for (const auto& row : log) out += format_log_row(row) + "\n";
  return out;
}

double scene_extent(const std::vector<Camera>& cameras) {
  if (cameras.empty()) return 1.0;
  Vec3 mean = Vec3::Zero();
  for (const auto& c : cameras) mean += c.center();
  mean /= static_cast<double>(cameras.size());
  double r = 0.0;
  for (const auto& c : cameras) r = std::max(r, (c.center() - mean).norm());
  return r > 0.0 ? 1.1 * r : 1.0;
}

TrainState initialize_state(const Dataset& data, std::uint64_t seed, int random_count) {
  TrainState st;
  st.cloud.sh_degree = 0;
  st.medium.attenuation = Vec3::Constant(0.05);
  st.medium.backscatter = Vec3::Constant(0.05);
  st.medium.veiling_light = Vec3::Constant(0.3);

  std::vector<Vec3> pos;
  std::vector<Vec3> col;
  if (!data.points.empty()) {
    for (const auto& p : data.points) {
      pos.push_back(p.position);
      col.push_back(p.color);
    }
  } else {
    if (random_count < 1) throw UsageError("initialize_state: random_count must be positive");
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (const Camera& c : data.cameras) {
      const Mat3 rt = c.rotation.transpose();
      for (double z : {1.0, 10.0}) {
        for (double u : {0.0, static_cast<double>(c.width)}) {
          for (double v : {0.0, static_cast<double>(c.height)}) {
            const Vec3 view((u - c.cx) * z / c.fx, (v - c.cy) * z / c.fy, z);
            const Vec3 w = rt * (view - c.translation);
            lo = lo.cwiseMin(w);
            hi = hi.cwiseMax(w);
          }
        }
      }
    }
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    for (int i = 0; i < random_count; ++i) {
      Vec3 p;
      for (int k = 0; k < 3; ++k) p[k] = lo[k] + (hi[k] - lo[k]) * uniform01(rng);
      pos.push_back(p);
      col.push_back(Vec3(uniform01(rng), uniform01(rng), uniform01(rng)));
    }
  }

  const std::vector<double> scale = neighbour_scale(pos);
  double mean_scale = 0.0;
  for (double s : scale) mean_scale += s;
  mean_scale /= static_cast<double>(scale.size());
  for (std::size_t i = 0; i < pos.size(); ++i) {
    Gaussian g;
    g.position = pos[i];
    const double s = data.points.empty() ? mean_scale : scale[i];
    g.log_scale = Vec3::Constant(std::log(s));
    g.opacity_logit = logit(0.1);
    g.sh[0] = col[i];
    st.cloud.gaussians.push_back(g);
  }
  st.reset_auxiliary();
  return st;
}

TrainResult train(const Dataset& data, const TrainOptions& options) {
  return train(data, options, initialize_state(data, options.seed, options.random_init_count));
}

TrainResult train(const Dataset& data, const TrainOptions& options, TrainState state) {
  const OptimConfig& cfg = options.config;
  cfg.validate();
  if (data.images.size() != data.cameras.size()) throw DataError("train: images and poses differ in count");
  if (!state.consistent()) state.reset_auxiliary();
  const Split split = split_dataset(data.size());

  TrainResult result;
  result.scene_extent = scene_extent(data.cameras);
  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> order = split.train;
  std::size_t cursor = order.size();

  const bool write = !options.out_dir.empty();
  if (write) std::filesystem::create_directories(options.out_dir);
  auto save = [&](const std::string& name) {
    write_checkpoint_file(options.out_dir / name, state);
    write_text_atomic(options.out_dir / "train_log.csv", result.csv());
  };

  // Guidance anchor from the current scene depth: the current view, or every
  // training view pooled.
  auto refit = [&](const LinearImage& gt, const DepthMap& depth) {
    BackscatterEstimate est;
    if (cfg.guidance_all_views) {
      std::vector<LinearImage> images;
      std::vector<DepthMap> depths;
      for (std::size_t v : split.train) {
        images.push_back(data.images[v]);
        depths.push_back(render(state.cloud, data.cameras[v], nullptr, RenderMode::kClean).medium_depth);
      }
      est = estimate_backscatter(std::span<const LinearImage>(images), std::span<const DepthMap>(depths));
    } else {
      est = estimate_backscatter(gt, depth);
    }
    if (est.veiling_light.allFinite() && est.backscatter.allFinite()) state.medium.guidance = est.guidance();
  };

  const int first = static_cast<int>(state.iteration) + 1;
  for (int iter = first; iter <= cfg.iterations; ++iter) {
    if (cursor == order.size()) {
      shuffle(order, rng);
      cursor = 0;
    }
    const std::size_t view = order[cursor++];
    result.views_used.push_back(view);
    const Camera& cam = data.cameras[view];
    const LinearImage& gt = data.images[view];

    IterationLog row;
    row.iteration = iter;
    row.lr_position = position_lr(cfg, iter);

    if (iter == 1 && cfg.guidance_warm_start && cfg.lambda2 > 0.0) {
      refit(gt, render(state.cloud, cam, nullptr, RenderMode::kClean).medium_depth);
      if (state.medium.guidance) {
        state.medium.veiling_light = state.medium.guidance->veiling_light;
        state.medium.backscatter = state.medium.guidance->backscatter;
        state.medium.clamp();
      }
    }
    const RenderOutput fwd = render(state.cloud, cam, &state.medium, RenderMode::kUnderwater);
    const TotalLoss loss = total_loss(fwd.color, gt, state.medium, cfg.lambda1, cfg.lambda2);
    row.loss = loss.breakdown;

    bool stepped = false;
    if (std::isfinite(loss.breakdown.total)) {
      GradientBuffer grads = backward_render(state.cloud, cam, fwd, loss.grad);
      grads.medium = backward_medium(fwd, loss.grad, state.medium, cfg.lambda2);
      if (cfg.densify && iter < cfg.densify_until) accumulate_densify_stats(state, grads);
      stepped = adam_step(state, grads, cfg, row.lr_position, result.scene_extent);
    }
    if (!stepped) {
      row.skipped = true;
      ++result.skipped;
      std::cerr << "iteration " << iter << ": non-finite loss or gradient, step skipped\n";
    }

    if (cfg.densify && iter <= cfg.densify_until) {
      if (iter > cfg.densify_from && iter % cfg.densification_interval == 0) {
        const DensifyReport rep = densify_and_prune(state, cfg, result.scene_extent, rng);
        if (rep.prune_skipped) std::cerr << "iteration " << iter << ": pruning would empty the cloud, skipped\n";
      }
      if (iter % cfg.opacity_reset_interval == 0) reset_opacity(state);
    }

    if (iter % cfg.refit_period == 0) {
      refit(gt, fwd.medium_depth);
      if (options.on_refit && state.medium.guidance) options.on_refit(iter, *state.medium.guidance);
    }

    state.iteration = static_cast<std::uint64_t>(iter);
    row.num_gaussians = state.cloud.size();
    row.medium = state.medium;
    result.log.push_back(row);
    if (options.on_iteration) options.on_iteration(row);

    if (write && iter % cfg.checkpoint_interval == 0) {
      char name[64];
      std::snprintf(name, sizeof name, "checkpoint_%06d.ckpt", iter);
      save(name);
    }
  }
  result.state = std::move(state);
  if (write) {
    TrainState& st = result.state;
    write_checkpoint_file(options.out_dir / "final.ckpt", st);
    write_text_atomic(options.out_dir / "train_log.csv", result.csv());
  }
  return result;
}

double psnr(const LinearImage& a, const LinearImage& b) {
  if (!a.same_shape(b) || a.empty()) throw DataError("psnr: image shape mismatch");
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.size());
  if (mse <= 0.0) return 99.0;
  return std::min(99.0, -10.0 * std::log10(mse));
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  char line[128];
  std::snprintf(line, sizeof line, "%-8s %10s %10s\n", "view", "psnr", "ssim");
  os << line;
  for (const auto& v : views) {
    std::snprintf(line, sizeof line, "%-8zu %10.4f %10.6f\n", v.view, v.psnr, v.ssim);
    os << line;
  }
  std::snprintf(line, sizeof line, "%-8s %10.4f %10.6f\n", "mean", mean_psnr, mean_ssim);
  os << line;
  return os.str();
}

EvalReport evaluate(const TrainState& state, const Dataset& data, const std::vector<std::size_t>& views) {
  EvalReport report;
  for (std::size_t v : views) {
    if (v >= data.size()) throw DataError("evaluate: view " + std::to_string(v) + " missing");
    const RenderOutput out = render(state.cloud, data.cameras[v], &state.medium, RenderMode::kUnderwater);
    ViewMetrics m;
    m.view = v;
    m.psnr = psnr(out.color, data.images[v]);
    m.ssim = ssim(out.color, data.images[v]);
    report.views.push_back(m);
    report.mean_psnr += m.psnr;
    report.mean_ssim += m.ssim;
  }
  if (!report.views.empty()) {
    report.mean_psnr /= static_cast<double>(report.views.size());
    report.mean_ssim /= static_cast<double>(report.views.size());
  }
  return report;
}

std::size_t render_novel(const TrainState& state, const std::vector<Camera>& cameras,
                         const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  for (std::size_t i = 0; i < cameras.size(); ++i) {
    const RenderOutput out = render(state.cloud, cameras[i], &state.medium, RenderMode::kUnderwater);
    char stem[32];
    std::snprintf(stem, sizeof stem, "%03zu", i);
    write_png(out_dir / ("underwater_" + std::string(stem) + ".png"), out.color);
    write_pfm(out_dir / ("underwater_" + std::string(stem) + ".pfm"), out.color);
    write_png(out_dir / ("clean_" + std::string(stem) + ".png"), out.clean_color);
    write_pfm(out_dir / ("clean_" + std::string(stem) + ".pfm"), out.clean_color);
    write_pfm(out_dir / ("depth_" + std::string(stem) + ".pfm"), static_cast<const Raster<1>&>(out.depth));
  }
  return cameras.size();
}

std::vector<Camera> read_camera_path(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open camera path " + path.string());
  std::vector<Camera> out;
  try {
    const json j = json::parse(in);
    const json& k = j.at("intrinsics");
    Camera base;
    base.width = k.at("width").get<int>();
    base.height = k.at("height").get<int>();
    base.fx = k.at("fx").get<double>();
    base.fy = k.at("fy").get<double>();
    base.cx = k.at("cx").get<double>();
    base.cy = k.at("cy").get<double>();
    base.near_plane = k.value("near", 0.01);
    base.far_plane = k.value("far", 100.0);
    for (const auto& p : j.at("poses")) {
      const auto r = p.at("rotation").get<std::vector<double>>();
      const auto t = p.at("translation").get<std::vector<double>>();
      if (r.size() != 9 || t.size() != 3) throw DataError("camera path: malformed pose");
      Camera c = base;
      for (int i = 0; i < 9; ++i) c.rotation(i / 3, i % 3) = r[i];
      c.translation = Vec3(t[0], t[1], t[2]);
      c.validate();
      out.push_back(c);
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("camera path: ") + e.what());
  }
  if (out.empty()) throw DataError("camera path: no poses");
  return out;
}

void write_camera_path(const std::filesystem::path& path, const std::vector<Camera>& cameras) {
  if (cameras.empty()) throw UsageError("camera path: no poses");
  const Camera& c = cameras.front();
  json j;
  j["intrinsics"] = {{"width", c.width}, {"height", c.height},    {"fx", c.fx},          {"fy", c.fy},
                     {"cx", c.cx},       {"cy", c.cy},            {"near", c.near_plane}, {"far", c.far_plane}};
  json poses = json::array();
  for (const auto& cam : cameras) {
    poses.push_back({{"rotation", matrix_row_major(cam.rotation)},
                     {"translation", {cam.translation.x(), cam.translation.y(), cam.translation.z()}}});
  }
  j["poses"] = poses;
  write_text_atomic(path, j.dump(2) + "\n");
}

std::vector<Camera> orbit_path(const Camera& k, const Vec3& target, double radius, double height,
                               double arc_degrees, int count) {
  if (count < 1) throw UsageError("orbit_path: count must be positive");
  std::vector<Camera> out;
  const double half = 0.5 * arc_degrees * std::numbers::pi / 180.0;
  for (int i = 0; i < count; ++i) {
    const double phi = count == 1 ? 0.0 : -half + 2.0 * half * i / (count - 1);
    const Vec3 eye = target + Vec3(radius * std::sin(phi), height, -radius * std::cos(phi));
    Camera c = Camera::look_at(eye, target, Vec3::UnitY(), k.width, k.height, k.fx, k.near_plane, k.far_plane);
    c.fy = k.fy;
    c.cx = k.cx;
    c.cy = k.cy;
    out.push_back(c);
  }
  return out;
}

FdProblem gradient_problem(const GradientScene& scene, RenderMode mode, double lambda1, double lambda2) {
  FdProblem p;
  p.cloud = scene.cloud;
  p.medium = scene.medium;
  p.camera = scene.camera;
  p.mode = mode;
  if (mode == RenderMode::kClean) p.medium.guidance.reset();
  const LinearImage target = scene.target;
  const Camera cam = scene.camera;
  // The medium terms see depth as a constant, so the objective freezes it at the base parameters.
  const DepthMap depth = render(p.cloud, cam, nullptr, RenderMode::kClean).medium_depth;
  p.loss = [=](const GaussianCloud& cloud, const MediumParams& m) {
    const RenderOutput out = render(cloud, cam, nullptr, RenderMode::kClean);
    const LinearImage color = mode == RenderMode::kUnderwater ? apply_medium(out.clean_color, depth, m, false)
                                                              : out.clean_color;
    return total_loss(color, target, m, lambda1, lambda2).breakdown.total;
  };
  p.gradient = [=](const GaussianCloud& cloud, const MediumParams& m) {
    const RenderOutput out = render(cloud, cam, &m, mode);
    const TotalLoss loss = total_loss(out.color, target, m, lambda1, lambda2);
    GradientBuffer g = backward_render(cloud, cam, out, loss.grad);
    if (mode == RenderMode::kUnderwater) g.medium = backward_medium(out, loss.grad, m, lambda2);
    return g;
  };
  return p;
}

}  // namespace splash
