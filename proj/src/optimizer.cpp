#include "splash/optimizer.hpp"

#include <algorithm>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

namespace splash {
namespace {

using nlohmann::json;

template <typename F>
void for_each_config_field(OptimConfig& c, F&& f) {
  f("iterations", c.iterations);
  f("position_lr_init", c.position_lr_init);
  f("position_lr_final", c.position_lr_final);
  f("position_lr_delay_mult", c.position_lr_delay_mult);
  f("position_lr_delay_steps", c.position_lr_delay_steps);
  f("position_lr_max_steps", c.position_lr_max_steps);
  f("feature_lr", c.feature_lr);
  f("attenuation_lr", c.attenuation_lr);
  f("backscatter_lr", c.backscatter_lr);
  f("opacity_lr", c.opacity_lr);
  f("scaling_lr", c.scaling_lr);
  f("rotation_lr", c.rotation_lr);
  f("densify", c.densify);
  f("densification_interval", c.densification_interval);
  f("opacity_reset_interval", c.opacity_reset_interval);
  f("densify_from", c.densify_from);
  f("densify_until", c.densify_until);
  f("densify_grad_threshold", c.densify_grad_threshold);
  f("min_opacity", c.min_opacity);
  f("percent_dense", c.percent_dense);
  f("lambda1", c.lambda1);
  f("lambda2", c.lambda2);
  f("refit_period", c.refit_period);
  f("guidance_all_views", c.guidance_all_views);
  f("guidance_warm_start", c.guidance_warm_start);
  f("checkpoint_interval", c.checkpoint_interval);
  f("beta1", c.beta1);
  f("beta2", c.beta2);
  f("epsilon", c.epsilon);
}

// Visits every scalar of a parameter block alongside its moments and gradient.
template <typename F>
void for_each_scalar(Gaussian& p, Gaussian& m, Gaussian& v, const Gaussian& g, int coeffs, F&& f) {
  for (int k = 0; k < 3; ++k) f(p.position[k], m.position[k], v.position[k], g.position[k], 0);
  for (int k = 0; k < 3; ++k) f(p.log_scale[k], m.log_scale[k], v.log_scale[k], g.log_scale[k], 1);
  for (int k = 0; k < 4; ++k) f(p.rotation[k], m.rotation[k], v.rotation[k], g.rotation[k], 2);
  f(p.opacity_logit, m.opacity_logit, v.opacity_logit, g.opacity_logit, 3);
  for (int s = 0; s < coeffs; ++s) {
    for (int k = 0; k < 3; ++k) f(p.sh[s][k], m.sh[s][k], v.sh[s][k], g.sh[s][k], s == 0 ? 4 : 5);
  }
}

bool gaussian_finite(const Gaussian& g, int coeffs) {
  bool ok = g.position.allFinite() && g.log_scale.allFinite() && g.rotation.allFinite() &&
            std::isfinite(g.opacity_logit);
  for (int s = 0; s < coeffs; ++s) ok = ok && g.sh[s].allFinite();
  return ok;
}

}  // namespace

void OptimConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw UsageError(std::string("config: ") + what);
  };
  require(iterations >= 0, "iterations must be >= 0");
  require(position_lr_init > 0 && position_lr_final > 0, "position learning rates must be positive");
  require(position_lr_delay_mult > 0 && position_lr_delay_mult <= 1, "position_lr_delay_mult must be in (0, 1]");
  require(position_lr_delay_steps >= 0 && position_lr_max_steps > 0, "position lr steps out of range");
  require(feature_lr >= 0 && attenuation_lr >= 0 && backscatter_lr >= 0 && opacity_lr >= 0 && scaling_lr >= 0 &&
              rotation_lr >= 0,
          "learning rates must be non-negative");
  require(densification_interval > 0 && opacity_reset_interval > 0, "intervals must be positive");
  require(densify_from >= 0 && densify_from <= densify_until, "densify_from must not exceed densify_until");
  require(densify_grad_threshold > 0 && min_opacity >= 0 && min_opacity < 1, "densify thresholds out of range");
  require(percent_dense > 0, "percent_dense must be positive");
  require(lambda1 >= 0 && lambda1 <= 1 && lambda2 >= 0, "loss weights out of range");
  require(refit_period > 0 && checkpoint_interval > 0, "periods must be positive");
  require(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && epsilon > 0, "Adam constants out of range");
}

std::string OptimConfig::to_json() const {
  json j;
  OptimConfig copy = *this;
  for_each_config_field(copy, [&](const char* key, auto& value) { j[key] = value; });
  return j.dump(2) + "\n";
}

OptimConfig OptimConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw DataError("config: expected a JSON object");
  OptimConfig c;
  std::size_t used = 0;
  for_each_config_field(c, [&](const char* key, auto& value) {
    if (!j.contains(key)) return;
    ++used;
    try {
      j.at(key).get_to(value);
    } catch (const json::exception&) {
      throw DataError(std::string("config: bad value for ") + key);
    }
  });
  if (used != j.size()) {
    for (const auto& [key, _] : j.items()) {
      bool known = false;
      for_each_config_field(c, [&](const char* k, auto&) { known = known || key == k; });
      if (!known) throw UsageError("config: unknown key " + key);
    }
  }
  c.validate();
  return c;
}

OptimConfig OptimConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

double position_lr(const OptimConfig& cfg, int iteration) {
  const double t = std::clamp(static_cast<double>(iteration) / cfg.position_lr_max_steps, 0.0, 1.0);
  const double lr = std::exp(std::log(cfg.position_lr_init) * (1.0 - t) + std::log(cfg.position_lr_final) * t);
  double ramp = 1.0;
  if (cfg.position_lr_delay_steps > 0) {
    const double u = std::clamp(static_cast<double>(iteration) / cfg.position_lr_delay_steps, 0.0, 1.0);
    ramp = cfg.position_lr_delay_mult +
           (1.0 - cfg.position_lr_delay_mult) * std::sin(0.5 * std::numbers::pi * u);
  }
  return lr * ramp;
}

void adam_update(double& param, double& m, double& v, double grad, double lr, std::uint64_t step, double beta1,
                 double beta2, double eps) {
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad * grad;
  const double m_hat = m / (1.0 - std::pow(beta1, static_cast<double>(step)));
  const double v_hat = v / (1.0 - std::pow(beta2, static_cast<double>(step)));
  param -= lr * m_hat / (std::sqrt(v_hat) + eps);
}

bool adam_step(TrainState& st, const GradientBuffer& grads, const OptimConfig& cfg, double pos_lr,
               double spatial_lr_scale) {
  const std::size_t n = st.cloud.size();
  if (grads.gaussians.size() != n || st.moment1.size() != n || st.moment2.size() != n) {
    throw DataError("adam_step: gradient buffer does not match the cloud");
  }
  const int coeffs = sh_coeff_count(st.cloud.sh_degree);
  if (!grads.medium.attenuation.allFinite() || !grads.medium.veiling_light.allFinite() ||
      !grads.medium.backscatter.allFinite()) {
    return false;
  }
  for (const auto& g : grads.gaussians) {
    if (!gaussian_finite(g, coeffs)) return false;
  }

  const std::uint64_t t = ++st.adam_steps;
  const std::array<double, 6> lr = {pos_lr * spatial_lr_scale, cfg.scaling_lr, cfg.rotation_lr,
                                    cfg.opacity_lr,            cfg.feature_lr, cfg.feature_lr / 20.0};
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < count; ++i) {
    Gaussian& p = st.cloud.gaussians[i];
    for_each_scalar(p, st.moment1[i], st.moment2[i], grads.gaussians[i], coeffs,
                    [&](double& param, double& m, double& v, double g, int group) {
                      adam_update(param, m, v, g, lr[group], t, cfg.beta1, cfg.beta2, cfg.epsilon);
                    });
    const double norm = p.rotation.norm();
    if (norm > 0.0) {
      p.rotation /= norm;
    } else {
      p.rotation = Vec4(1.0, 0.0, 0.0, 0.0);
    }
  }

  MediumParams& md = st.medium;
  for (int c = 0; c < 3; ++c) {
    adam_update(md.attenuation[c], st.medium_moment1.attenuation[c], st.medium_moment2.attenuation[c],
                grads.medium.attenuation[c], cfg.attenuation_lr, t, cfg.beta1, cfg.beta2, cfg.epsilon);
    adam_update(md.veiling_light[c], st.medium_moment1.veiling_light[c], st.medium_moment2.veiling_light[c],
                grads.medium.veiling_light[c], cfg.backscatter_lr, t, cfg.beta1, cfg.beta2, cfg.epsilon);
    adam_update(md.backscatter[c], st.medium_moment1.backscatter[c], st.medium_moment2.backscatter[c],
                grads.medium.backscatter[c], cfg.backscatter_lr, t, cfg.beta1, cfg.beta2, cfg.epsilon);
  }
  md.clamp();
  return true;
}

void accumulate_densify_stats(TrainState& st, const GradientBuffer& grads) {
  for (std::size_t i = 0; i < st.cloud.size(); ++i) {
    if (!grads.visible[i]) continue;
    st.grad_accum[i] += grads.mean2d_norm[i];
    ++st.grad_count[i];
  }
}

DensifyReport densify_and_prune(TrainState& st, const OptimConfig& cfg, double scene_extent,
                                std::mt19937_64& rng) {
  DensifyReport report;
  const std::size_t n = st.cloud.size();
  const double size_gate = cfg.percent_dense * scene_extent;
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<Gaussian> kept, kept_m1, kept_m2, added;
  kept.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Gaussian& g = st.cloud.gaussians[i];
    const double mean_grad = st.grad_count[i] ? st.grad_accum[i] / st.grad_count[i] : 0.0;
    const bool hot = mean_grad > cfg.densify_grad_threshold;
    const double max_scale = g.log_scale.array().exp().maxCoeff();
    if (hot && max_scale < size_gate) {
      added.push_back(g);
      ++report.cloned;
    } else if (hot) {
      const Mat3 r = rotation_matrix(g.rotation);
      const Vec3 scale = g.log_scale.array().exp();
      for (int s = 0; s < 2; ++s) {
        Gaussian child = g;
        const Vec3 offset(normal(rng) * scale[0], normal(rng) * scale[1], normal(rng) * scale[2]);
        child.position = g.position + r * offset;
        child.log_scale = (scale / 1.6).array().log();
        added.push_back(child);
      }
      ++report.split;
      continue;
    }
    kept.push_back(g);
    kept_m1.push_back(st.moment1[i]);
    kept_m2.push_back(st.moment2[i]);
  }
  for (const auto& g : added) {
    kept.push_back(g);
    kept_m1.push_back(Gaussian::zero());
    kept_m2.push_back(Gaussian::zero());
  }

  std::vector<std::uint8_t> alive(kept.size(), 1);
  std::size_t survivors = 0;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    alive[i] = opacity(kept[i]) >= cfg.min_opacity;
    survivors += alive[i];
  }
  if (survivors == 0) {
    report.prune_skipped = true;
    std::fill(alive.begin(), alive.end(), 1);
  }

  GaussianCloud& cloud = st.cloud;
  cloud.gaussians.clear();
  st.moment1.clear();
  st.moment2.clear();
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (!alive[i]) {
      ++report.pruned;
      continue;
    }
    cloud.gaussians.push_back(kept[i]);
    st.moment1.push_back(kept_m1[i]);
    st.moment2.push_back(kept_m2[i]);
  }
  st.grad_accum.assign(cloud.size(), 0.0);
  st.grad_count.assign(cloud.size(), 0);
  if (report.cloned || report.split || report.pruned) ++cloud.generation;
  return report;
}

void reset_opacity(TrainState& st) {
  const double reset = logit(0.01);
  for (std::size_t i = 0; i < st.cloud.size(); ++i) {
    st.cloud.gaussians[i].opacity_logit = reset;
    st.moment1[i].opacity_logit = 0.0;
    st.moment2[i].opacity_logit = 0.0;
  }
}

}  // namespace splash
