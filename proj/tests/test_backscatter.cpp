#include <doctest.h>

#include <cmath>
#include <random>

#include "splash/backscatter.hpp"
#include "splash/medium.hpp"
#include "splash/synthetic.hpp"
#include "support.hpp"

using namespace splash;

namespace {

MediumParams reference_medium() {
  MediumParams m;
  m.attenuation = Vec3(0.6, 0.4, 0.3);
  m.veiling_light = Vec3(0.2, 0.35, 0.5);
  m.backscatter = Vec3(0.8, 1.0, 1.2);
  return m;
}

// Textured scene with one shadowed (black) pixel in every 8x8 block and a
// raw depth ramp from 1 to 40 along x.
struct ShadowScene {
  LinearImage clean;
  DepthMap raw;
};

ShadowScene shadow_scene(std::uint64_t seed, int w, int h) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  ShadowScene s{LinearImage(w, h), DepthMap(w, h, 0.0, DepthUnits::kRaw)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      s.raw.at(x, y) = 1.0 + 39.0 * x / (w - 1);
      const bool shadow = (x % 8) == (y * 3 % 8) && (y % 8) == (x * 5 % 8);
      for (int c = 0; c < 3; ++c) s.clean.at(x, y, c) = shadow ? 0.0 : u(rng);
    }
  }
  return s;
}

}  // namespace

TEST_CASE("linspace") {
  const auto v = linspace(0.0, 1.0, 5);
  REQUIRE(v.size() == 5);
  CHECK(v[0] == 0.0);
  CHECK(v[2] == 0.5);
  CHECK(v[4] == 1.0);
  CHECK_THROWS_AS(linspace(0.0, 1.0, 1), UsageError);
}

TEST_CASE("cluster_range conventions") {
  DepthMap constant(4, 4, 0.3);
  const auto edges = linspace(0.0, 1.0, 10);
  const ClusterLabels c = cluster_range(constant, edges);
  CHECK(c.degenerate);
  for (int l : c.labels) CHECK(l == 0);

  DepthMap at_edges(10, 1);
  for (int k = 0; k < 10; ++k) at_edges.at(k, 0) = edges[k];
  const ClusterLabels e = cluster_range(at_edges, edges);
  CHECK_FALSE(e.degenerate);
  for (int k = 0; k < 9; ++k) CHECK(e.labels[k] == k);
  CHECK(e.labels[9] == 8);

  const std::vector<double> bad{0.0, 0.5, 0.5};
  CHECK_THROWS_AS(cluster_range(at_edges, bad), UsageError);
}

TEST_CASE("cluster_range agrees with a direct interval search") {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> u(-0.1, 1.1);
  DepthMap z(40, 30);
  for (double& v : z.data) v = u(rng);
  const auto edges = linspace(0.0, 1.0, 10);
  const ClusterLabels c = cluster_range(z, edges);
  for (std::size_t i = 0; i < z.data.size(); ++i) {
    int expected = -1;
    for (int k = 0; k < 9; ++k) {
      const bool last = k == 8;
      if (z.data[i] >= edges[k] && (z.data[i] < edges[k + 1] || (last && z.data[i] <= edges[k + 1]))) expected = k;
    }
    CHECK(c.labels[i] == expected);
  }
}

TEST_CASE("dark pixel selection on a uniform image") {
  LinearImage img(50, 20, 0.5);
  DepthMap z(50, 20);
  for (int y = 0; y < 20; ++y) {
    for (int x = 0; x < 50; ++x) z.at(x, y) = x / 49.0;
  }
  // 10 edges give 9 clusters over the 50 columns.
  const auto edges = linspace(0.0, 1.0, 10);
  const ClusterLabels labels = cluster_range(z, edges);
  std::vector<std::size_t> size(9, 0), first(9, SIZE_MAX);
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    ++size[labels.labels[i]];
    first[labels.labels[i]] = std::min(first[labels.labels[i]], i);
  }
  const DarkPixelSet dark = select_dark_pixels(img, z, 0.01, 10);
  std::size_t expected = 0;
  for (std::size_t s : size) expected += static_cast<std::size_t>(std::ceil(0.01 * s));
  CHECK(dark.size() == expected);
  // Raster order picks the first pixel of each cluster.
  CHECK(dark.depth[0] == z.data[first[0]]);
}

TEST_CASE("one black pixel per cluster is selected") {
  std::mt19937_64 rng(67);
  LinearImage img = test::random_image(rng, 90, 10, 0.3, 1.0);
  DepthMap z(90, 10);
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 90; ++x) z.at(x, y) = x / 89.0;
  }
  std::vector<double> black_depths;
  for (int k = 0; k < 9; ++k) {
    const int x = 10 * k + 3;
    for (int c = 0; c < 3; ++c) img.at(x, 4, c) = 0.0;
    black_depths.push_back(z.at(x, 4));
  }
  const DarkPixelSet dark = select_dark_pixels(img, z, 0.001, 10);
  REQUIRE(dark.size() == 9);
  for (std::size_t i = 0; i < 9; ++i) {
    CHECK(dark.color[i] == Vec3::Zero());
    CHECK(dark.depth[i] == black_depths[i]);
  }
}

TEST_CASE("selected dark pixels sit on the backscatter curve") {
  const ShadowScene s = shadow_scene(71, 160, 120);
  const MediumParams m = reference_medium();
  const DepthMap z = logistic_remap(s.raw);
  const LinearImage observed = apply_medium(s.clean, z, m);
  const DarkPixelSet dark = select_dark_pixels(observed, z, 0.01, 10);
  REQUIRE(dark.size() > 0);
  for (std::size_t i = 0; i < dark.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const double curve = m.veiling_light[c] * (1.0 - std::exp(-m.backscatter[c] * dark.depth[i]));
      CHECK(dark.color[i][c] >= curve - 1e-12);
      CHECK(dark.color[i][c] <= 1.05 * curve + 1e-12);
    }
  }
}

TEST_CASE("saturating exponential fits") {
  std::vector<double> z, y;
  for (int i = 0; i < 30; ++i) {
    z.push_back(0.02 + 0.03 * i);
    y.push_back(0.4 * (1.0 - std::exp(-1.5 * z.back())));
  }
  ExpFit f = fit_saturating_exponential(z, y);
  CHECK(std::abs(f.b_inf - 0.4) < 1e-4);
  CHECK(std::abs(f.b_b - 1.5) < 1e-4);
  CHECK_FALSE(f.flagged);

  const std::vector<double> zeros(z.size(), 0.0);
  f = fit_saturating_exponential(z, zeros);
  CHECK(f.b_inf == 0.0);
  CHECK(f.b_b == 0.0);
  CHECK(f.residual == 0.0);

  for (std::size_t i = 0; i < z.size(); ++i) y[i] = 0.4 * (1.0 - std::exp(-6.0 * z[i]));
  f = fit_saturating_exponential(z, y);
  CHECK(f.b_b == 5.0);
  CHECK(f.residual > 0.0);

  const std::vector<double> same_z(5, 0.5), vals{0.1, 0.2, 0.3, 0.2, 0.2};
  f = fit_saturating_exponential(same_z, vals);
  CHECK(f.flagged);
  CHECK(f.b_inf == doctest::Approx(0.2));
  CHECK(f.b_b == 5.0);

  CHECK_THROWS_AS(fit_saturating_exponential(same_z, y), DataError);
}

TEST_CASE("estimator recovers the medium of a shadowed texture") {
  const ShadowScene s = shadow_scene(73, 200, 150);
  const MediumParams m = reference_medium();
  const LinearImage observed = apply_medium(s.clean, logistic_remap(s.raw), m);
  const BackscatterEstimate e = estimate_backscatter(observed, s.raw);
  for (int c = 0; c < 3; ++c) {
    CHECK(std::abs(e.veiling_light[c] - m.veiling_light[c]) <= 0.05);
    CHECK(std::abs(e.backscatter[c] - m.backscatter[c]) <= 0.15);
  }
  CHECK_FALSE(e.flagged);
}

TEST_CASE("zero medium gives no veiling light") {
  const ShadowScene s = shadow_scene(77, 120, 90);
  const BackscatterEstimate single = estimate_backscatter(s.clean, s.raw);
  for (int c = 0; c < 3; ++c) CHECK(single.veiling_light[c] <= 0.02);

  SyntheticSpec spec = SyntheticSpec::canonical();
  spec.medium = MediumParams{};
  const SyntheticScene scene = build_synthetic(spec);
  const BackscatterEstimate pooled = estimate_backscatter(std::span<const LinearImage>(scene.observed),
                                                          std::span<const DepthMap>(scene.depth));
  for (int c = 0; c < 3; ++c) CHECK(pooled.veiling_light[c] <= 0.02);
}

TEST_CASE("estimate is unchanged by pre-resizing") {
  const ShadowScene s = shadow_scene(79, 600, 400);
  const LinearImage observed = apply_medium(s.clean, logistic_remap(s.raw), reference_medium());
  const BackscatterEstimate full = estimate_backscatter(observed, s.raw);
  const BackscatterEstimate small =
      estimate_backscatter(resize_bilinear(observed, 450, 300), resize_nearest(s.raw, 450, 300));
  CHECK(full.veiling_light == small.veiling_light);
  CHECK(full.backscatter == small.backscatter);
  CHECK(full.residual == small.residual);

  const BackscatterEstimate again = estimate_backscatter(observed, s.raw);
  CHECK(again.veiling_light == full.veiling_light);
  CHECK(again.backscatter == full.backscatter);
}

TEST_CASE("estimates stay in their boxes") {
  std::mt19937_64 rng(83);
  for (int trial = 0; trial < 10; ++trial) {
    const LinearImage img = test::random_image(rng, 40, 30, -0.2, 1.2);
    DepthMap z(40, 30, 0.0, DepthUnits::kRaw);
    std::uniform_real_distribution<double> u(0.0, 50.0);
    for (double& v : z.data) v = u(rng);
    const BackscatterEstimate e = estimate_backscatter(img, z);
    for (int c = 0; c < 3; ++c) {
      CHECK(e.veiling_light[c] >= 0.0);
      CHECK(e.veiling_light[c] <= 1.0);
      CHECK(e.backscatter[c] >= 0.0);
      CHECK(e.backscatter[c] <= 5.0);
      CHECK(std::isfinite(e.residual[c]));
    }
  }
}
