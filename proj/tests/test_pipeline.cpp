#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "splash/checkpoint.hpp"
#include "splash/image_io.hpp"
#include "splash/pipeline.hpp"
#include "support.hpp"

using namespace splash;

namespace {

Dataset small_dataset(int poses = 10) {
  SyntheticSpec spec = SyntheticSpec::canonical();
  spec.num_poses = poses;
  spec.num_gaussians = 120;
  spec.width = 32;
  spec.height = 32;
  spec.focal = 35.0;
  return to_dataset(build_synthetic(spec));
}

TrainOptions short_run(int iterations) {
  TrainOptions o;
  o.config.iterations = iterations;
  o.config.position_lr_max_steps = std::max(iterations, 1);
  o.config.densify_from = 20;
  o.config.densify_until = 80;
  o.config.densification_interval = 20;
  o.config.opacity_reset_interval = 100;
  o.config.refit_period = 25;
  o.seed = 3;
  return o;
}

}  // namespace

TEST_CASE("train/test split") {
  Split s = split_dataset(16);
  CHECK(s.test == std::vector<std::size_t>{0, 8});
  CHECK(s.train.size() == 14);
  CHECK(std::find(s.train.begin(), s.train.end(), 0) == s.train.end());
  CHECK(split_dataset(100).test.size() == 13);
  CHECK(split_dataset(100).train.size() == 87);
  CHECK_THROWS_AS(split_dataset(2), DataError);
  CHECK_THROWS_AS(split_dataset(0), DataError);
  CHECK(split_dataset(3).train.size() == 2);
}

TEST_CASE("psnr closed forms") {
  std::mt19937_64 rng(113);
  const LinearImage a = test::random_image(rng, 8, 8);
  CHECK(psnr(a, a) == 99.0);
  CHECK(psnr(LinearImage(8, 8, 0.0), LinearImage(8, 8, 0.5)) == doctest::Approx(-10.0 * std::log10(0.25)));
  CHECK(psnr(LinearImage(8, 8, 0.0), LinearImage(8, 8, 0.5)) == doctest::Approx(6.0206).epsilon(1e-4));
}

TEST_CASE("scene extent") {
  std::vector<Camera> cams{test::axis_camera(8, 8, 5.0), test::axis_camera(8, 8, 5.0)};
  cams[1].translation = Vec3(-2.0, 0.0, 0.0);
  CHECK(scene_extent(cams) == doctest::Approx(1.1));
}

TEST_CASE("zero-iteration run returns the initialization") {
  const Dataset data = small_dataset();
  const TrainResult r = train(data, short_run(0));
  const TrainState init = initialize_state(data, 3);
  CHECK(save_checkpoint(r.state) == save_checkpoint(init));
  CHECK(r.log.empty());
  CHECK(init.medium.attenuation == Vec3::Constant(0.05));
  CHECK(init.medium.backscatter == Vec3::Constant(0.05));
  CHECK(init.medium.veiling_light == Vec3::Constant(0.3));
}

TEST_CASE("training is reproducible, skips test views and improves the fit") {
  const Dataset data = small_dataset();
  std::vector<int> refits;
  TrainOptions opts = short_run(150);
  opts.on_refit = [&](int iter, const BackscatterGuidance&) { refits.push_back(iter); };
  const TrainResult a = train(data, opts);
  const TrainResult b = train(data, short_run(150));

  CHECK(a.csv() == b.csv());
  CHECK(save_checkpoint(a.state) == save_checkpoint(b.state));
  CHECK(a.log.size() == 150);
  CHECK(a.csv().rfind(kTrainLogHeader, 0) == 0);

  // Densification ran and changed the count at least once.
  bool changed = false;
  for (const auto& row : a.log) changed = changed || row.num_gaussians != a.log.front().num_gaussians;
  CHECK(changed);

  CHECK(a.views_used.size() == 150);
  for (std::size_t v : a.views_used) CHECK(v % 8 != 0);
  CHECK(refits == std::vector<int>{25, 50, 75, 100, 125, 150});

  const Split split = split_dataset(data.size());
  const TrainState init = initialize_state(data, 3);
  const double before = evaluate(init, data, split.train).mean_psnr;
  const double after = evaluate(a.state, data, split.train).mean_psnr;
  CHECK(after > before);
  CHECK(a.state.medium.within_bounds());
}

TEST_CASE("resuming continues the iteration count") {
  const Dataset data = small_dataset();
  const TrainResult first = train(data, short_run(30));
  TrainOptions more = short_run(50);
  const TrainResult second = train(data, more, first.state);
  CHECK(second.state.iteration == 50);
  REQUIRE_FALSE(second.log.empty());
  CHECK(second.log.front().iteration == 31);
}

TEST_CASE("evaluation means are the means of the views") {
  const Dataset data = small_dataset();
  const TrainState st = initialize_state(data, 1);
  const EvalReport r = evaluate(st, data, {0, 3, 8});
  REQUIRE(r.views.size() == 3);
  double p = 0.0, s = 0.0;
  for (const auto& v : r.views) {
    p += v.psnr;
    s += v.ssim;
  }
  CHECK(r.mean_psnr == doctest::Approx(p / 3.0).epsilon(1e-14));
  CHECK(r.mean_ssim == doctest::Approx(s / 3.0).epsilon(1e-14));
  CHECK_THROWS_AS(evaluate(st, data, {99}), DataError);
}

TEST_CASE("novel views") {
  const Dataset data = small_dataset();
  TrainState st = initialize_state(data, 1);
  const auto dir = test::temp_dir("novel");

  const std::vector<Camera> path = orbit_path(data.cameras[0], Vec3::Zero(), 5.0, 4.0, 80.0, 30);
  REQUIRE(path.size() == 30);
  CHECK(render_novel(st, path, dir / "arc") == 30);
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "arc")) files += e.is_regular_file();
  CHECK(files == 30 * 5);

  // A training pose reproduces the training-time render.
  render_novel(st, {data.cameras[1]}, dir / "train");
  const RenderOutput ref = render(st.cloud, data.cameras[1], &st.medium, RenderMode::kUnderwater);
  const LinearImage written = read_pfm_rgb(dir / "train" / "underwater_000.pfm");
  for (std::size_t i = 0; i < written.data.size(); ++i) {
    CHECK(written.data[i] == static_cast<double>(static_cast<float>(ref.color.data[i])));
  }

  // Zero medium: clean and underwater outputs agree.
  st.medium.attenuation.setZero();
  st.medium.backscatter.setZero();
  render_novel(st, {data.cameras[2]}, dir / "zero");
  CHECK(read_file_bytes(dir / "zero" / "clean_000.pfm") == read_file_bytes(dir / "zero" / "underwater_000.pfm"));

  write_camera_path(dir / "path.json", path);
  const auto back = read_camera_path(dir / "path.json");
  REQUIRE(back.size() == 30);
  CHECK((back[7].rotation - path[7].rotation).norm() < 1e-12);
  CHECK((back[7].translation - path[7].translation).norm() < 1e-12);
  CHECK_THROWS_AS(read_camera_path(dir / "missing.json"), DataError);
}
