#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "splash/backscatter.hpp"
#include "splash/bench.hpp"
#include "splash/checkpoint.hpp"
#include "splash/image_io.hpp"
#include "splash/medium.hpp"
#include "splash/pipeline.hpp"
#include "splash/synthetic.hpp"

namespace fs = std::filesystem;
using namespace splash;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

Vec3 parse_triplet(const std::string& text) {
  Vec3 v;
  char c1 = 0, c2 = 0;
  std::istringstream in(text);
  if (!(in >> v[0] >> c1 >> v[1] >> c2 >> v[2]) || c1 != ',' || c2 != ',') {
    throw UsageError("expected r,g,b but got '" + text + "'");
  }
  return v;
}

std::string format_estimate(const BackscatterEstimate& e) {
  std::ostringstream os;
  os.precision(17);
  const char* ch = "rgb";
  for (int c = 0; c < 3; ++c) os << "B_inf_" << ch[c] << '=' << e.veiling_light[c] << '\n';
  for (int c = 0; c < 3; ++c) os << "B_b_" << ch[c] << '=' << e.backscatter[c] << '\n';
  for (int c = 0; c < 3; ++c) os << "residual_" << ch[c] << '=' << e.residual[c] << '\n';
  os << "dark_pixels=" << e.dark_pixels << '\n';
  os << "flagged=" << (e.flagged ? 1 : 0) << '\n';
  return os.str();
}

// Reads the key=value estimate file written by estimate-bs.
MediumParams read_estimate(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::map<std::string, double> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    try {
      kv[line.substr(0, eq)] = std::stod(line.substr(eq + 1));
    } catch (const std::exception&) {
      throw DataError("estimate: bad value in line '" + line + "'");
    }
  }
  MediumParams m;
  const char* ch = "rgb";
  for (int c = 0; c < 3; ++c) {
    const std::string binf = std::string("B_inf_") + ch[c];
    const std::string bb = std::string("B_b_") + ch[c];
    if (!kv.count(binf) || !kv.count(bb)) throw DataError("estimate: missing " + binf + " or " + bb);
    m.veiling_light[c] = kv[binf];
    m.backscatter[c] = kv[bb];
  }
  return m;
}

void write_any(const fs::path& path, const LinearImage& img) {
  if (path.extension() == ".png") {
    write_png(path, img);
  } else {
    write_pfm(path, img);
  }
}

std::vector<std::size_t> select_views(const Dataset& data, const std::string& which) {
  const Split split = split_dataset(data.size());
  if (which == "test") return split.test;
  if (which == "train") return split.train;
  if (which == "all") {
    std::vector<std::size_t> all(data.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
  throw UsageError("--views must be test, train or all");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Underwater Gaussian splatting: synthesis, training, rendering and restoration"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Write a synthetic underwater dataset");
  SyntheticSpec spec = SyntheticSpec::canonical();
  fs::path gen_out;
  bool zero_medium = false;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", spec.seed, "RNG seed")->capture_default_str();
  gen->add_option("--gaussians", spec.num_gaussians, "Number of Gaussians")->capture_default_str();
  gen->add_option("--poses", spec.num_poses, "Number of camera poses")->capture_default_str();
  gen->add_option("--width", spec.width)->capture_default_str();
  gen->add_option("--height", spec.height)->capture_default_str();
  gen->add_flag("--zero-medium", zero_medium, "Disable the water column");

  // train
  auto* tr = app.add_subcommand("train", "Optimize a scene on a dataset");
  fs::path tr_data, tr_out, tr_config, tr_resume;
  std::uint64_t tr_seed = 0;
  bool tr_quiet = false;
  tr->add_option("--data", tr_data, "Dataset directory")->required();
  tr->add_option("--out", tr_out, "Run directory")->required();
  tr->add_option("--config", tr_config, "JSON config file");
  tr->add_option("--resume", tr_resume, "Checkpoint to continue from");
  tr->add_option("--seed", tr_seed)->capture_default_str();
  tr->add_flag("--quiet", tr_quiet, "No progress output");
  std::map<std::string, std::string> overrides;
  {
    const nlohmann::json defaults = nlohmann::json::parse(OptimConfig{}.to_json());
    for (const auto& [key, value] : defaults.items()) {
      std::string flag = "--" + key;
      std::replace(flag.begin() + 2, flag.end(), '_', '-');
      tr->add_option_function<std::string>(
          flag, [&overrides, key = key](const std::string& v) { overrides[key] = v; },
          "Override config '" + key + "' (default " + value.dump() + ")");
    }
  }

  // render
  auto* rd = app.add_subcommand("render", "Render clean and underwater views from a checkpoint");
  fs::path rd_ckpt, rd_path, rd_data, rd_out;
  int rd_arc = 0;
  rd->add_option("--checkpoint", rd_ckpt)->required();
  rd->add_option("--out", rd_out)->required();
  auto* rd_path_opt = rd->add_option("--path", rd_path, "Camera path JSON");
  auto* rd_data_opt = rd->add_option("--data", rd_data, "Use the poses of a dataset");
  rd->add_option("--arc", rd_arc, "Render an N-pose orbit with the dataset intrinsics instead")->needs(rd_data_opt);
  rd_path_opt->excludes(rd_data_opt);

  // eval
  auto* ev = app.add_subcommand("eval", "PSNR / SSIM of a checkpoint on dataset views");
  fs::path ev_ckpt, ev_data, ev_out;
  std::string ev_views = "test";
  ev->add_option("--checkpoint", ev_ckpt)->required();
  ev->add_option("--data", ev_data)->required();
  ev->add_option("--views", ev_views, "test, train or all")->capture_default_str();
  ev->add_option("--out", ev_out, "Also write the table here");

  // estimate-bs
  auto* es = app.add_subcommand("estimate-bs", "Dark-pixel backscatter estimate from an image and depth map");
  fs::path es_image, es_depth, es_out;
  std::string es_units = "raw";
  BackscatterOptions es_opt;
  es->add_option("--image", es_image)->required();
  es->add_option("--depth", es_depth, "Depth PFM")->required();
  es->add_option("--out", es_out, "key=value output file");
  es->add_option("--depth-units", es_units, "raw or remapped")->capture_default_str();
  es->add_option("--p-dark", es_opt.p_dark)->capture_default_str();
  es->add_option("--edges", es_opt.edges_num)->capture_default_str();
  es->add_option("--intervals", es_opt.intervals_num)->capture_default_str();
  es->add_option("--resized-height", es_opt.resized_height)->capture_default_str();

  // restore
  auto* rs = app.add_subcommand("restore", "Remove the water column from an image");
  fs::path rs_image, rs_depth, rs_out, rs_ckpt, rs_est, rs_mask;
  std::string rs_units = "raw";
  std::string rs_att;
  rs->add_option("--image", rs_image)->required();
  rs->add_option("--depth", rs_depth)->required();
  rs->add_option("--out", rs_out, "Restored image (.pfm or .png)")->required();
  rs->add_option("--depth-units", rs_units, "raw or remapped")->capture_default_str();
  auto* rs_ckpt_opt = rs->add_option("--checkpoint", rs_ckpt, "Medium from a checkpoint");
  auto* rs_est_opt = rs->add_option("--estimate", rs_est, "Medium from an estimate-bs file");
  rs->add_option("--attenuation", rs_att, "B_d as r,g,b when using --estimate (default 0,0,0)");
  rs->add_option("--mask", rs_mask, "Write the saturation mask as PNG");
  rs_ckpt_opt->excludes(rs_est_opt);

  // check-grad
  auto* cg = app.add_subcommand("check-grad", "Finite-difference check of the analytic gradients");
  std::string cg_scene = "canonical";
  std::string cg_mode = "underwater";
  fs::path cg_out;
  cg->add_option("--scene", cg_scene, "Only 'canonical' is available")->capture_default_str();
  cg->add_option("--mode", cg_mode, "underwater or clean")->capture_default_str();
  cg->add_option("--out", cg_out, "Also write the report here");

  // bench
  auto* bn = app.add_subcommand("bench", "Time tiled against naive rendering");
  int bn_n = 500, bn_w = 256, bn_h = 256, bn_reps = 3;
  bn->add_option("--gaussians", bn_n)->capture_default_str();
  bn->add_option("--width", bn_w)->capture_default_str();
  bn->add_option("--height", bn_h)->capture_default_str();
  bn->add_option("--repeats", bn_reps)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  auto parse_units = [](const std::string& s) {
    if (s == "raw") return DepthUnits::kRaw;
    if (s == "remapped") return DepthUnits::kRemapped;
    throw UsageError("--depth-units must be raw or remapped");
  };

  try {
    if (*gen) {
      if (zero_medium) spec.medium = MediumParams{};
      generate_synthetic(spec, gen_out);
      std::cout << "wrote " << spec.num_poses << " views to " << gen_out.string() << "\n";
    } else if (*tr) {
      nlohmann::json cfg = nlohmann::json::parse(tr_config.empty() ? OptimConfig{}.to_json()
                                                                    : OptimConfig::load(tr_config).to_json());
      for (const auto& [key, value] : overrides) {
        try {
          cfg[key] = nlohmann::json::parse(value);
        } catch (const nlohmann::json::exception&) {
          throw UsageError("bad value for --" + key + ": " + value);
        }
      }
      TrainOptions opt;
      opt.config = OptimConfig::from_json(cfg.dump());
      opt.seed = tr_seed;
      opt.out_dir = tr_out;
      if (!tr_quiet) {
        opt.on_iteration = [](const IterationLog& row) {
          if (row.iteration % 100 == 0) {
            std::printf("iter %6d  loss %.5f  l1 %.5f  dssim %.5f  gaussians %zu\n", row.iteration, row.loss.total,
                        row.loss.l1, row.loss.d_ssim, row.num_gaussians);
            std::fflush(stdout);
          }
        };
      }
      const Dataset data = load_dataset(tr_data);
      std::filesystem::create_directories(tr_out);
      write_text_atomic(tr_out / "config.json", opt.config.to_json());
      const TrainResult res = tr_resume.empty() ? train(data, opt) : train(data, opt, read_checkpoint_file(tr_resume));
      std::cout << "trained " << res.log.size() << " iterations, " << res.state.cloud.size() << " gaussians, "
                << res.skipped << " skipped\n";
    } else if (*rd) {
      const TrainState st = read_checkpoint_file(rd_ckpt);
      std::vector<Camera> cams;
      if (!rd_path.empty()) {
        cams = read_camera_path(rd_path);
      } else if (!rd_data.empty()) {
        const DatasetManifest m = read_manifest(rd_data);
        if (rd_arc > 0) {
          const SyntheticSpec s = SyntheticSpec::canonical();
          cams = orbit_path(m.camera(0), Vec3::Zero(), s.arc_radius, s.arc_height, s.arc_degrees, rd_arc);
        } else {
          for (std::size_t i = 0; i < m.views.size(); ++i) cams.push_back(m.camera(i));
        }
      } else {
        throw UsageError("render needs --path or --data");
      }
      const std::size_t n = render_novel(st, cams, rd_out);
      std::cout << "rendered " << n << " poses to " << rd_out.string() << "\n";
    } else if (*ev) {
      const TrainState st = read_checkpoint_file(ev_ckpt);
      const Dataset data = load_dataset(ev_data);
      const EvalReport rep = evaluate(st, data, select_views(data, ev_views));
      std::cout << rep.to_table();
      if (!ev_out.empty()) write_text_atomic(ev_out, rep.to_table());
    } else if (*es) {
      const LinearImage img = read_image(es_image);
      const DepthMap z = read_depth(es_depth, parse_units(es_units));
      const BackscatterEstimate est = estimate_backscatter(img, z, es_opt);
      const std::string text = format_estimate(est);
      std::cout << text;
      if (!es_out.empty()) write_text_atomic(es_out, text);
    } else if (*rs) {
      MediumParams m;
      if (!rs_ckpt.empty()) {
        m = read_checkpoint_file(rs_ckpt).medium;
      } else if (!rs_est.empty()) {
        m = read_estimate(rs_est);
        if (!rs_att.empty()) m.attenuation = parse_triplet(rs_att);
      } else {
        throw UsageError("restore needs --checkpoint or --estimate");
      }
      const LinearImage img = read_image(rs_image);
      DepthMap z = read_depth(rs_depth, parse_units(rs_units));
      if (z.units == DepthUnits::kRaw) z = logistic_remap(z);
      const RestoreResult res = invert_medium(img, z, m);
      write_any(rs_out, res.image);
      if (!rs_mask.empty()) {
        Raster<1> mask(img.width, img.height);
        for (std::size_t i = 0; i < res.saturated.size(); ++i) mask.data[i] = res.saturated[i];
        write_png_gray(rs_mask, mask, 0.0, 1.0);
      }
      std::size_t flagged = 0;
      for (auto f : res.saturated) flagged += f;
      std::cout << "restored " << rs_out.string() << ", " << flagged << " saturated pixels\n";
    } else if (*cg) {
      if (cg_scene != "canonical") throw UsageError("--scene must be canonical");
      RenderMode mode;
      if (cg_mode == "underwater") {
        mode = RenderMode::kUnderwater;
      } else if (cg_mode == "clean") {
        mode = RenderMode::kClean;
      } else {
        throw UsageError("--mode must be underwater or clean");
      }
      const FdReport rep = finite_diff_check(gradient_problem(make_gradient_scene(), mode));
      std::cout << rep.to_table();
      if (!cg_out.empty()) write_text_atomic(cg_out, rep.to_table());
      return rep.max_rel_error < 1e-3 ? kExitOk : kExitNumeric;
    } else if (*bn) {
      std::cout << run_bench(bn_n, bn_w, bn_h, bn_reps).to_text();
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}
