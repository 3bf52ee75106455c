#include "splash/dataset.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "splash/image_io.hpp"

namespace splash {
namespace {

using nlohmann::json;

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void require_file(const std::filesystem::path& root, const std::string& rel) {
  if (!std::filesystem::is_regular_file(root / rel)) throw DataError("missing dataset file " + rel);
}

}  // namespace

Camera DatasetManifest::camera(std::size_t view) const {
  Camera c;
  c.width = width;
  c.height = height;
  c.fx = fx;
  c.fy = fy;
  c.cx = cx;
  c.cy = cy;
  c.near_plane = near_plane;
  c.far_plane = far_plane;
  c.rotation = views.at(view).rotation;
  c.translation = views.at(view).translation;
  return c;
}

std::string DatasetManifest::to_json() const {
  json j;
  j["color_space"] = color_space;
  j["intrinsics"] = {{"width", width},          {"height", height}, {"fx", fx}, {"fy", fy}, {"cx", cx},
                     {"cy", cy},                {"near", near_plane},         {"far", far_plane}};
  json views_json = json::array();
  for (const auto& v : views) {
    json e;
    e["image"] = v.image;
    if (v.depth) e["depth"] = *v.depth;
    std::vector<double> r(9);
    for (int i = 0; i < 9; ++i) r[i] = v.rotation(i / 3, i % 3);
    e["rotation"] = r;
    e["translation"] = {v.translation.x(), v.translation.y(), v.translation.z()};
    views_json.push_back(e);
  }
  j["views"] = views_json;
  if (points) j["points"] = *points;
  if (truth) j["truth"] = *truth;
  return j.dump(2) + "\n";
}

DatasetManifest DatasetManifest::from_json(const std::string& text) {
  DatasetManifest m;
  try {
    const json j = json::parse(text);
    m.color_space = j.value("color_space", std::string("linear"));
    const json& in = j.at("intrinsics");
    m.width = in.at("width").get<int>();
    m.height = in.at("height").get<int>();
    m.fx = in.at("fx").get<double>();
    m.fy = in.at("fy").get<double>();
    m.cx = in.at("cx").get<double>();
    m.cy = in.at("cy").get<double>();
    m.near_plane = in.value("near", 0.01);
    m.far_plane = in.value("far", 100.0);
    for (const auto& e : j.at("views")) {
      ViewRecord v;
      v.image = e.at("image").get<std::string>();
      if (e.contains("depth")) v.depth = e.at("depth").get<std::string>();
      const auto r = e.at("rotation").get<std::vector<double>>();
      const auto t = e.at("translation").get<std::vector<double>>();
      if (r.size() != 9 || t.size() != 3) throw DataError("manifest: bad pose for " + v.image);
      for (int i = 0; i < 9; ++i) v.rotation(i / 3, i % 3) = r[i];
      v.translation = Vec3(t[0], t[1], t[2]);
      m.views.push_back(std::move(v));
    }
    if (j.contains("points")) m.points = j.at("points").get<std::string>();
    if (j.contains("truth")) m.truth = j.at("truth").get<std::string>();
  } catch (const json::exception& e) {
    throw DataError(std::string("manifest: ") + e.what());
  }
  if (m.color_space != "linear") throw DataError("manifest: color space must be linear, got " + m.color_space);
  if (m.views.empty()) throw DataError("manifest: no views");
  m.camera(0).validate();
  return m;
}

void write_manifest(const std::filesystem::path& dir, const DatasetManifest& manifest) {
  write_text_atomic(dir / kManifestName, manifest.to_json());
}

DatasetManifest read_manifest(const std::filesystem::path& dir) {
  DatasetManifest m = DatasetManifest::from_json(slurp(dir / kManifestName));
  for (const auto& v : m.views) {
    require_file(dir, v.image);
    if (v.depth) require_file(dir, *v.depth);
  }
  if (m.points) require_file(dir, *m.points);
  return m;
}

std::vector<SeedPoint> read_points(const std::filesystem::path& path) {
  std::istringstream in(slurp(path));
  std::vector<SeedPoint> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    SeedPoint p;
    if (!(ls >> p.position.x() >> p.position.y() >> p.position.z() >> p.color.x() >> p.color.y() >>
          p.color.z())) {
      throw DataError("points: malformed line in " + path.string());
    }
    out.push_back(p);
  }
  return out;
}

void write_points(const std::filesystem::path& path, const std::vector<SeedPoint>& points) {
  std::ostringstream os;
  os << "# x y z r g b\n" << std::setprecision(17);
  for (const auto& p : points) {
    os << p.position.x() << ' ' << p.position.y() << ' ' << p.position.z() << ' ' << p.color.x() << ' '
       << p.color.y() << ' ' << p.color.z() << '\n';
  }
  write_text_atomic(path, os.str());
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset d;
  d.root = dir;
  d.manifest = read_manifest(dir);
  for (std::size_t i = 0; i < d.manifest.views.size(); ++i) {
    const ViewRecord& v = d.manifest.views[i];
    d.cameras.push_back(d.manifest.camera(i));
    LinearImage img = read_image(dir / v.image);
    if (!img.same_shape(d.manifest.width, d.manifest.height)) {
      throw DataError("dataset: " + v.image + " does not match the intrinsics");
    }
    d.images.push_back(std::move(img));
    if (v.depth) {
      DepthMap z = read_depth(dir / *v.depth, DepthUnits::kRaw);
      if (!z.same_shape(d.manifest.width, d.manifest.height)) {
        throw DataError("dataset: " + *v.depth + " does not match the intrinsics");
      }
      d.depths.emplace_back(std::move(z));
    } else {
      d.depths.emplace_back(std::nullopt);
    }
  }
  if (d.manifest.points) d.points = read_points(dir / *d.manifest.points);
  return d;
}

Split split_dataset(std::size_t view_count) {
  if (view_count == 0) throw DataError("split_dataset: no images");
  Split s;
  for (std::size_t i = 0; i < view_count; ++i) (i % 8 == 0 ? s.test : s.train).push_back(i);
  if (s.train.size() < 2) throw DataError("split_dataset: fewer than two training views");
  return s;
}

}  // namespace splash
