#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "splash/image.hpp"
#include "splash/scene.hpp"

namespace splash {

struct ViewRecord {
  std::string image;                 // relative to the dataset root
  std::optional<std::string> depth;  // raw view-space depth, optional
  Mat3 rotation = Mat3::Identity();  // world -> view
  Vec3 translation = Vec3::Zero();
};

/// Dataset description stored as manifest.json. Paths are relative to the
/// directory holding the manifest.
struct DatasetManifest {
  std::string color_space = "linear";
  int width = 0;
  int height = 0;
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  double near_plane = 0.01;
  double far_plane = 100.0;
  std::vector<ViewRecord> views;
  std::optional<std::string> points;  // "x y z r g b" per line
  std::optional<std::string> truth;   // ground-truth medium for synthetic scenes

  Camera camera(std::size_t view) const;

  std::string to_json() const;
  /// Throws DataError on malformed documents or a non-linear color space.
  static DatasetManifest from_json(const std::string& text);
};

inline constexpr const char* kManifestName = "manifest.json";

void write_manifest(const std::filesystem::path& dir, const DatasetManifest& manifest);
/// Reads and validates: every referenced file must exist.
DatasetManifest read_manifest(const std::filesystem::path& dir);

struct SeedPoint {
  Vec3 position;
  Vec3 color;
};

std::vector<SeedPoint> read_points(const std::filesystem::path& path);
void write_points(const std::filesystem::path& path, const std::vector<SeedPoint>& points);

struct Dataset {
  std::filesystem::path root;
  DatasetManifest manifest;
  std::vector<Camera> cameras;
  std::vector<LinearImage> images;
  std::vector<std::optional<DepthMap>> depths;  // raw units
  std::vector<SeedPoint> points;

  std::size_t size() const { return images.size(); }
};

/// Loads images (and depths when listed); image sizes must match the intrinsics.
Dataset load_dataset(const std::filesystem::path& dir);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Every eighth view (index % 8 == 0) is held out for testing. Needs at least
/// two training views.
Split split_dataset(std::size_t view_count);

}  // namespace splash
