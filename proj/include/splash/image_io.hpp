#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "splash/image.hpp"

namespace splash {

// PFM: float32, "PF" (RGB) or "Pf" (gray), rows stored bottom-to-top.
// Written little-endian (negative scale); both byte orders are read.
void write_pfm(const std::filesystem::path& path, const LinearImage& image);
void write_pfm(const std::filesystem::path& path, const Raster<1>& image);
LinearImage read_pfm_rgb(const std::filesystem::path& path);
Raster<1> read_pfm_gray(const std::filesystem::path& path);

// PNG: 8-bit RGB, values are treated as linear (no gamma applied either way).
void write_png(const std::filesystem::path& path, const LinearImage& image);
LinearImage read_png(const std::filesystem::path& path);

/// Writes a grayscale PNG, normalizing [lo, hi] to [0, 255].
void write_png_gray(const std::filesystem::path& path, const Raster<1>& image, double lo, double hi);

/// Loads .pfm or .png by extension.
LinearImage read_image(const std::filesystem::path& path);
DepthMap read_depth(const std::filesystem::path& path, DepthUnits units);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
/// Write to a sibling temp file, then rename over the destination.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace splash
