#include "splash/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include <png.h>

namespace splash {
namespace {

template <int C>
std::vector<std::uint8_t> encode_pfm(const Raster<C>& image) {
  std::ostringstream header;
  header << (C == 3 ? "PF" : "Pf") << '\n' << image.width << ' ' << image.height << "\n-1.0\n";
  const std::string h = header.str();
  std::vector<std::uint8_t> out(h.begin(), h.end());
  out.reserve(out.size() + image.size() * 4);
  for (int y = image.height - 1; y >= 0; --y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < C; ++c) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(image.at(x, y, c)));
        for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
      }
    }
  }
  return out;
}

std::string next_token(const std::vector<std::uint8_t>& bytes, std::size_t& pos) {
  while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
  std::string tok;
  while (pos < bytes.size() && !std::isspace(bytes[pos])) tok.push_back(static_cast<char>(bytes[pos++]));
  return tok;
}

template <int C>
Raster<C> decode_pfm(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  std::size_t pos = 0;
  const std::string magic = next_token(bytes, pos);
  if (magic != (C == 3 ? "PF" : "Pf")) {
    throw DataError("pfm: unexpected header '" + magic + "' in " + path.string());
  }
  int w = 0, h = 0;
  double scale = 0.0;
  try {
    w = std::stoi(next_token(bytes, pos));
    h = std::stoi(next_token(bytes, pos));
    scale = std::stod(next_token(bytes, pos));
  } catch (const std::exception&) {
    throw DataError("pfm: malformed header in " + path.string());
  }
  ++pos;  // single whitespace byte after the scale
  if (w <= 0 || h <= 0 || scale == 0.0) {
    throw DataError("pfm: invalid dimensions in " + path.string());
  }
  const bool little = scale < 0.0;
  const std::size_t need = static_cast<std::size_t>(w) * h * C * 4;
  if (bytes.size() < pos + need) {
    throw DataError("pfm: truncated pixel data in " + path.string());
  }
  Raster<C> image(w, h);
  for (int y = h - 1; y >= 0; --y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < C; ++c) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) {
          const int shift = little ? 8 * b : 8 * (3 - b);
          bits |= static_cast<std::uint32_t>(bytes[pos++]) << shift;
        }
        image.at(x, y, c) = std::bit_cast<float>(bits);
      }
    }
  }
  return image;
}

struct PngFile {
  FILE* fp = nullptr;
  ~PngFile() {
    if (fp) std::fclose(fp);
  }
};

void write_png_bytes(const std::filesystem::path& path, int width, int height, int channels,
                     const std::vector<std::uint8_t>& pixels) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    PngFile file;
    file.fp = std::fopen(tmp.c_str(), "wb");
    if (!file.fp) throw DataError("png: cannot open " + tmp.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
      png_destroy_write_struct(&png, &info);
      throw DataError("png: allocation failure");
    }
    if (setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, &info);
      throw DataError("png: write failed for " + path.string());
    }
    png_init_io(png, file.fp);
    png_set_IHDR(png, info, width, height, 8, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    // Fixed compression settings keep the output byte-identical across runs.
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y) {
      png_write_row(png, const_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(y) * width * channels));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
  }
  std::filesystem::rename(tmp, path);
}

std::uint8_t quantize(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

}  // namespace

void write_pfm(const std::filesystem::path& path, const LinearImage& image) {
  write_file_atomic(path, encode_pfm(image));
}

void write_pfm(const std::filesystem::path& path, const Raster<1>& image) {
  write_file_atomic(path, encode_pfm(image));
}

LinearImage read_pfm_rgb(const std::filesystem::path& path) { return decode_pfm<3>(path); }
Raster<1> read_pfm_gray(const std::filesystem::path& path) { return decode_pfm<1>(path); }

void write_png(const std::filesystem::path& path, const LinearImage& image) {
  std::vector<std::uint8_t> px(image.size());
  std::transform(image.data.begin(), image.data.end(), px.begin(), quantize);
  write_png_bytes(path, image.width, image.height, 3, px);
}

void write_png_gray(const std::filesystem::path& path, const Raster<1>& image, double lo, double hi) {
  std::vector<std::uint8_t> px(image.size());
  const double span = hi > lo ? hi - lo : 1.0;
  std::transform(image.data.begin(), image.data.end(), px.begin(),
                 [&](double v) { return quantize((v - lo) / span); });
  write_png_bytes(path, image.width, image.height, 1, px);
}

LinearImage read_png(const std::filesystem::path& path) {
  PngFile file;
  file.fp = std::fopen(path.c_str(), "rb");
  if (!file.fp) throw DataError("png: cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("png: allocation failure");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("png: decode failed for " + path.string());
  }
  png_init_io(png, file.fp);
  png_read_info(png, info);
  png_set_strip_16(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  png_set_gray_to_rgb(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  std::vector<std::uint8_t> row(rowbytes);
  LinearImage image(w, h);
  for (int y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) image.at(x, y, c) = row[static_cast<std::size_t>(x) * 3 + c] / 255.0;
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

LinearImage read_image(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".pfm") return read_pfm_rgb(path);
  if (ext == ".png") return read_png(path);
  throw DataError("unsupported image format: " + path.string());
}

DepthMap read_depth(const std::filesystem::path& path, DepthUnits units) {
  Raster<1> r = read_pfm_gray(path);
  DepthMap d;
  d.width = r.width;
  d.height = r.height;
  d.data = std::move(r.data);
  d.units = units;
  return d;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace splash
