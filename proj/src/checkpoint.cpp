#include "splash/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>

#include "splash/image_io.hpp"

namespace splash {
namespace {

constexpr std::string_view kMagic = "SPLASH01";

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void vec(const auto& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
  }
  void raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw DataError("checkpoint: truncated (need " + std::to_string(pos_ + n) + " bytes, have " +
                      std::to_string(bytes_.size()) + ")");
    }
  }
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  void vec(auto& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = f64();
  }
  std::string_view raw(std::size_t n) {
    need(n);
    std::string_view s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::size_t gaussian_block_bytes(std::size_t count, int sh_degree) {
  return count * 8 * (3 + 3 + 4 + 3 * static_cast<std::size_t>(sh_coeff_count(sh_degree)) + 1);
}

void write_gaussians(Writer& w, const std::vector<Gaussian>& gs, int sh_degree) {
  const int coeffs = sh_coeff_count(sh_degree);
  for (const auto& g : gs) w.vec(g.position);
  for (const auto& g : gs) w.vec(g.log_scale);
  for (const auto& g : gs) w.vec(g.rotation);
  for (const auto& g : gs) {
    for (int k = 0; k < coeffs; ++k) w.vec(g.sh[k]);
  }
  for (const auto& g : gs) w.f64(g.opacity_logit);
}

std::vector<Gaussian> read_gaussians(Reader& r, std::size_t count, int sh_degree) {
  const int coeffs = sh_coeff_count(sh_degree);
  std::vector<Gaussian> gs(count, Gaussian::zero());
  for (auto& g : gs) r.vec(g.position);
  for (auto& g : gs) r.vec(g.log_scale);
  for (auto& g : gs) r.vec(g.rotation);
  for (auto& g : gs) {
    for (int k = 0; k < coeffs; ++k) r.vec(g.sh[k]);
  }
  for (auto& g : gs) g.opacity_logit = r.f64();
  return gs;
}

void write_medium(Writer& w, const Vec3& a, const Vec3& b, const Vec3& c) {
  w.vec(a);
  w.vec(b);
  w.vec(c);
}

}  // namespace

std::vector<std::uint8_t> save_checkpoint(const TrainState& state) {
  if (!state.consistent()) {
    throw DataError("checkpoint: optimizer state is not co-indexed with the cloud");
  }
  const auto& cloud = state.cloud;
  Writer w;
  w.raw(kMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(cloud.sh_degree));
  w.u64(cloud.size());
  w.u64(cloud.generation);
  w.u64(state.iteration);
  w.u64(state.adam_steps);
  w.u8(state.medium.guidance.has_value() ? 1 : 0);
  for (int i = 0; i < 7; ++i) w.u8(0);

  write_gaussians(w, cloud.gaussians, cloud.sh_degree);
  const auto& m = state.medium;
  write_medium(w, m.attenuation, m.veiling_light, m.backscatter);
  if (m.guidance) {
    w.vec(m.guidance->veiling_light);
    w.vec(m.guidance->backscatter);
  }
  write_gaussians(w, state.moment1, cloud.sh_degree);
  write_gaussians(w, state.moment2, cloud.sh_degree);
  for (const auto* mm : {&state.medium_moment1, &state.medium_moment2}) {
    write_medium(w, mm->attenuation, mm->veiling_light, mm->backscatter);
  }
  for (double v : state.grad_accum) w.f64(v);
  for (std::uint32_t v : state.grad_count) w.u32(v);
  return w.take();
}

TrainState load_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.raw(kMagic.size()) != kMagic) {
    throw DataError("checkpoint: bad magic");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint32_t sh_degree = r.u32();
  if (sh_degree > static_cast<std::uint32_t>(kMaxShDegree)) {
    throw DataError("checkpoint: invalid sh degree");
  }
  const std::uint64_t count = r.u64();
  const std::uint64_t generation = r.u64();
  const std::uint64_t iteration = r.u64();
  const std::uint64_t adam_steps = r.u64();
  const bool has_guidance = r.u8() != 0;
  r.raw(7);

  const int degree = static_cast<int>(sh_degree);
  const std::size_t expected = 3 * gaussian_block_bytes(count, degree) + 3 * 9 * 8 +
                               (has_guidance ? 6 * 8 : 0) + count * (8 + 4);
  if (count > bytes.size() || r.remaining() != expected) {
    throw DataError("checkpoint: length mismatch (expected " + std::to_string(expected) +
                    " payload bytes, found " + std::to_string(r.remaining()) + ")");
  }

  TrainState s;
  s.cloud.sh_degree = degree;
  s.cloud.generation = generation;
  s.iteration = iteration;
  s.adam_steps = adam_steps;
  s.cloud.gaussians = read_gaussians(r, count, degree);
  auto& m = s.medium;
  r.vec(m.attenuation);
  r.vec(m.veiling_light);
  r.vec(m.backscatter);
  if (has_guidance) {
    BackscatterGuidance g;
    r.vec(g.veiling_light);
    r.vec(g.backscatter);
    m.guidance = g;
  }
  s.moment1 = read_gaussians(r, count, degree);
  s.moment2 = read_gaussians(r, count, degree);
  for (auto* mm : {&s.medium_moment1, &s.medium_moment2}) {
    r.vec(mm->attenuation);
    r.vec(mm->veiling_light);
    r.vec(mm->backscatter);
  }
  s.grad_accum.resize(count);
  for (auto& v : s.grad_accum) v = r.f64();
  s.grad_count.resize(count);
  for (auto& v : s.grad_count) v = r.u32();
  return s;
}

void write_checkpoint_file(const std::filesystem::path& path, const TrainState& state) {
  write_file_atomic(path, save_checkpoint(state));
}

TrainState read_checkpoint_file(const std::filesystem::path& path) {
  return load_checkpoint(read_file_bytes(path));
}

}  // namespace splash
