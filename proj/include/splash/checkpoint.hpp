#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "splash/scene.hpp"

namespace splash {

/// Binary checkpoint layout (all fields little-endian):
///
///   "SPLASH01" | u32 version | u32 sh_degree | u64 count | u64 generation
///   | u64 iteration | u64 adam_steps | u8 has_guidance + 7 pad bytes
///   | gaussian block | medium 3x3 | [guidance 2x3] | moment1 block
///   | moment2 block | medium moment1 3x3 | medium moment2 3x3
///   | f64 grad_accum[count] | u32 grad_count[count]
///
/// A gaussian block is contiguous float64 arrays in field order: position
/// (count x 3), log_scale (count x 3), rotation (count x 4), sh (count x
/// coeffs(sh_degree) x 3), opacity_logit (count). Medium blocks are rows
/// attenuation, veiling_light, backscatter; guidance rows are veiling_light,
/// backscatter.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> save_checkpoint(const TrainState& state);

/// Throws DataError on a bad magic, version mismatch or length mismatch.
TrainState load_checkpoint(std::span<const std::uint8_t> bytes);

/// Writes atomically (temp file + rename).
void write_checkpoint_file(const std::filesystem::path& path, const TrainState& state);
TrainState read_checkpoint_file(const std::filesystem::path& path);

}  // namespace splash
