#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "noisecine/field.hpp"

namespace noisecine {

/// Latent dump ("NCLF") layout, all integers and floats little-endian:
///
///     bytes 0..3   magic "NCLF"
///     u32          version (1)
///     u32 C, u32 H, u32 W
///     f32[C*H*W]   values, channel-major then row-major
///
/// Values are narrowed to f32 on write.
inline constexpr std::uint32_t kLatentDumpVersion = 1;

std::string encode_latent(const LatentField& x);
LatentField decode_latent(const std::string& bytes);

void write_latent(const std::filesystem::path& path, const LatentField& x);
LatentField read_latent(const std::filesystem::path& path);

} // namespace noisecine
