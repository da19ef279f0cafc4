#pragma once

#include <filesystem>

#include "noisecine/field.hpp"

namespace noisecine {

/// 8-bit RGB PNG -> ImageField (values 0..255). Grey and palette inputs are expanded to RGB;
/// alpha is dropped.
ImageField read_png(const std::filesystem::path& path);

/// Emits an 8-bit RGB PNG; values are clamped to [0, 255] and rounded half away from zero.
/// A single-channel field is written as grey replicated to RGB.
void write_png(const std::filesystem::path& path, const ImageField& image);

/// 8-bit mask PNG, thresholded at 128 (>= 128 is on).
Mask read_mask_png(const std::filesystem::path& path);

/// Alpha PNG as a [0, 1] plane (grey value / 255).
Plane read_alpha_png(const std::filesystem::path& path);

/// Clamp to [0, 255] and round half away from zero, as done on emission.
ImageField quantize_for_emission(const ImageField& image);

} // namespace noisecine
