#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "noisecine/field.hpp"

namespace noisecine {

/// Number of frames an X-T slice may span; longer videos are truncated.
inline constexpr std::size_t kMaxSliceFrames = 16;

/// Gradient magnitudes below this are treated as flat and ignored.
inline constexpr double kEdgeMagnitudeThreshold = 1e-6;

/// Space-time slab: one image row stacked over time, earliest frame first.
class XTSlice {
public:
    XTSlice() = default;
    XTSlice(std::size_t frames, std::size_t width, std::vector<double> data);

    std::size_t frames() const noexcept { return frames_; }
    std::size_t width() const noexcept { return width_; }

    double operator()(std::size_t t, std::size_t x) const noexcept { return data_[t * width_ + x]; }
    double& operator()(std::size_t t, std::size_t x) noexcept { return data_[t * width_ + x]; }

    const std::vector<double>& data() const noexcept { return data_; }

private:
    std::size_t frames_ = 0;
    std::size_t width_ = 0;
    std::vector<double> data_;
};

struct SliceExtraction {
    std::vector<XTSlice> slices;
    std::size_t frames_available = 0;
    bool truncated = false;
};

/// Stacks the Rec.601 luminance of each requested row across the first 16 frames.
SliceExtraction extract_slices(std::span<const ImageField> frames, std::span<const std::size_t> rows);

struct SliceScore {
    double roughness = 0.0;
    double smoothness = 1.0;
};

/// Forward-folded edge direction per interior time row, weighted by Sobel magnitude.
/// Exposed for diagnostics and montages; the score is built from this sequence.
std::vector<double> slice_directions(const XTSlice& slice);

/// Roughness is the population std of the second difference of the unwrapped per-row edge
/// direction; smoothness = exp(-roughness).
SliceScore slice_smoothness(const XTSlice& slice);

struct SmoothnessReport {
    std::vector<std::size_t> rows;
    std::vector<std::optional<SliceScore>> slices;  // nullopt: degenerate slice, skipped
    double mean_smoothness = 0.0;
    std::size_t frames_used = 0;
    bool truncated = false;
    std::vector<std::string> warnings;
};

std::vector<std::size_t> evenly_spaced_rows(std::size_t height, std::size_t count);

SmoothnessReport video_smoothness(std::span<const ImageField> frames, std::size_t row_count = 5);
SmoothnessReport video_smoothness(std::span<const ImageField> frames, std::span<const std::size_t> rows);

/// Slices stacked vertically (time downwards) with a one-pixel separator, as a grey image.
ImageField slice_montage(std::span<const XTSlice> slices);

} // namespace noisecine
