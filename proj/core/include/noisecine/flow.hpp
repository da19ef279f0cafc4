#pragma once

#include <filesystem>
#include <limits>
#include <vector>

#include "noisecine/field.hpp"

namespace noisecine {

/// Period value marking constant-velocity motion.
inline constexpr double kConstantVelocity = std::numeric_limits<double>::infinity();

/// Motion law of one image pixel.
///
/// direction is in radians, counterclockwise as seen on screen (0 = right, pi/2 = up).
/// Constant velocity (period = inf): displacement(t) = t * amplitude * u.
/// Periodic: displacement(t) = amplitude * sin(2 pi t / period + phase) * u,
/// with u = (cos direction, sin direction) in the y-up frame.
struct MotionPrimitive {
    double direction = 0.0;
    double amplitude = 0.0;
    double period = kConstantVelocity;
    double phase = 0.0;

    bool constant_velocity() const noexcept { return period == kConstantVelocity; }
};

/// Calibration of the flow-map colour encoding.
struct FlowCalibration {
    double max_velocity = 4.0;   // image px / frame at full saturation, white pixels
    double max_amplitude = 8.0;  // image px at full saturation, periodic pixels
    double period_min = 8.0;     // frames, value 0
    double period_max = 32.0;    // frames, value 1
    double white_threshold = 0.95;

    void validate() const;
};

class FlowField {
public:
    FlowField() = default;
    FlowField(std::size_t height, std::size_t width, MotionPrimitive fill = {});

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }

    MotionPrimitive& operator()(std::size_t y, std::size_t x) noexcept { return pixels_[y * width_ + x]; }
    const MotionPrimitive& operator()(std::size_t y, std::size_t x) const noexcept { return pixels_[y * width_ + x]; }

    bool wrap_x = true;
    bool wrap_y = true;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<MotionPrimitive> pixels_;
};

/// Dense per-pixel displacement in image px, +x right, +y down.
struct DisplacementField {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> dx;
    std::vector<double> dy;

    static DisplacementField uniform(std::size_t height, std::size_t width, double dx, double dy);
};

/// HSV decoding: hue -> direction, saturation -> magnitude fraction, value -> period selector.
/// Values at or above the white threshold mean constant velocity (amplitude = s * max_velocity);
/// otherwise period = period_min + v * (period_max - period_min), amplitude = s * max_amplitude.
FlowField parse_flow_map(const ImageField& rgb, const FlowCalibration& calibration);

/// Inverse of parse_flow_map up to 8-bit quantisation. Constant-velocity pixels are rendered
/// at value 1.
ImageField render_flow_map(const FlowField& flow, const FlowCalibration& calibration);

DisplacementField displacement_at(const FlowField& flow, double t);

/// Backward nearest-neighbour warp: out(p) = in(round(p - d(p))). Samples that fall outside
/// the grid on a non-wrapping axis keep the pixel's own value.
template <class Tag>
Field<Tag> warp(const Field<Tag>& x, const DisplacementField& disp, bool wrap_x, bool wrap_y);

inline ImageField warp_image(const ImageField& img, const DisplacementField& disp, bool wrap_x, bool wrap_y)
{
    return warp(img, disp, wrap_x, wrap_y);
}

/// Middlebury .flo files (magic 202021.25, i32 width, i32 height, interleaved f32 u, v).
DisplacementField read_flo(const std::filesystem::path& path);
void write_flo(const std::filesystem::path& path, const DisplacementField& disp);

} // namespace noisecine
