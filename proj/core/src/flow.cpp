#include "noisecine/flow.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>

namespace noisecine {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr float kFloMagic = 202021.25f;

struct Hsv {
    double hue;  // radians in [0, 2 pi)
    double saturation;
    double value;
};

Hsv rgb_to_hsv(double r, double g, double b)
{
    const double hi = std::max({r, g, b});
    const double lo = std::min({r, g, b});
    const double delta = hi - lo;
    Hsv hsv{0.0, hi > 0.0 ? delta / hi : 0.0, hi};
    if (delta <= 0.0) {
        return hsv;
    }
    double sextant;
    if (hi == r) {
        sextant = std::fmod((g - b) / delta, 6.0);
        if (sextant < 0.0) {
            sextant += 6.0;
        }
    } else if (hi == g) {
        sextant = (b - r) / delta + 2.0;
    } else {
        sextant = (r - g) / delta + 4.0;
    }
    hsv.hue = sextant * (std::numbers::pi / 3.0);
    return hsv;
}

void hsv_to_rgb(double hue, double s, double v, double rgb[3])
{
    double h = std::fmod(hue, kTwoPi);
    if (h < 0.0) {
        h += kTwoPi;
    }
    const double sextant = h / (std::numbers::pi / 3.0);
    const double chroma = v * s;
    const double x = chroma * (1.0 - std::fabs(std::fmod(sextant, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(sextant) % 6) {
    case 0: r = chroma; g = x; break;
    case 1: r = x; g = chroma; break;
    case 2: g = chroma; b = x; break;
    case 3: g = x; b = chroma; break;
    case 4: r = x; b = chroma; break;
    default: r = chroma; b = x; break;
    }
    const double m = v - chroma;
    rgb[0] = r + m;
    rgb[1] = g + m;
    rgb[2] = b + m;
}

template <class T>
void put_le(std::ofstream& out, T value)
{
    const auto bits = std::bit_cast<std::uint32_t>(value);
    char bytes[4];
    for (int i = 0; i < 4; ++i) {
        bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
    }
    out.write(bytes, 4);
}

std::uint32_t get_le(std::ifstream& in, const std::filesystem::path& path)
{
    unsigned char bytes[4];
    if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
        fail(Errc::truncated, path.string() + ": flow file truncated");
    }
    return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
           (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

} // namespace

void FlowCalibration::validate() const
{
    if (!(max_velocity > 0.0) || !(max_amplitude > 0.0)) {
        fail(Errc::out_of_range, "flow calibration: max_velocity and max_amplitude must be positive");
    }
    if (!(period_min > 0.0) || !(period_max >= period_min)) {
        fail(Errc::out_of_range, "flow calibration: need 0 < period_min <= period_max");
    }
    if (!(white_threshold > 0.0 && white_threshold <= 1.0)) {
        fail(Errc::out_of_range, "flow calibration: white_threshold must be in (0, 1]");
    }
}

FlowField::FlowField(std::size_t height, std::size_t width, MotionPrimitive fill)
    : height_(height), width_(width), pixels_(height * width, fill)
{
    if (height == 0 || width == 0) {
        fail(Errc::invalid_shape, "flow field has a zero dimension");
    }
}

DisplacementField DisplacementField::uniform(std::size_t height, std::size_t width, double dx, double dy)
{
    return DisplacementField{height, width, std::vector<double>(height * width, dx),
                             std::vector<double>(height * width, dy)};
}

FlowField parse_flow_map(const ImageField& rgb, const FlowCalibration& cal)
{
    if (rgb.channels() != 3) {
        fail(Errc::bad_format, "parse_flow_map: expected an RGB image, got " + to_string(rgb.shape()));
    }
    cal.validate();
    FlowField flow(rgb.height(), rgb.width());
    for (std::size_t y = 0; y < rgb.height(); ++y) {
        for (std::size_t x = 0; x < rgb.width(); ++x) {
            const Hsv hsv = rgb_to_hsv(rgb(0, y, x) / 255.0, rgb(1, y, x) / 255.0, rgb(2, y, x) / 255.0);
            MotionPrimitive& m = flow(y, x);
            m.direction = hsv.hue;
            if (hsv.value >= cal.white_threshold) {
                m.period = kConstantVelocity;
                m.amplitude = hsv.saturation * cal.max_velocity;
            } else {
                m.period = cal.period_min + hsv.value * (cal.period_max - cal.period_min);
                m.amplitude = hsv.saturation * cal.max_amplitude;
            }
        }
    }
    return flow;
}

ImageField render_flow_map(const FlowField& flow, const FlowCalibration& cal)
{
    cal.validate();
    ImageField out(Shape{3, flow.height(), flow.width()});
    for (std::size_t y = 0; y < flow.height(); ++y) {
        for (std::size_t x = 0; x < flow.width(); ++x) {
            const MotionPrimitive& m = flow(y, x);
            double s;
            double v;
            if (m.constant_velocity()) {
                s = m.amplitude / cal.max_velocity;
                v = 1.0;
            } else {
                s = m.amplitude / cal.max_amplitude;
                const double span = cal.period_max - cal.period_min;
                v = span > 0.0 ? (m.period - cal.period_min) / span : 0.0;
                v = std::clamp(v, 0.0, cal.white_threshold - 1.0 / 255.0);
            }
            double rgb[3];
            hsv_to_rgb(m.direction, std::clamp(s, 0.0, 1.0), v, rgb);
            for (std::size_t c = 0; c < 3; ++c) {
                out(c, y, x) = std::round(rgb[c] * 255.0);
            }
        }
    }
    return out;
}

DisplacementField displacement_at(const FlowField& flow, double t)
{
    DisplacementField d{flow.height(), flow.width(), std::vector<double>(flow.height() * flow.width()),
                        std::vector<double>(flow.height() * flow.width())};
    for (std::size_t y = 0; y < flow.height(); ++y) {
        for (std::size_t x = 0; x < flow.width(); ++x) {
            const MotionPrimitive& m = flow(y, x);
            double magnitude;
            if (m.constant_velocity()) {
                magnitude = t * m.amplitude;
            } else {
                // Reducing t modulo the period first keeps the law exactly periodic.
                magnitude = m.amplitude * std::sin(kTwoPi * std::fmod(t, m.period) / m.period + m.phase);
            }
            const std::size_t i = y * flow.width() + x;
            d.dx[i] = magnitude * std::cos(m.direction);
            d.dy[i] = -magnitude * std::sin(m.direction);
        }
    }
    return d;
}

template <class Tag>
Field<Tag> warp(const Field<Tag>& x, const DisplacementField& disp, bool wrap_x, bool wrap_y)
{
    if (disp.height != x.height() || disp.width != x.width() || disp.dx.size() != x.height() * x.width() ||
        disp.dy.size() != disp.dx.size()) {
        fail(Errc::shape_mismatch, "warp: displacement " + std::to_string(disp.height) + "x" +
                                       std::to_string(disp.width) + " does not match field " + to_string(x.shape()));
    }
    const auto h = static_cast<std::ptrdiff_t>(x.height());
    const auto w = static_cast<std::ptrdiff_t>(x.width());
    std::vector<std::size_t> source(x.height() * x.width());
    for (std::ptrdiff_t y = 0; y < h; ++y) {
        for (std::ptrdiff_t xx = 0; xx < w; ++xx) {
            const std::size_t i = static_cast<std::size_t>(y * w + xx);
            std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(std::lround(static_cast<double>(y) - disp.dy[i]));
            std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(std::lround(static_cast<double>(xx) - disp.dx[i]));
            bool inside = true;
            if (wrap_y) {
                sy = wrap_index(sy, h);
            } else if (sy < 0 || sy >= h) {
                inside = false;
            }
            if (wrap_x) {
                sx = wrap_index(sx, w);
            } else if (sx < 0 || sx >= w) {
                inside = false;
            }
            source[i] = inside ? static_cast<std::size_t>(sy * w + sx) : i;
        }
    }
    Field<Tag> out(x.shape());
    for (std::size_t c = 0; c < x.channels(); ++c) {
        const auto in = x.channel(c);
        auto dst = out.channel(c);
        for (std::size_t i = 0; i < source.size(); ++i) {
            dst[i] = in[source[i]];
        }
    }
    return out;
}

template Field<LatentTag> warp<LatentTag>(const Field<LatentTag>&, const DisplacementField&, bool, bool);
template Field<ImageTag> warp<ImageTag>(const Field<ImageTag>&, const DisplacementField&, bool, bool);
template Field<PlaneTag> warp<PlaneTag>(const Field<PlaneTag>&, const DisplacementField&, bool, bool);

DisplacementField read_flo(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(Errc::io, "cannot open " + path.string());
    }
    if (std::bit_cast<float>(get_le(in, path)) != kFloMagic) {
        fail(Errc::bad_magic, path.string() + ": not a .flo file");
    }
    const auto width = static_cast<std::int32_t>(get_le(in, path));
    const auto height = static_cast<std::int32_t>(get_le(in, path));
    if (width <= 0 || height <= 0) {
        fail(Errc::invalid_shape, path.string() + ": bad flow dimensions");
    }
    const std::uintmax_t needed = 12 + 8 * static_cast<std::uintmax_t>(width) * static_cast<std::uintmax_t>(height);
    if (std::filesystem::file_size(path) < needed) {
        fail(Errc::truncated, path.string() + ": flow file shorter than its " + std::to_string(width) + "x" +
                                  std::to_string(height) + " header claims");
    }
    DisplacementField d = DisplacementField::uniform(static_cast<std::size_t>(height),
                                                     static_cast<std::size_t>(width), 0.0, 0.0);
    for (std::size_t i = 0; i < d.dx.size(); ++i) {
        d.dx[i] = std::bit_cast<float>(get_le(in, path));
        d.dy[i] = std::bit_cast<float>(get_le(in, path));
    }
    return d;
}

void write_flo(const std::filesystem::path& path, const DisplacementField& disp)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        fail(Errc::io, "cannot open " + path.string() + " for writing");
    }
    put_le(out, kFloMagic);
    put_le(out, static_cast<std::int32_t>(disp.width));
    put_le(out, static_cast<std::int32_t>(disp.height));
    for (std::size_t i = 0; i < disp.dx.size(); ++i) {
        put_le(out, static_cast<float>(disp.dx[i]));
        put_le(out, static_cast<float>(disp.dy[i]));
    }
    if (!out) {
        fail(Errc::io, "write failed: " + path.string());
    }
}

} // namespace noisecine
