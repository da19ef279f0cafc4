#pragma once

#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "noisecine/error.hpp"

namespace noisecine {

/// Downscale factor between the image grid and the latent grid of the autoencoder.
inline constexpr std::size_t kVaeScale = 8;

struct Shape {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    std::size_t plane() const noexcept { return height * width; }
    std::size_t size() const noexcept { return channels * height * width; }
    bool empty() const noexcept { return channels == 0 || height == 0 || width == 0; }

    friend auto operator<=>(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& shape);

/// Dense real-valued C x H x W field, stored planar (channel-major, then row-major).
///
/// The tag keeps latent-grid fields, image-grid fields and single planes apart at
/// compile time; every field shares the same storage and accessors.
template <class Tag>
class Field {
public:
    Field() = default;

    explicit Field(Shape shape, double fill = 0.0) : shape_(shape)
    {
        check_shape(shape);
        data_.assign(shape.size(), fill);
    }

    Field(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data))
    {
        check_shape(shape);
        if (data_.size() != shape.size()) {
            fail(Errc::shape_mismatch, "field data holds " + std::to_string(data_.size()) +
                                           " values, shape " + to_string(shape) + " needs " +
                                           std::to_string(shape.size()));
        }
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t channels() const noexcept { return shape_.channels; }
    std::size_t height() const noexcept { return shape_.height; }
    std::size_t width() const noexcept { return shape_.width; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t c, std::size_t y, std::size_t x) noexcept
    {
        return data_[(c * shape_.height + y) * shape_.width + x];
    }
    double operator()(std::size_t c, std::size_t y, std::size_t x) const noexcept
    {
        return data_[(c * shape_.height + y) * shape_.width + x];
    }

    std::span<double> channel(std::size_t c) noexcept
    {
        return {data_.data() + c * shape_.plane(), shape_.plane()};
    }
    std::span<const double> channel(std::size_t c) const noexcept
    {
        return {data_.data() + c * shape_.plane(), shape_.plane()};
    }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    bool all_finite() const noexcept
    {
        for (double v : data_) {
            if (!std::isfinite(v)) {
                return false;
            }
        }
        return true;
    }

    friend bool operator==(const Field&, const Field&) = default;

private:
    static void check_shape(const Shape& shape)
    {
        if (shape.empty()) {
            fail(Errc::invalid_shape, "field shape " + to_string(shape) + " has a zero dimension");
        }
    }

    Shape shape_;
    std::vector<double> data_;
};

struct LatentTag {};
struct ImageTag {};
struct PlaneTag {};

/// Latent-grid field (4 channels for SD-class autoencoders).
using LatentField = Field<LatentTag>;
/// Image-grid field; RGB planes with nominal range [0, 255].
using ImageField = Field<ImageTag>;
/// Single-channel image-grid plane (alpha, luminance).
using Plane = Field<PlaneTag>;

/// Binary mask on a 2-D grid.
class Mask {
public:
    Mask() = default;
    Mask(std::size_t height, std::size_t width, bool fill = false);

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }

    bool operator()(std::size_t y, std::size_t x) const noexcept { return bits_[y * width_ + x] != 0; }
    void set(std::size_t y, std::size_t x, bool on = true) noexcept { bits_[y * width_ + x] = on ? 1 : 0; }

    std::size_t count() const noexcept;

    /// Nearest-neighbour upscale by an integer factor (each cell becomes a factor x factor block).
    Mask upscaled(std::size_t factor) const;

    friend bool operator==(const Mask&, const Mask&) = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<std::uint8_t> bits_;
};

/// Non-negative remainder, for cyclic indexing.
inline std::ptrdiff_t wrap_index(std::ptrdiff_t i, std::ptrdiff_t n) noexcept
{
    const std::ptrdiff_t r = i % n;
    return r < 0 ? r + n : r;
}

template <class Tag>
void require_same_shape(const Field<Tag>& a, const Field<Tag>& b, const char* what)
{
    if (a.shape() != b.shape()) {
        fail(Errc::shape_mismatch,
             std::string(what) + ": shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) + " differ");
    }
}

} // namespace noisecine
