#include "noisecine/field.hpp"

#include <algorithm>

namespace noisecine {

std::string to_string(const Shape& shape)
{
    return std::to_string(shape.channels) + "x" + std::to_string(shape.height) + "x" + std::to_string(shape.width);
}

Mask::Mask(std::size_t height, std::size_t width, bool fill)
    : height_(height), width_(width), bits_(height * width, fill ? 1 : 0)
{
    if (height == 0 || width == 0) {
        fail(Errc::invalid_shape, "mask has a zero dimension");
    }
}

std::size_t Mask::count() const noexcept
{
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

Mask Mask::upscaled(std::size_t factor) const
{
    Mask out(height_ * factor, width_ * factor);
    for (std::size_t y = 0; y < out.height_; ++y) {
        for (std::size_t x = 0; x < out.width_; ++x) {
            out.bits_[y * out.width_ + x] = bits_[(y / factor) * width_ + x / factor];
        }
    }
    return out;
}

} // namespace noisecine
