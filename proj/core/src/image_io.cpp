#include "noisecine/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

namespace noisecine {

namespace {

struct DecodedPng {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<png_byte> pixels;
};

DecodedPng decode_png(const std::filesystem::path& path, png_uint_32 format, std::size_t components)
{
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str())) {
        const std::string reason = image.message;
        png_image_free(&image);
        if (!std::filesystem::exists(path)) {
            fail(Errc::io, "cannot open " + path.string());
        }
        fail(Errc::bad_format, path.string() + ": " + reason);
    }
    image.format = format;
    DecodedPng out;
    out.height = image.height;
    out.width = image.width;
    out.pixels.resize(out.height * out.width * components);
    if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
        const std::string reason = image.message;
        png_image_free(&image);
        fail(Errc::bad_format, path.string() + ": " + reason);
    }
    return out;
}

std::uint8_t to_byte(double v)
{
    if (!(v > 0.0)) {
        return 0;
    }
    if (v >= 255.0) {
        return 255;
    }
    return static_cast<std::uint8_t>(std::lround(v));
}

} // namespace

ImageField read_png(const std::filesystem::path& path)
{
    // Read with alpha so libpng does not composite onto black, then drop it.
    const DecodedPng png = decode_png(path, PNG_FORMAT_RGBA, 4);
    ImageField out(Shape{3, png.height, png.width});
    for (std::size_t y = 0; y < png.height; ++y) {
        for (std::size_t x = 0; x < png.width; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                out(c, y, x) = png.pixels[(y * png.width + x) * 4 + c];
            }
        }
    }
    return out;
}

void write_png(const std::filesystem::path& path, const ImageField& image)
{
    if (image.channels() != 3 && image.channels() != 1) {
        fail(Errc::invalid_shape, "write_png: expected 1 or 3 channels, got " + to_string(image.shape()));
    }
    std::vector<png_byte> pixels(image.height() * image.width() * 3);
    for (std::size_t y = 0; y < image.height(); ++y) {
        for (std::size_t x = 0; x < image.width(); ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                const std::size_t src = image.channels() == 3 ? c : 0;
                pixels[(y * image.width() + x) * 3 + c] = to_byte(image(src, y, x));
            }
        }
    }
    png_image png;
    std::memset(&png, 0, sizeof(png));
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width());
    png.height = static_cast<png_uint_32>(image.height());
    png.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&png, path.c_str(), 0, pixels.data(), 0, nullptr)) {
        const std::string reason = png.message;
        png_image_free(&png);
        fail(Errc::io, "cannot write " + path.string() + ": " + reason);
    }
}

Mask read_mask_png(const std::filesystem::path& path)
{
    const DecodedPng png = decode_png(path, PNG_FORMAT_GRAY, 1);
    Mask mask(png.height, png.width);
    for (std::size_t y = 0; y < png.height; ++y) {
        for (std::size_t x = 0; x < png.width; ++x) {
            mask.set(y, x, png.pixels[y * png.width + x] >= 128);
        }
    }
    return mask;
}

Plane read_alpha_png(const std::filesystem::path& path)
{
    const DecodedPng png = decode_png(path, PNG_FORMAT_GRAY, 1);
    Plane alpha(Shape{1, png.height, png.width});
    for (std::size_t i = 0; i < png.pixels.size(); ++i) {
        alpha.values()[i] = png.pixels[i] / 255.0;
    }
    return alpha;
}

ImageField quantize_for_emission(const ImageField& image)
{
    ImageField out = image;
    for (double& v : out.values()) {
        v = to_byte(v);
    }
    return out;
}

} // namespace noisecine
