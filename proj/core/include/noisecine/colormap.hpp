#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>

#include "noisecine/field.hpp"

namespace noisecine {

/// Affine latent -> RGB map: rgb = weights * latent + biases, on the 0..255 scale.
struct ColorMap34 {
    std::array<std::array<double, 4>, 3> weights{};
    std::array<double, 3> biases{};

    /// Regression of the Stable Diffusion v1.5 autoencoder's colour behaviour.
    static ColorMap34 sd15();

    friend bool operator==(const ColorMap34&, const ColorMap34&) = default;
};

/// Per latent pixel colour, no upscaling. Values are not clamped; clamping happens when
/// the image is emitted.
ImageField apply_colormap(const LatentField& x, const ColorMap34& map);

/// Mean over each factor x factor block.
ImageField box_downsample(const ImageField& image, std::size_t factor);

struct ColormapSample {
    LatentField latent;
    ImageField image;  // already at latent resolution
};

/// Least-squares fit over every pixel of every pair, solved in closed form from the
/// centred normal equations.
ColorMap34 fit_colormap(std::span<const ColormapSample> pairs);

std::string colormap_to_json(const ColorMap34& map);
ColorMap34 colormap_from_json(std::string_view text);

} // namespace noisecine
