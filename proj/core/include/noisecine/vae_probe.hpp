#pragma once

#include <vector>

#include "noisecine/backend.hpp"

namespace noisecine {

/// Round trip of a cyclically shifted image: decode(roll(encode(image))). The shift is in
/// image px and must be a multiple of the scale factor. With a shift-equivariant autoencoder
/// the result matches roll(decode(encode(image))).
ImageField probe_roll(Backend& backend, const ImageField& image, int dx, int dy);

/// Repeated encode/decode cycles; element 0 is the input, element i is after i cycles.
std::vector<ImageField> probe_idempotency(Backend& backend, const ImageField& image, int cycles);

} // namespace noisecine
