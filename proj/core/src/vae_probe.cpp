#include "noisecine/vae_probe.hpp"

#include "noisecine/crystal.hpp"

namespace noisecine {

ImageField probe_roll(Backend& backend, const ImageField& image, int dx, int dy)
{
    const auto factor = static_cast<int>(backend.capabilities().scale_factor);
    if (dx % factor != 0 || dy % factor != 0) {
        fail(Errc::alignment, "probe_roll: shift (" + std::to_string(dx) + ", " + std::to_string(dy) +
                                  ") is not a multiple of the scale factor " + std::to_string(factor));
    }
    const LatentField z = backend.encode(image);
    return backend.decode(roll(z, LatticeShift{dx / factor, dy / factor, true, true}));
}

std::vector<ImageField> probe_idempotency(Backend& backend, const ImageField& image, int cycles)
{
    if (cycles < 0) {
        fail(Errc::out_of_range, "probe_idempotency: cycle count must be >= 0");
    }
    std::vector<ImageField> out;
    out.reserve(static_cast<std::size_t>(cycles) + 1);
    out.push_back(image);
    for (int i = 0; i < cycles; ++i) {
        out.push_back(backend.decode(backend.encode(out.back())));
    }
    return out;
}

} // namespace noisecine
