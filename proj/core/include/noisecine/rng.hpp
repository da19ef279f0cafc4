#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "noisecine/field.hpp"

namespace noisecine {

/// Portable standard-normal generator.
///
/// Engine: std::mt19937_64, whose output sequence is fixed by the C++ standard.
/// Uniforms take the top 53 bits of each draw. Normals use the basic Box-Muller
/// transform, emitting the cosine branch first and the sine branch on the next call:
///
///     u1 in (0, 1], u2 in [0, 1)
///     z0 = sqrt(-2 ln u1) cos(2 pi u2),  z1 = sqrt(-2 ln u1) sin(2 pi u2)
class NormalSampler {
public:
    explicit NormalSampler(std::uint64_t seed) : engine_(seed) {}

    double uniform_open_closed();
    double uniform_closed_open();
    double next();

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// SplitMix64 finaliser; used for every seed derivation.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Sub-seed for a numbered stream (e.g. a frame index).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

/// Sub-seed for a named stream (FNV-1a of the label, then mixed).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) noexcept;

struct SeededNoiseSpec {
    std::uint64_t seed = 0;
    Shape shape{4, 64, 64};
};

/// i.i.d. standard-normal field, filled in storage order. Every value is rounded to
/// f32 so the field survives a latent dump bit-exactly.
template <class Tag>
Field<Tag> sample_normal(std::uint64_t seed, Shape shape)
{
    Field<Tag> out(shape);
    NormalSampler sampler(seed);
    for (double& v : out.values()) {
        v = static_cast<double>(static_cast<float>(sampler.next()));
    }
    return out;
}

LatentField sample_noise(const SeededNoiseSpec& spec);

} // namespace noisecine
