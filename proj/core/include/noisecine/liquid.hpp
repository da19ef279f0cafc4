#pragma once

#include <cstdint>

#include "noisecine/field.hpp"
#include "noisecine/flow.hpp"
#include "noisecine/rng.hpp"
#include "noisecine/stats.hpp"

namespace noisecine {

/// Contrast reduction applied to a partially denoised latent before decoding.
/// scale = max(floor, 1 - beta * (1 - switch_fraction)).
struct VarianceReductionSpec {
    double switch_fraction = 0.7;
    double beta = 0.5;
    double floor = 0.7;

    void validate() const;
    double scale() const;
};

struct ReducedLatent {
    LatentField field;
    ChannelStats original;
};

/// Records channel stats, then scales each channel about its mean by spec.scale().
ReducedLatent reduce_variance(const LatentField& x, const VarianceReductionSpec& spec);

/// Per channel: rescale about the current mean to the target std, then shift to the target
/// mean. The std is fixed before the mean.
LatentField match_stats(const LatentField& x, const ChannelStats& target);

/// Sinh-arcsinh tail adjustment x -> sinh(delta * asinh(x)). delta > 1 fattens tails.
struct KurtosisSpec {
    double delta = 1.0;
    bool enabled = false;
};

LatentField adjust_kurtosis(const LatentField& x, const KurtosisSpec& spec);

/// x + strength * n with n ~ N(0, 1) drawn from `seed`, matching x's shape.
template <class Tag>
Field<Tag> inject_noise(const Field<Tag>& x, std::uint64_t seed, double strength)
{
    if (!(strength >= 0.0)) {
        fail(Errc::out_of_range, "inject_noise: strength must be >= 0");
    }
    if (strength == 0.0) {
        return x;
    }
    const Field<Tag> noise = sample_normal<Tag>(seed, x.shape());
    Field<Tag> out = x;
    auto dst = out.values();
    const auto src = noise.values();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] += strength * src[i];
    }
    return out;
}

} // namespace noisecine
