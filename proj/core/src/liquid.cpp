#include "noisecine/liquid.hpp"

#include <algorithm>
#include <cmath>

namespace noisecine {

void VarianceReductionSpec::validate() const
{
    if (!(switch_fraction >= 0.0 && switch_fraction <= 1.0)) {
        fail(Errc::out_of_range, "variance reduction: switch fraction must be in [0, 1]");
    }
    if (!(beta >= 0.0)) {
        fail(Errc::out_of_range, "variance reduction: beta must be >= 0");
    }
    if (!(floor > 0.0 && floor <= 1.0)) {
        fail(Errc::out_of_range, "variance reduction: floor must be in (0, 1]");
    }
}

double VarianceReductionSpec::scale() const
{
    validate();
    return std::max(floor, 1.0 - beta * (1.0 - switch_fraction));
}

ReducedLatent reduce_variance(const LatentField& x, const VarianceReductionSpec& spec)
{
    const double scale = spec.scale();
    ReducedLatent out{x, measure_stats(x)};
    if (scale == 1.0) {
        return out;
    }
    for (std::size_t c = 0; c < x.channels(); ++c) {
        const double mean = out.original.mean[c];
        for (double& v : out.field.channel(c)) {
            v = mean + (v - mean) * scale;
        }
    }
    return out;
}

LatentField match_stats(const LatentField& x, const ChannelStats& target)
{
    if (target.channels() != x.channels() || target.std.size() != x.channels()) {
        fail(Errc::shape_mismatch, "match_stats: target has " + std::to_string(target.channels()) +
                                       " channels, field has " + std::to_string(x.channels()));
    }
    const ChannelStats current = measure_stats(x);
    LatentField out = x;
    for (std::size_t c = 0; c < x.channels(); ++c) {
        if (!(target.std[c] > 0.0)) {
            fail(Errc::out_of_range, "match_stats: target std of channel " + std::to_string(c) + " is not positive");
        }
        if (current.std[c] <= kStdEpsilon) {
            fail(Errc::degenerate, "match_stats: channel " + std::to_string(c) + " has no variance to rescale");
        }
        const double mean = current.mean[c];
        const double gain = target.std[c] / current.std[c];
        auto values = out.channel(c);
        for (double& v : values) {
            v = mean + (v - mean) * gain;
        }
        // Shift using the mean measured after the rescale.
        double sum = 0.0;
        for (double v : values) {
            sum += v;
        }
        const double offset = target.mean[c] - sum / static_cast<double>(values.size());
        for (double& v : values) {
            v += offset;
        }
    }
    return out;
}

LatentField adjust_kurtosis(const LatentField& x, const KurtosisSpec& spec)
{
    if (!(spec.delta > 0.0)) {
        fail(Errc::out_of_range, "adjust_kurtosis: delta must be > 0");
    }
    if (!spec.enabled) {
        return x;
    }
    LatentField out = x;
    for (double& v : out.values()) {
        v = std::sinh(spec.delta * std::asinh(v));
    }
    return out;
}

} // namespace noisecine
