#pragma once

#include <cmath>
#include <vector>

#include "noisecine/field.hpp"

namespace noisecine {

/// Floor applied to a measured std so that ChannelStats always has std > 0.
inline constexpr double kStdEpsilon = 1e-12;

/// Per-channel mean and population standard deviation.
struct ChannelStats {
    std::vector<double> mean;
    std::vector<double> std;
    // Set when at least one channel had zero variance and its std was clamped to kStdEpsilon.
    bool clamped = false;

    std::size_t channels() const noexcept { return mean.size(); }
};

template <class Tag>
ChannelStats measure_stats(const Field<Tag>& x)
{
    if (x.empty()) {
        fail(Errc::invalid_shape, "measure_stats: empty field");
    }
    ChannelStats stats;
    stats.mean.reserve(x.channels());
    stats.std.reserve(x.channels());
    for (std::size_t c = 0; c < x.channels(); ++c) {
        const auto values = x.channel(c);
        double sum = 0.0;
        for (double v : values) {
            sum += v;
        }
        const double mean = sum / static_cast<double>(values.size());
        double sq = 0.0;
        for (double v : values) {
            sq += (v - mean) * (v - mean);
        }
        double sd = std::sqrt(sq / static_cast<double>(values.size()));
        if (!(sd >= kStdEpsilon)) {
            sd = kStdEpsilon;
            stats.clamped = true;
        }
        stats.mean.push_back(mean);
        stats.std.push_back(sd);
    }
    return stats;
}

} // namespace noisecine
