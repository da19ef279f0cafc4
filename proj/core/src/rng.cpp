#include "noisecine/rng.hpp"

#include <cmath>
#include <numbers>

namespace noisecine {

namespace {

constexpr double kTwoPow53Inv = 1.0 / 9007199254740992.0;

} // namespace

double NormalSampler::uniform_open_closed()
{
    return (static_cast<double>(engine_() >> 11) + 1.0) * kTwoPow53Inv;
}

double NormalSampler::uniform_closed_open()
{
    return static_cast<double>(engine_() >> 11) * kTwoPow53Inv;
}

double NormalSampler::next()
{
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform_open_closed();
    const double u2 = uniform_closed_open();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
}

std::uint64_t mix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept
{
    return mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : label) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return derive_seed(seed, h);
}

LatentField sample_noise(const SeededNoiseSpec& spec)
{
    return sample_normal<LatentTag>(spec.seed, spec.shape);
}

} // namespace noisecine
