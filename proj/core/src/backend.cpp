#include "noisecine/backend.hpp"

#include <array>
#include <cmath>

namespace noisecine {

namespace {

const std::array<double, kTrainTimesteps>& alpha_bar_table()
{
    static const std::array<double, kTrainTimesteps> table = [] {
        std::array<double, kTrainTimesteps> t{};
        const double start = std::sqrt(0.00085);
        const double end = std::sqrt(0.012);
        double cumulative = 1.0;
        for (int i = 0; i < kTrainTimesteps; ++i) {
            const double root = start + (end - start) * i / (kTrainTimesteps - 1);
            cumulative *= 1.0 - root * root;
            t[static_cast<std::size_t>(i)] = cumulative;
        }
        return t;
    }();
    return table;
}

void check_level(int level, int total_steps)
{
    if (total_steps < 1 || total_steps > kTrainTimesteps) {
        fail(Errc::out_of_range, "schedule: total steps " + std::to_string(total_steps) + " outside [1, 1000]");
    }
    if (level < 0 || level > total_steps) {
        fail(Errc::out_of_range, "schedule: level " + std::to_string(level) + " outside [0, " +
                                     std::to_string(total_steps) + "]");
    }
}

} // namespace

void DenoiseSchedule::validate() const
{
    if (steps < 1 || steps > kTrainTimesteps) {
        fail(Errc::out_of_range, "schedule: steps must be in [1, 1000], got " + std::to_string(steps));
    }
    if (!(switch_fraction >= 0.0 && switch_fraction <= 1.0)) {
        fail(Errc::out_of_range, "schedule: switch fraction must be in [0, 1]");
    }
}

int DenoiseSchedule::switch_step() const
{
    validate();
    return static_cast<int>(std::lround(switch_fraction * steps));
}

int DenoiseSchedule::level_for_strength(double strength) const
{
    validate();
    if (!(strength >= 0.0 && strength <= 1.0)) {
        fail(Errc::out_of_range, "strength must be in [0, 1]");
    }
    return static_cast<int>(std::lround(strength * steps));
}

std::vector<int> DenoiseSchedule::timesteps() const
{
    validate();
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(steps));
    for (int level = steps; level >= 1; --level) {
        out.push_back(train_timestep(level, steps));
    }
    return out;
}

int train_timestep(int level, int total_steps)
{
    check_level(level, total_steps);
    if (level == 0) {
        return -1;
    }
    const int stride = kTrainTimesteps / total_steps;
    // With every timestep in use the offset would push the top level past the table.
    const int offset = (total_steps - 1) * stride + 1 < kTrainTimesteps ? 1 : 0;
    return (level - 1) * stride + offset;
}

double alpha_bar(int level, int total_steps)
{
    const int t = train_timestep(level, total_steps);
    return t < 0 ? 1.0 : alpha_bar_table()[static_cast<std::size_t>(t)];
}

OpCounts& OpCounts::operator+=(const OpCounts& other) noexcept
{
    encode += other.encode;
    decode += other.decode;
    add_noise += other.add_noise;
    denoise += other.denoise;
    prepare_conditioning += other.prepare_conditioning;
    return *this;
}

BackendCapabilities CountingBackend::capabilities()
{
    return inner_.capabilities();
}

LatentField CountingBackend::encode(const ImageField& image)
{
    {
        std::lock_guard lock(mutex_);
        ++counts_.encode;
    }
    return inner_.encode(image);
}

ImageField CountingBackend::decode(const LatentField& latent)
{
    {
        std::lock_guard lock(mutex_);
        ++counts_.decode;
    }
    return inner_.decode(latent);
}

LatentField CountingBackend::add_noise(const LatentField& clean, const LatentField& noise, int level, int total_steps)
{
    {
        std::lock_guard lock(mutex_);
        ++counts_.add_noise;
    }
    return inner_.add_noise(clean, noise, level, total_steps);
}

LatentField CountingBackend::denoise(const LatentField& latent, int from_level, int to_level, int total_steps,
                                     ConditioningHandle conditioning)
{
    {
        std::lock_guard lock(mutex_);
        ++counts_.denoise;
        ++segments_[{from_level, to_level}];
    }
    return inner_.denoise(latent, from_level, to_level, total_steps, conditioning);
}

ConditioningHandle CountingBackend::prepare_conditioning(const std::string& prompt, const ImageField* segmap)
{
    {
        std::lock_guard lock(mutex_);
        ++counts_.prepare_conditioning;
    }
    return inner_.prepare_conditioning(prompt, segmap);
}

OpCounts CountingBackend::counts() const
{
    std::lock_guard lock(mutex_);
    return counts_;
}

int CountingBackend::denoise_segment_count(int from_level, int to_level) const
{
    std::lock_guard lock(mutex_);
    const auto it = segments_.find({from_level, to_level});
    return it == segments_.end() ? 0 : it->second;
}

void CountingBackend::reset()
{
    std::lock_guard lock(mutex_);
    counts_ = {};
    segments_.clear();
}

} // namespace noisecine
