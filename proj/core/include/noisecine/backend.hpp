#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "noisecine/field.hpp"

namespace noisecine {

/// Denoising schedule shared by every pipeline.
///
/// Positions in the schedule are "levels": the number of denoising steps still to run.
/// Level `steps` is pure noise and level 0 is a finished latent. The switch point is reached
/// after round(switch_fraction * steps) steps, i.e. at level steps - switch_step().
struct DenoiseSchedule {
    int steps = 30;
    double switch_fraction = 0.7;

    void validate() const;

    int switch_step() const;
    int switch_level() const { return steps - switch_step(); }

    /// Start level for img2img-style operations: round(strength * steps).
    int level_for_strength(double strength) const;

    /// Training timestep used at each level, highest level first (strictly decreasing).
    std::vector<int> timesteps() const;
};

inline constexpr int kTrainTimesteps = 1000;

/// Training timestep for a level (level 0 has none and returns -1). DDIM "leading" spacing
/// with offset 1, as used by Stable Diffusion v1.5 (offset 0 when all 1000 steps are used).
int train_timestep(int level, int total_steps);

/// Cumulative signal fraction at a level: 1 at level 0, otherwise the scaled-linear
/// beta schedule (0.00085 .. 0.012 over 1000 steps) evaluated at train_timestep().
double alpha_bar(int level, int total_steps);

/// Opaque token minted by a backend for prepared prompt/segmap conditioning.
struct ConditioningHandle {
    std::uint64_t id = 0;
    friend auto operator<=>(const ConditioningHandle&, const ConditioningHandle&) = default;
};

struct BackendCapabilities {
    bool deterministic = true;
    bool concurrency_safe = false;
    Shape latent_shape{4, 64, 64};
    std::size_t scale_factor = kVaeScale;
};

/// Denoiser + autoencoder contract every pipeline is written against.
///
/// All operations are deterministic for a conforming backend, and denoise(x, a, a, c) == x.
class Backend {
public:
    virtual ~Backend() = default;

    virtual BackendCapabilities capabilities() = 0;
    virtual LatentField encode(const ImageField& image) = 0;
    virtual ImageField decode(const LatentField& latent) = 0;
    virtual LatentField add_noise(const LatentField& clean, const LatentField& noise, int level, int total_steps) = 0;
    virtual LatentField denoise(const LatentField& latent, int from_level, int to_level, int total_steps,
                                ConditioningHandle conditioning) = 0;
    virtual ConditioningHandle prepare_conditioning(const std::string& prompt, const ImageField* segmap) = 0;
};

struct OpCounts {
    int encode = 0;
    int decode = 0;
    int add_noise = 0;
    int denoise = 0;
    int prepare_conditioning = 0;

    int total() const noexcept { return encode + decode + add_noise + denoise + prepare_conditioning; }
    OpCounts& operator+=(const OpCounts& other) noexcept;
    friend bool operator==(const OpCounts&, const OpCounts&) = default;
};

/// Decorator that forwards to another backend and records every call, including a
/// histogram of denoise segments keyed by (from_level, to_level).
class CountingBackend final : public Backend {
public:
    explicit CountingBackend(Backend& inner) : inner_(inner) {}

    BackendCapabilities capabilities() override;
    LatentField encode(const ImageField& image) override;
    ImageField decode(const LatentField& latent) override;
    LatentField add_noise(const LatentField& clean, const LatentField& noise, int level, int total_steps) override;
    LatentField denoise(const LatentField& latent, int from_level, int to_level, int total_steps,
                        ConditioningHandle conditioning) override;
    ConditioningHandle prepare_conditioning(const std::string& prompt, const ImageField* segmap) override;

    OpCounts counts() const;
    int denoise_segment_count(int from_level, int to_level) const;
    void reset();

private:
    Backend& inner_;
    mutable std::mutex mutex_;
    OpCounts counts_;
    std::map<std::pair<int, int>, int> segments_;
};

} // namespace noisecine
