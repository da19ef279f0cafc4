#pragma once

#include <array>
#include <map>
#include <mutex>
#include <optional>

#include "noisecine/backend.hpp"
#include "noisecine/colormap.hpp"

namespace noisecine {

struct MockBackendConfig {
    Shape latent_shape{4, 64, 64};
    std::size_t scale_factor = kVaeScale;
    // Per step, x += blur_mix * (blur3x3(x) - x) + conditioning_pull * (target - x).
    double blur_mix = 0.1;
    double conditioning_pull = 0.05;
    // Test hook: each denoise call adds a call-dependent perturbation, so identical calls disagree.
    bool stochastic = false;
    ColorMap34 colormap = ColorMap34::sd15();
};

/// Deterministic, exactly translation-equivariant stand-in for a latent diffusion model.
///
/// encode: box-downsample by the scale factor, then the pseudo-inverse of the colour map.
/// decode: colour map, then nearest-neighbour upsample. decode(encode(img)) is the block mean.
/// denoise: one circular 3x3 blur/conditioning mixing step per level, so a segment of k
/// levels spreads information by at most k latent cells (the kernel radius).
/// add_noise: sqrt(alpha_bar) * x0 + sqrt(1 - alpha_bar) * n.
class MockBackend final : public Backend {
public:
    explicit MockBackend(MockBackendConfig config = {});

    const MockBackendConfig& config() const noexcept { return config_; }

    BackendCapabilities capabilities() override;
    LatentField encode(const ImageField& image) override;
    ImageField decode(const LatentField& latent) override;
    LatentField add_noise(const LatentField& clean, const LatentField& noise, int level, int total_steps) override;
    LatentField denoise(const LatentField& latent, int from_level, int to_level, int total_steps,
                        ConditioningHandle conditioning) override;
    ConditioningHandle prepare_conditioning(const std::string& prompt, const ImageField* segmap) override;

private:
    struct Conditioning {
        std::vector<double> channel_bias;
        std::optional<LatentField> structure;
    };

    Conditioning lookup(ConditioningHandle handle);

    MockBackendConfig config_;
    std::array<std::array<double, 3>, 4> inverse_{};  // 4x3 pseudo-inverse of the colour weights
    std::mutex mutex_;
    std::map<std::uint64_t, Conditioning> conditionings_;
    std::uint64_t next_handle_ = 1;
    std::uint64_t denoise_calls_ = 0;
};

} // namespace noisecine
