#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "noisecine/backend.hpp"
#include "noisecine/crystal.hpp"
#include "noisecine/flow.hpp"
#include "noisecine/liquid.hpp"

namespace noisecine {

/// Inputs shared by the prompt-driven pipelines.
struct Scene {
    std::uint64_t seed = 0;
    std::string prompt;
    std::optional<ImageField> segmap;   // image-grid structural conditioning
    std::optional<Shape> latent_shape;  // defaults to the backend's latent shape
};

/// Backend calls attributed by role.
struct CallAccounting {
    int prefix_calls = 0;            // shared pre-switch denoise segment
    int reservoir_prefix_calls = 0;  // pre-switch segment of the vacancy reservoir
    int probe_calls = 0;             // determinism probe
    OpCounts shared;                 // every call not tied to one frame (includes the above)
    std::vector<OpCounts> per_frame;

    int suffix_calls() const noexcept;
};

struct GenerationResult {
    std::vector<ImageField> frames;
    std::vector<LatentField> latents;  // final latent of each frame, before decoding
    CallAccounting calls;
    std::vector<std::string> warnings;
};

struct PipelineOptions {
    bool verify_determinism = true;
    // Run frame suffixes concurrently; honoured only if the backend reports concurrency_safe.
    bool parallel_frames = false;
};

/// Runs `denoise(x, 1, 0)` twice and requires bit-identical results; also rejects
/// backends that declare themselves non-deterministic.
void verify_backend_determinism(Backend& backend, const LatentField& probe, int total_steps,
                                ConditioningHandle conditioning);

/// Noise crystallisation with recrystallisation at the switch point.
///
/// The base noise is denoised to the switch level once; every frame then transforms that
/// cached latent (and the segmap) and finishes denoising on its own. transforms[0] must be the
/// identity.
GenerationResult generate_crystal(Backend& backend, const Scene& scene, const DenoiseSchedule& schedule,
                                  std::span<const CrystalTransform> transforms, const PipelineOptions& options = {});

struct LiquidOptions {
    int frames = 16;
    double beta = 0.5;
    double floor = 0.7;
    KurtosisSpec kurtosis;
    double inject_image_strength = 0.0;   // added to the decoded image after warping
    double inject_latent_strength = 0.0;  // added to the re-encoded latent
};

struct LiquidResult {
    GenerationResult generation;
    std::vector<ChannelStats> recorded_stats;  // measured before variance reduction
    std::vector<ChannelStats> matched_stats;   // measured right after re-matching
};

/// Liquid noise: per frame, reduce variance, decode, warp along the flow, re-encode, restore
/// the recorded channel statistics (std before mean), then finish denoising.
LiquidResult generate_liquid(Backend& backend, const Scene& scene, const DenoiseSchedule& schedule,
                             const FlowField& flow, const LiquidOptions& liquid, const PipelineOptions& options = {});

/// Persistent noise field on the image grid: seeded latent noise, each cell repeated as a
/// factor x factor block.
LatentField make_noise_canvas(std::uint64_t seed, const Shape& latent_shape, std::size_t factor);

/// Latent-grid noise read from a canvas at the centre of each factor x factor block.
LatentField sample_canvas(const LatentField& canvas, std::size_t factor);

struct ImageToVideoOptions {
    int frames = 16;
    double strength = 0.5;
    std::uint64_t seed = 0;
    std::string prompt;
    bool track_noise = true;  // false: noise stays frozen while the image moves
};

/// Animates a still image: the source and a persistent noise canvas are warped by the same
/// displacement each frame, noised to the strength level, then denoised. A strength level
/// of 0 runs no diffusion and returns the warped source.
GenerationResult image_to_video(Backend& backend, const ImageField& source, const FlowField& flow,
                                const DenoiseSchedule& schedule, const ImageToVideoOptions& options);

struct Layer {
    ImageField image;
    Plane alpha;  // [0, 1]
    FlowField flow;
    std::uint64_t seed = 0;
};

struct LayerOptions {
    int frames = 16;
    double strength = 0.5;
    std::string prompt;
    bool track_noise = true;
};

/// Layers are composited back to front (top layer last); noise canvases use the same alphas.
GenerationResult animate_layers(Backend& backend, std::span<const Layer> layers, const DenoiseSchedule& schedule,
                                const LayerOptions& options);

struct CompositeOptions {
    std::uint64_t fg_seed = 0;
    std::uint64_t bg_seed = 1;
    Mask mask;  // latent grid; on = foreground
    double combine_fraction = 0.0;
};

/// Object permanence / relighting: both seeds are denoised independently for
/// round(combine_fraction * steps) steps, pasted under the mask, then finished together.
ImageField composite_seeds(Backend& backend, const Scene& scene, const DenoiseSchedule& schedule,
                           const CompositeOptions& options);

struct Vid2VidOptions {
    double strength = 0.5;
    std::uint64_t seed = 0;
    std::string prompt;
    bool track_noise = true;
    bool wrap_x = true;
    bool wrap_y = true;
};

/// Per-frame img2img where the added noise follows the video's motion: flows[i] carries
/// noise from frame i to frame i + 1.
GenerationResult vid2vid_tracked(Backend& backend, std::span<const ImageField> frames,
                                 std::span<const DisplacementField> flows, const DenoiseSchedule& schedule,
                                 const Vid2VidOptions& options);

struct UpscaleWindow {
    std::size_t x = 0;  // image px, top-left; multiple of the scale factor
    std::size_t y = 0;
};

enum class NoisePlacement {
    tracked,  // each window crops the canvas noise at its own offset
    stamped,  // every window reuses the same crop
};

struct UpscaleOptions {
    double strength = 0.5;
    std::string prompt;
    NoisePlacement placement = NoisePlacement::tracked;
};

/// Periodic latent-grid canvas built by repeating one seeded tile.
LatentField tile_noise(std::uint64_t seed, const Shape& tile, std::size_t canvas_height, std::size_t canvas_width);

/// Generates one model-resolution window per entry. Canvas noise is indexed modulo its size,
/// so windows at the canvas edge wrap into the tiling.
GenerationResult seamless_upscale(Backend& backend, const LatentField& canvas_noise, const ImageField& source,
                                  std::span<const UpscaleWindow> windows, const DenoiseSchedule& schedule,
                                  const UpscaleOptions& options);

} // namespace noisecine
