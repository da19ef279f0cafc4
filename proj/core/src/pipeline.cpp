#include "noisecine/pipeline.hpp"

#include <bit>
#include <cmath>
#include <future>

#include "noisecine/rng.hpp"

namespace noisecine {

namespace {

// Forwards to another backend and adds every call to a caller-owned tally.
class Tally final : public Backend {
public:
    Tally(Backend& inner, OpCounts& counts) : inner_(inner), counts_(counts) {}

    BackendCapabilities capabilities() override { return inner_.capabilities(); }

    LatentField encode(const ImageField& image) override
    {
        ++counts_.encode;
        return inner_.encode(image);
    }

    ImageField decode(const LatentField& latent) override
    {
        ++counts_.decode;
        return inner_.decode(latent);
    }

    LatentField add_noise(const LatentField& clean, const LatentField& noise, int level, int total_steps) override
    {
        ++counts_.add_noise;
        return inner_.add_noise(clean, noise, level, total_steps);
    }

    LatentField denoise(const LatentField& latent, int from_level, int to_level, int total_steps,
                        ConditioningHandle conditioning) override
    {
        ++counts_.denoise;
        return inner_.denoise(latent, from_level, to_level, total_steps, conditioning);
    }

    ConditioningHandle prepare_conditioning(const std::string& prompt, const ImageField* segmap) override
    {
        ++counts_.prepare_conditioning;
        return inner_.prepare_conditioning(prompt, segmap);
    }

private:
    Backend& inner_;
    OpCounts& counts_;
};

// Runs fn(f) for every frame, tagging errors with the frame index. In parallel mode all
// frames are started and errors are reported in frame order.
template <class Fn>
void for_each_frame(int count, bool parallel, Fn&& fn)
{
    if (!parallel) {
        for (int f = 0; f < count; ++f) {
            try {
                fn(f);
            } catch (const Error& e) {
                throw e.with_frame(f);
            }
        }
        return;
    }
    std::vector<std::future<void>> futures;
    futures.reserve(static_cast<std::size_t>(count));
    for (int f = 0; f < count; ++f) {
        futures.push_back(std::async(std::launch::async, [&fn, f] { fn(f); }));
    }
    for (int f = 0; f < count; ++f) {
        try {
            futures[static_cast<std::size_t>(f)].get();
        } catch (const Error& e) {
            for (int rest = f + 1; rest < count; ++rest) {
                futures[static_cast<std::size_t>(rest)].wait();
            }
            throw e.with_frame(f);
        }
    }
}

Shape resolve_shape(const Scene& scene, const BackendCapabilities& caps)
{
    return scene.latent_shape.value_or(caps.latent_shape);
}

void check_segmap(const std::optional<ImageField>& segmap, const Shape& latent, std::size_t factor)
{
    if (!segmap) {
        return;
    }
    const Shape expected{3, latent.height * factor, latent.width * factor};
    if (segmap->shape() != expected) {
        fail(Errc::shape_mismatch,
             "segmap is " + to_string(segmap->shape()) + ", expected " + to_string(expected) + " for the latent grid");
    }
}

void check_image_grid(const ImageField& image, std::size_t factor, const char* what)
{
    if (image.channels() != 3) {
        fail(Errc::invalid_shape, std::string(what) + ": expected RGB, got " + to_string(image.shape()));
    }
    if (image.height() % factor != 0 || image.width() % factor != 0) {
        fail(Errc::alignment, std::string(what) + ": " + to_string(image.shape()) +
                                  " is not a multiple of the scale factor " + std::to_string(factor));
    }
}

void check_flow_dims(std::size_t height, std::size_t width, std::size_t image_height, std::size_t image_width,
                     const char* what)
{
    if (height != image_height || width != image_width) {
        fail(Errc::shape_mismatch, std::string(what) + ": flow is " + std::to_string(height) + "x" +
                                       std::to_string(width) + ", image is " + std::to_string(image_height) + "x" +
                                       std::to_string(image_width));
    }
}

// img2img from a given start level; level 0 returns the image untouched.
struct Diffused {
    ImageField frame;
    std::optional<LatentField> latent;
};

Diffused diffuse(Backend& backend, const ImageField& image, const LatentField& noise, int level,
                 const DenoiseSchedule& schedule, ConditioningHandle cond)
{
    if (level == 0) {
        return {image, std::nullopt};
    }
    const LatentField clean = backend.encode(image);
    LatentField z = backend.add_noise(clean, noise, level, schedule.steps);
    z = backend.denoise(z, level, 0, schedule.steps, cond);
    ImageField frame = backend.decode(z);
    return {std::move(frame), std::move(z)};
}

void store(GenerationResult& out, std::size_t f, Diffused d)
{
    out.frames[f] = std::move(d.frame);
    if (d.latent) {
        out.latents[f] = std::move(*d.latent);
    }
}

void drop_empty_latents(GenerationResult& out)
{
    std::erase_if(out.latents, [](const LatentField& z) { return z.empty(); });
}

GenerationResult sized_result(int frames)
{
    if (frames < 1) {
        fail(Errc::out_of_range, "frame count must be at least 1, got " + std::to_string(frames));
    }
    GenerationResult out;
    out.frames.resize(static_cast<std::size_t>(frames));
    out.latents.resize(static_cast<std::size_t>(frames));
    out.calls.per_frame.resize(static_cast<std::size_t>(frames));
    return out;
}

} // namespace

int CallAccounting::suffix_calls() const noexcept
{
    int total = 0;
    for (const OpCounts& c : per_frame) {
        total += c.denoise;
    }
    return total;
}

void verify_backend_determinism(Backend& backend, const LatentField& probe, int total_steps,
                                ConditioningHandle conditioning)
{
    if (!backend.capabilities().deterministic) {
        fail(Errc::determinism, "backend reports non-deterministic denoising; frame reuse would be invalid");
    }
    const LatentField a = backend.denoise(probe, 1, 0, total_steps, conditioning);
    const LatentField b = backend.denoise(probe, 1, 0, total_steps, conditioning);
    if (a.shape() != b.shape() || a.values().size() != b.values().size()) {
        fail(Errc::determinism, "determinism probe: repeated denoise returned different shapes");
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::bit_cast<std::uint64_t>(a.values()[i]) != std::bit_cast<std::uint64_t>(b.values()[i])) {
            fail(Errc::determinism, "determinism probe: repeated denoise differs at value " + std::to_string(i));
        }
    }
}

GenerationResult generate_crystal(Backend& backend, const Scene& scene, const DenoiseSchedule& schedule,
                                  std::span<const CrystalTransform> transforms, const PipelineOptions& options)
{
    schedule.validate();
    if (transforms.empty()) {
        fail(Errc::out_of_range, "crystal: at least one frame transform is required");
    }
    if (!transforms.front().is_identity()) {
        fail(Errc::invalid_argument, "crystal: frame 0 transform must be the identity");
    }
    const BackendCapabilities caps = backend.capabilities();
    const Shape shape = resolve_shape(scene, caps);
    check_segmap(scene.segmap, shape, caps.scale_factor);

    GenerationResult out = sized_result(static_cast<int>(transforms.size()));
    CallAccounting& calls = out.calls;
    Tally shared(backend, calls.shared);

    const LatentField noise = sample_noise({scene.seed, shape});
    const ImageField* segmap = scene.segmap ? &*scene.segmap : nullptr;
    const ConditioningHandle base_cond = shared.prepare_conditioning(scene.prompt, segmap);

    if (options.verify_determinism) {
        verify_backend_determinism(shared, noise, schedule.steps, base_cond);
        calls.probe_calls += 2;
    }

    const int n = schedule.steps;
    const int switch_level = schedule.switch_level();
    const LatentField cached = shared.denoise(noise, n, switch_level, n, base_cond);
    ++calls.prefix_calls;

    bool needs_reservoir = false;
    for (const CrystalTransform& t : transforms) {
        needs_reservoir = needs_reservoir || t.needs_reservoir();
    }
    std::optional<LatentField> reservoir;
    if (needs_reservoir) {
        const LatentField reservoir_noise = sample_noise({derive_seed(scene.seed, "reservoir"), shape});
        reservoir = shared.denoise(reservoir_noise, n, switch_level, n, base_cond);
        ++calls.reservoir_prefix_calls;
    }

    const bool parallel = options.parallel_frames && caps.concurrency_safe;
    for_each_frame(static_cast<int>(transforms.size()), parallel, [&](int f) {
        const auto index = static_cast<std::size_t>(f);
        const CrystalTransform& t = transforms[index];
        Tally tally(backend, calls.per_frame[index]);

        LatentField z = reservoir ? apply_transform(cached, t, *reservoir) : apply_transform(cached, t);
        ConditioningHandle cond = base_cond;
        if (segmap != nullptr && !t.is_identity()) {
            const ImageField moved = t.needs_reservoir()
                                         ? transform_conditioning(*segmap, t, *segmap, caps.scale_factor)
                                         : transform_conditioning(*segmap, t, caps.scale_factor);
            cond = tally.prepare_conditioning(scene.prompt, &moved);
        }
        z = tally.denoise(z, switch_level, 0, n, cond);
        out.frames[index] = tally.decode(z);
        out.latents[index] = std::move(z);
    });
    return out;
}

LiquidResult generate_liquid(Backend& backend, const Scene& scene, const DenoiseSchedule& schedule,
                             const FlowField& flow, const LiquidOptions& liquid, const PipelineOptions& options)
{
    schedule.validate();
    const VarianceReductionSpec reduction{schedule.switch_fraction, liquid.beta, liquid.floor};
    reduction.validate();
    const BackendCapabilities caps = backend.capabilities();
    const Shape shape = resolve_shape(scene, caps);
    check_segmap(scene.segmap, shape, caps.scale_factor);
    check_flow_dims(flow.height(), flow.width(), shape.height * caps.scale_factor, shape.width * caps.scale_factor,
                    "liquid");

    LiquidResult result;
    result.generation = sized_result(liquid.frames);
    GenerationResult& out = result.generation;
    CallAccounting& calls = out.calls;
    if (schedule.switch_fraction < 0.5) {
        out.warnings.push_back("switch fraction below 0.5: the latent is still mostly noise when it is warped");
    }
    Tally shared(backend, calls.shared);

    const LatentField noise = sample_noise({scene.seed, shape});
    const ImageField* segmap = scene.segmap ? &*scene.segmap : nullptr;
    const ConditioningHandle base_cond = shared.prepare_conditioning(scene.prompt, segmap);
    if (options.verify_determinism) {
        verify_backend_determinism(shared, noise, schedule.steps, base_cond);
        calls.probe_calls += 2;
    }

    const int n = schedule.steps;
    const int switch_level = schedule.switch_level();
    const LatentField cached = shared.denoise(noise, n, switch_level, n, base_cond);
    ++calls.prefix_calls;

    const ReducedLatent reduced = reduce_variance(cached, reduction);
    const ImageField base_image = shared.decode(reduced.field);

    const auto frames = static_cast<std::size_t>(liquid.frames);
    result.recorded_stats.assign(frames, reduced.original);
    result.matched_stats.resize(frames);
    const std::uint64_t image_seed = derive_seed(scene.seed, "inject-image");
    const std::uint64_t latent_seed = derive_seed(scene.seed, "inject-latent");

    const bool parallel = options.parallel_frames && caps.concurrency_safe;
    for_each_frame(liquid.frames, parallel, [&](int f) {
        const auto index = static_cast<std::size_t>(f);
        Tally tally(backend, calls.per_frame[index]);
        const DisplacementField disp = displacement_at(flow, static_cast<double>(f));

        ImageField moved = warp(base_image, disp, flow.wrap_x, flow.wrap_y);
        moved = inject_noise(moved, derive_seed(image_seed, static_cast<std::uint64_t>(f)),
                             liquid.inject_image_strength);
        LatentField z = tally.encode(moved);
        z = inject_noise(z, derive_seed(latent_seed, static_cast<std::uint64_t>(f)), liquid.inject_latent_strength);
        z = match_stats(z, reduced.original);
        result.matched_stats[index] = measure_stats(z);
        z = adjust_kurtosis(z, liquid.kurtosis);

        ConditioningHandle cond = base_cond;
        if (segmap != nullptr) {
            const ImageField moved_segmap = warp(*segmap, disp, flow.wrap_x, flow.wrap_y);
            cond = tally.prepare_conditioning(scene.prompt, &moved_segmap);
        }
        z = tally.denoise(z, switch_level, 0, n, cond);
        out.frames[index] = tally.decode(z);
        out.latents[index] = std::move(z);
    });
    return result;
}

LatentField make_noise_canvas(std::uint64_t seed, const Shape& latent_shape, std::size_t factor)
{
    if (factor == 0) {
        fail(Errc::out_of_range, "noise canvas: scale factor must be positive");
    }
    const LatentField small = sample_noise({seed, latent_shape});
    LatentField canvas(Shape{latent_shape.channels, latent_shape.height * factor, latent_shape.width * factor});
    for (std::size_t c = 0; c < canvas.channels(); ++c) {
        for (std::size_t y = 0; y < canvas.height(); ++y) {
            for (std::size_t x = 0; x < canvas.width(); ++x) {
                canvas(c, y, x) = small(c, y / factor, x / factor);
            }
        }
    }
    return canvas;
}

LatentField sample_canvas(const LatentField& canvas, std::size_t factor)
{
    if (factor == 0 || canvas.height() % factor != 0 || canvas.width() % factor != 0) {
        fail(Errc::alignment, "noise canvas " + to_string(canvas.shape()) + " is not a multiple of the scale factor " +
                                  std::to_string(factor));
    }
    LatentField out(Shape{canvas.channels(), canvas.height() / factor, canvas.width() / factor});
    const std::size_t centre = factor / 2;
    for (std::size_t c = 0; c < out.channels(); ++c) {
        for (std::size_t y = 0; y < out.height(); ++y) {
            for (std::size_t x = 0; x < out.width(); ++x) {
                out(c, y, x) = canvas(c, y * factor + centre, x * factor + centre);
            }
        }
    }
    return out;
}

GenerationResult image_to_video(Backend& backend, const ImageField& source, const FlowField& flow,
                                const DenoiseSchedule& schedule, const ImageToVideoOptions& options)
{
    const BackendCapabilities caps = backend.capabilities();
    const std::size_t factor = caps.scale_factor;
    check_image_grid(source, factor, "image_to_video");
    check_flow_dims(flow.height(), flow.width(), source.height(), source.width(), "image_to_video");
    const int level = schedule.level_for_strength(options.strength);

    GenerationResult out = sized_result(options.frames);
    Tally shared(backend, out.calls.shared);
    const Shape latent{caps.latent_shape.channels, source.height() / factor, source.width() / factor};
    const LatentField canvas = make_noise_canvas(options.seed, latent, factor);
    const ConditioningHandle cond =
        level == 0 ? ConditioningHandle{} : shared.prepare_conditioning(options.prompt, nullptr);

    for_each_frame(options.frames, false, [&](int f) {
        const auto index = static_cast<std::size_t>(f);
        Tally tally(backend, out.calls.per_frame[index]);
        const DisplacementField disp = displacement_at(flow, static_cast<double>(f));
        const ImageField moved = warp(source, disp, flow.wrap_x, flow.wrap_y);
        const LatentField noise =
            sample_canvas(options.track_noise ? warp(canvas, disp, flow.wrap_x, flow.wrap_y) : canvas, factor);
        store(out, index, diffuse(tally, moved, noise, level, schedule, cond));
    });
    drop_empty_latents(out);
    return out;
}

GenerationResult animate_layers(Backend& backend, std::span<const Layer> layers, const DenoiseSchedule& schedule,
                                const LayerOptions& options)
{
    if (layers.empty()) {
        fail(Errc::out_of_range, "animate_layers: at least one layer is required");
    }
    const BackendCapabilities caps = backend.capabilities();
    const std::size_t factor = caps.scale_factor;
    const Shape image_shape = layers.front().image.shape();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const Layer& layer = layers[i];
        check_image_grid(layer.image, factor, "animate_layers");
        if (layer.image.shape() != image_shape) {
            fail(Errc::shape_mismatch, "animate_layers: layer " + std::to_string(i) + " is " +
                                           to_string(layer.image.shape()) + ", layer 0 is " + to_string(image_shape));
        }
        if (layer.alpha.shape() != Shape{1, image_shape.height, image_shape.width}) {
            fail(Errc::shape_mismatch, "animate_layers: alpha of layer " + std::to_string(i) + " is " +
                                           to_string(layer.alpha.shape()));
        }
        check_flow_dims(layer.flow.height(), layer.flow.width(), image_shape.height, image_shape.width,
                        "animate_layers");
    }
    const int level = schedule.level_for_strength(options.strength);

    GenerationResult out = sized_result(options.frames);
    Tally shared(backend, out.calls.shared);
    const Shape latent{caps.latent_shape.channels, image_shape.height / factor, image_shape.width / factor};
    std::vector<LatentField> canvases;
    canvases.reserve(layers.size());
    for (const Layer& layer : layers) {
        canvases.push_back(make_noise_canvas(layer.seed, latent, factor));
    }
    const ConditioningHandle cond =
        level == 0 ? ConditioningHandle{} : shared.prepare_conditioning(options.prompt, nullptr);

    for_each_frame(options.frames, false, [&](int f) {
        const auto index = static_cast<std::size_t>(f);
        Tally tally(backend, out.calls.per_frame[index]);
        ImageField image(image_shape);
        LatentField canvas(canvases.front().shape());
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const Layer& layer = layers[i];
            const DisplacementField disp = displacement_at(layer.flow, static_cast<double>(f));
            const bool wx = layer.flow.wrap_x;
            const bool wy = layer.flow.wrap_y;
            const ImageField moved = warp(layer.image, disp, wx, wy);
            const Plane alpha = warp(layer.alpha, disp, wx, wy);
            const LatentField noise = options.track_noise ? warp(canvases[i], disp, wx, wy) : canvases[i];
            const auto a = alpha.channel(0);
            for (std::size_t c = 0; c < image.channels(); ++c) {
                auto dst = image.channel(c);
                const auto src = moved.channel(c);
                for (std::size_t p = 0; p < dst.size(); ++p) {
                    dst[p] = dst[p] * (1.0 - a[p]) + src[p] * a[p];
                }
            }
            for (std::size_t c = 0; c < canvas.channels(); ++c) {
                auto dst = canvas.channel(c);
                const auto src = noise.channel(c);
                for (std::size_t p = 0; p < dst.size(); ++p) {
                    dst[p] = dst[p] * (1.0 - a[p]) + src[p] * a[p];
                }
            }
        }
        store(out, index, diffuse(tally, image, sample_canvas(canvas, factor), level, schedule, cond));
    });
    drop_empty_latents(out);
    return out;
}

ImageField composite_seeds(Backend& backend, const Scene& scene, const DenoiseSchedule& schedule,
                           const CompositeOptions& options)
{
    schedule.validate();
    if (!(options.combine_fraction >= 0.0 && options.combine_fraction <= 1.0)) {
        fail(Errc::out_of_range, "composite: combine fraction must be in [0, 1]");
    }
    const BackendCapabilities caps = backend.capabilities();
    const Shape shape = resolve_shape(scene, caps);
    check_segmap(scene.segmap, shape, caps.scale_factor);
    if (options.mask.height() != shape.height || options.mask.width() != shape.width) {
        fail(Errc::shape_mismatch, "composite: mask is " + std::to_string(options.mask.height()) + "x" +
                                       std::to_string(options.mask.width()) + ", latent grid is " + to_string(shape));
    }
    const int n = schedule.steps;
    const int combine_level = n - static_cast<int>(std::lround(options.combine_fraction * n));
    const ConditioningHandle cond =
        backend.prepare_conditioning(scene.prompt, scene.segmap ? &*scene.segmap : nullptr);

    const LatentField fg = backend.denoise(sample_noise({options.fg_seed, shape}), n, combine_level, n, cond);
    LatentField z = backend.denoise(sample_noise({options.bg_seed, shape}), n, combine_level, n, cond);
    for (std::size_t c = 0; c < shape.channels; ++c) {
        for (std::size_t y = 0; y < shape.height; ++y) {
            for (std::size_t x = 0; x < shape.width; ++x) {
                if (options.mask(y, x)) {
                    z(c, y, x) = fg(c, y, x);
                }
            }
        }
    }
    z = backend.denoise(z, combine_level, 0, n, cond);
    return backend.decode(z);
}

GenerationResult vid2vid_tracked(Backend& backend, std::span<const ImageField> frames,
                                 std::span<const DisplacementField> flows, const DenoiseSchedule& schedule,
                                 const Vid2VidOptions& options)
{
    if (frames.empty()) {
        fail(Errc::size, "vid2vid: no input frames");
    }
    if (flows.size() + 1 != frames.size()) {
        fail(Errc::size, "vid2vid: " + std::to_string(frames.size()) + " frames need " +
                             std::to_string(frames.size() - 1) + " flows, got " + std::to_string(flows.size()));
    }
    const BackendCapabilities caps = backend.capabilities();
    const std::size_t factor = caps.scale_factor;
    const Shape image_shape = frames.front().shape();
    for (std::size_t i = 0; i < frames.size(); ++i) {
        check_image_grid(frames[i], factor, "vid2vid");
        if (frames[i].shape() != image_shape) {
            fail(Errc::shape_mismatch, "vid2vid: frame " + std::to_string(i) + " is " + to_string(frames[i].shape()) +
                                           ", frame 0 is " + to_string(image_shape));
        }
    }
    for (const DisplacementField& d : flows) {
        check_flow_dims(d.height, d.width, image_shape.height, image_shape.width, "vid2vid");
    }
    const int level = schedule.level_for_strength(options.strength);

    GenerationResult out = sized_result(static_cast<int>(frames.size()));
    Tally shared(backend, out.calls.shared);
    const Shape latent{caps.latent_shape.channels, image_shape.height / factor, image_shape.width / factor};
    LatentField canvas = make_noise_canvas(options.seed, latent, factor);
    const ConditioningHandle cond =
        level == 0 ? ConditioningHandle{} : shared.prepare_conditioning(options.prompt, nullptr);

    for_each_frame(static_cast<int>(frames.size()), false, [&](int f) {
        const auto index = static_cast<std::size_t>(f);
        if (f > 0 && options.track_noise) {
            canvas = warp(canvas, flows[index - 1], options.wrap_x, options.wrap_y);
        }
        Tally tally(backend, out.calls.per_frame[index]);
        store(out, index, diffuse(tally, frames[index], sample_canvas(canvas, factor), level, schedule, cond));
    });
    drop_empty_latents(out);
    return out;
}

LatentField tile_noise(std::uint64_t seed, const Shape& tile, std::size_t canvas_height, std::size_t canvas_width)
{
    const LatentField source = sample_noise({seed, tile});
    LatentField canvas(Shape{tile.channels, canvas_height, canvas_width});
    for (std::size_t c = 0; c < tile.channels; ++c) {
        for (std::size_t y = 0; y < canvas_height; ++y) {
            for (std::size_t x = 0; x < canvas_width; ++x) {
                canvas(c, y, x) = source(c, y % tile.height, x % tile.width);
            }
        }
    }
    return canvas;
}

GenerationResult seamless_upscale(Backend& backend, const LatentField& canvas_noise, const ImageField& source,
                                  std::span<const UpscaleWindow> windows, const DenoiseSchedule& schedule,
                                  const UpscaleOptions& options)
{
    if (windows.empty()) {
        fail(Errc::size, "upscale: no windows");
    }
    const BackendCapabilities caps = backend.capabilities();
    const std::size_t factor = caps.scale_factor;
    const Shape latent = caps.latent_shape;
    if (canvas_noise.channels() != latent.channels) {
        fail(Errc::shape_mismatch, "upscale: canvas noise has " + std::to_string(canvas_noise.channels()) +
                                       " channels, backend latents have " + std::to_string(latent.channels));
    }
    if (source.channels() != 3) {
        fail(Errc::invalid_shape, "upscale: expected RGB source, got " + to_string(source.shape()));
    }
    const std::size_t win_h = latent.height * factor;
    const std::size_t win_w = latent.width * factor;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const UpscaleWindow& w = windows[i];
        if (w.x % factor != 0 || w.y % factor != 0) {
            fail(Errc::alignment, "upscale: window " + std::to_string(i) + " at (" + std::to_string(w.x) + ", " +
                                      std::to_string(w.y) + ") is not aligned to the scale factor " +
                                      std::to_string(factor));
        }
        if (w.x + win_w > source.width() || w.y + win_h > source.height()) {
            fail(Errc::out_of_range, "upscale: window " + std::to_string(i) + " extends past the " +
                                         to_string(source.shape()) + " source");
        }
    }
    const int level = schedule.level_for_strength(options.strength);

    GenerationResult out = sized_result(static_cast<int>(windows.size()));
    Tally shared(backend, out.calls.shared);
    const ConditioningHandle cond =
        level == 0 ? ConditioningHandle{} : shared.prepare_conditioning(options.prompt, nullptr);
    const auto canvas_h = static_cast<std::ptrdiff_t>(canvas_noise.height());
    const auto canvas_w = static_cast<std::ptrdiff_t>(canvas_noise.width());

    for_each_frame(static_cast<int>(windows.size()), false, [&](int f) {
        const auto index = static_cast<std::size_t>(f);
        const UpscaleWindow& w = windows[index];
        Tally tally(backend, out.calls.per_frame[index]);

        ImageField crop(Shape{3, win_h, win_w});
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t y = 0; y < win_h; ++y) {
                for (std::size_t x = 0; x < win_w; ++x) {
                    crop(c, y, x) = source(c, w.y + y, w.x + x);
                }
            }
        }
        const bool tracked = options.placement == NoisePlacement::tracked;
        const auto oy = static_cast<std::ptrdiff_t>(tracked ? w.y / factor : 0);
        const auto ox = static_cast<std::ptrdiff_t>(tracked ? w.x / factor : 0);
        LatentField noise(latent);
        for (std::size_t c = 0; c < latent.channels; ++c) {
            for (std::size_t y = 0; y < latent.height; ++y) {
                for (std::size_t x = 0; x < latent.width; ++x) {
                    noise(c, y, x) = canvas_noise(c, static_cast<std::size_t>(wrap_index(oy + static_cast<std::ptrdiff_t>(y), canvas_h)),
                                                  static_cast<std::size_t>(wrap_index(ox + static_cast<std::ptrdiff_t>(x), canvas_w)));
                }
            }
        }
        store(out, index, diffuse(tally, crop, noise, level, schedule, cond));
    });
    drop_empty_latents(out);
    return out;
}

} // namespace noisecine
