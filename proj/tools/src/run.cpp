#include "run.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>

#include "noisecine/bridge_backend.hpp"
#include "noisecine/image_io.hpp"
#include "noisecine/latent_io.hpp"
#include "noisecine/mock_backend.hpp"
#include "noisecine/pipeline.hpp"
#include "scene_config.hpp"

namespace noisecine::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
    GenerationResult result;
    bool has_accounting = true;
    json extras = json::object();
};

json counts_json(const OpCounts& c)
{
    return {{"encode", c.encode},
            {"decode", c.decode},
            {"add_noise", c.add_noise},
            {"denoise", c.denoise},
            {"prepare_conditioning", c.prepare_conditioning}};
}

json stats_json(const std::vector<ChannelStats>& stats)
{
    json out = json::array();
    for (const ChannelStats& s : stats) {
        out.push_back({{"mean", s.mean}, {"std", s.std}});
    }
    return out;
}

std::string numbered(const char* stem, std::size_t index, const char* ext)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%04zu%s", stem, index, ext);
    return buf;
}

std::unique_ptr<Backend> make_backend(const SceneConfig& c)
{
    if (c.backend.kind == "bridge") {
        return std::make_unique<BridgeBackend>(c.backend.command);
    }
    MockBackendConfig mock;
    if (c.latent_shape) {
        mock.latent_shape = *c.latent_shape;
    }
    return std::make_unique<MockBackend>(mock);
}

FlowField load_flow(const fs::path& path, const SceneConfig& c)
{
    FlowField flow = parse_flow_map(read_png(path), c.calibration);
    flow.wrap_x = c.wrap_x;
    flow.wrap_y = c.wrap_y;
    return flow;
}

Mask load_grid_mask(const fs::path& path, const Shape& latent, const std::string& key)
{
    Mask m = read_mask_png(path);
    if (m.height() != latent.height || m.width() != latent.width) {
        fail(Errc::shape_mismatch, "config: \"" + key + "\" mask is " + std::to_string(m.height()) + "x" +
                                       std::to_string(m.width()) + ", the latent grid is " +
                                       std::to_string(latent.height) + "x" + std::to_string(latent.width));
    }
    return m;
}

Scene make_scene(const SceneConfig& c)
{
    Scene scene{c.seed, c.prompt, std::nullopt, c.latent_shape};
    if (c.segmap) {
        scene.segmap = read_png(*c.segmap);
    }
    return scene;
}

std::vector<CrystalTransform> crystal_transforms(const SceneConfig& c, const Shape& latent)
{
    std::vector<CrystalTransform> out(static_cast<std::size_t>(c.frames));
    std::vector<Mask> masks;
    for (std::size_t i = 0; i < c.mosaic.size(); ++i) {
        masks.push_back(load_grid_mask(c.mosaic[i].mask, latent, "crystal.mosaic[" + std::to_string(i) + "].mask"));
    }
    // Frame 0 stays the identity; every motion is a per-frame rate.
    for (int f = 1; f < c.frames; ++f) {
        CrystalTransform& t = out[static_cast<std::size_t>(f)];
        t.shift = LatticeShift{c.shift.dx * f, c.shift.dy * f, c.shift.wrap_x, c.shift.wrap_y};
        if (c.shear) {
            t.glide = discretize_shear(c.shear->horizon_row, c.shear->near * f, c.shear->far * f,
                                       static_cast<int>(latent.height));
            t.glide->wrap = c.shear->wrap;
        }
        for (std::size_t i = 0; i < c.mosaic.size(); ++i) {
            t.mosaic.pieces.push_back(MosaicPiece{masks[i], c.mosaic[i].dx * f, c.mosaic[i].dy * f, c.mosaic[i].wrap});
        }
    }
    return out;
}

Outcome execute(Backend& backend, const SceneConfig& c)
{
    const DenoiseSchedule& schedule = c.schedule;
    const PipelineOptions parallel{true, true};
    Outcome out;
    switch (c.method) {
    case Method::crystal: {
        const Shape latent = c.latent_shape.value_or(backend.capabilities().latent_shape);
        const auto transforms = crystal_transforms(c, latent);
        out.result = generate_crystal(backend, make_scene(c), schedule, transforms, parallel);
        break;
    }
    case Method::liquid: {
        LiquidOptions liquid;
        liquid.frames = c.frames;
        liquid.beta = c.beta;
        liquid.floor = c.floor;
        liquid.kurtosis = KurtosisSpec{c.kurtosis_delta.value_or(1.0), c.kurtosis_delta.has_value()};
        liquid.inject_image_strength = c.inject_image;
        liquid.inject_latent_strength = c.inject_latent;
        LiquidResult r = generate_liquid(backend, make_scene(c), schedule, load_flow(*c.flow_map, c), liquid, parallel);
        out.extras["recorded_stats"] = stats_json(r.recorded_stats);
        out.extras["matched_stats"] = stats_json(r.matched_stats);
        out.result = std::move(r.generation);
        break;
    }
    case Method::img2vid: {
        ImageToVideoOptions o;
        o.frames = c.frames;
        o.strength = c.strength;
        o.seed = c.seed;
        o.prompt = c.prompt;
        o.track_noise = c.track_noise;
        out.result = image_to_video(backend, read_png(*c.source), load_flow(*c.flow_map, c), schedule, o);
        break;
    }
    case Method::layers: {
        std::vector<Layer> layers;
        for (const LayerSpec& l : c.layers) {
            layers.push_back(Layer{read_png(l.image), read_alpha_png(l.alpha), load_flow(l.flow_map, c), l.seed});
        }
        LayerOptions o;
        o.frames = c.frames;
        o.strength = c.strength;
        o.prompt = c.prompt;
        o.track_noise = c.track_noise;
        out.result = animate_layers(backend, layers, schedule, o);
        break;
    }
    case Method::vid2vid: {
        std::vector<ImageField> frames;
        std::vector<DisplacementField> flows;
        for (int f = 0; f < c.frames; ++f) {
            frames.push_back(read_png(c.inputs[static_cast<std::size_t>(f)]));
            if (f > 0) {
                flows.push_back(read_flo(c.flows[static_cast<std::size_t>(f - 1)]));
            }
        }
        Vid2VidOptions o;
        o.strength = c.strength;
        o.seed = c.seed;
        o.prompt = c.prompt;
        o.track_noise = c.track_noise;
        o.wrap_x = c.wrap_x;
        o.wrap_y = c.wrap_y;
        out.result = vid2vid_tracked(backend, frames, flows, schedule, o);
        break;
    }
    case Method::upscale: {
        const ImageField source = read_png(*c.source);
        const BackendCapabilities caps = backend.capabilities();
        const std::size_t f = caps.scale_factor;
        if (source.height() % f != 0 || source.width() % f != 0) {
            fail(Errc::alignment, "upscale: source " + to_string(source.shape()) +
                                      " is not a multiple of the scale factor " + std::to_string(f));
        }
        const auto tile = c.tile.value_or(std::pair{caps.latent_shape.height, caps.latent_shape.width});
        const LatentField canvas = tile_noise(c.seed, Shape{caps.latent_shape.channels, tile.first, tile.second},
                                              source.height() / f, source.width() / f);
        UpscaleOptions o;
        o.strength = c.strength;
        o.prompt = c.prompt;
        o.placement = c.placement;
        out.result = seamless_upscale(backend, canvas, source, c.windows, schedule, o);
        break;
    }
    case Method::composite: {
        const Shape latent = c.latent_shape.value_or(backend.capabilities().latent_shape);
        CompositeOptions o{c.fg_seed, c.bg_seed, load_grid_mask(*c.mask, latent, "composite.mask"), c.combine};
        out.result.frames.push_back(composite_seeds(backend, make_scene(c), schedule, o));
        out.has_accounting = false;
        break;
    }
    }
    return out;
}

void write_json(const fs::path& path, const json& j)
{
    std::ofstream out(path);
    out << j.dump(2) << '\n';
    if (!out) {
        fail(Errc::io, "cannot write " + path.string());
    }
}

std::uint64_t parse_seed_env(const std::string& text)
{
    std::size_t used = 0;
    unsigned long long value = 0;
    try {
        value = std::stoull(text, &used, 10);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size() || text.front() == '-') {
        fail(Errc::validation, "NOISECINE_SEED must be a non-negative integer, got \"" + text + "\"");
    }
    return value;
}

} // namespace

int exit_code_for(Errc code)
{
    switch (code) {
    case Errc::validation:
    case Errc::invalid_argument:
        return kExitValidation;
    case Errc::io:
    case Errc::bad_format:
    case Errc::bad_magic:
    case Errc::bad_version:
    case Errc::truncated:
        return kExitIo;
    case Errc::invalid_shape:
    case Errc::shape_mismatch:
    case Errc::out_of_range:
    case Errc::out_of_bounds:
    case Errc::missing_reservoir:
    case Errc::size:
    case Errc::alignment:
        return kExitShape;
    case Errc::degenerate:
    case Errc::singular:
        return kExitNumeric;
    case Errc::determinism:
    case Errc::transport:
    case Errc::protocol:
        return kExitBackend;
    }
    return kExitOther;
}

int run_scene(const RunOptions& options)
{
    const auto start = std::chrono::steady_clock::now();
    std::error_code ec;
    fs::create_directories(options.out, ec);
    if (ec || !fs::is_directory(options.out)) {
        std::cerr << "noisecine: cannot create output directory " << options.out << "\n";
        return kExitIo;
    }

    json manifest;
    manifest["tool"] = "noisecine";
    manifest["format"] = 1;
    manifest["config_path"] = fs::absolute(options.config).lexically_normal().string();
    manifest["config"] = nullptr;
    manifest["frames"] = json::array();
    manifest["warnings"] = json::array();
    int code = kExitOk;
    try {
        json raw = read_config_json(options.config);
        if (raw.is_object()) {
            if (options.seed_override) {
                raw["seed"] = parse_seed_env(*options.seed_override);
            }
            if (options.frames) {
                raw["frames"] = *options.frames;
            }
            if (options.backend || options.bridge_cmd) {
                json backend = raw.contains("backend") && raw["backend"].is_object() ? raw["backend"] : json::object();
                if (options.backend) {
                    backend["kind"] = *options.backend;
                }
                if (options.bridge_cmd) {
                    backend["command"] = *options.bridge_cmd;
                }
                raw["backend"] = backend;
            }
        }
        const SceneConfig config = parse_scene_config(raw, fs::absolute(options.config).parent_path());
        manifest["config"] = to_json(config);
        manifest["method"] = std::string(to_string(config.method));
        manifest["seed"] = config.seed;

        std::unique_ptr<Backend> inner = make_backend(config);
        const BackendCapabilities caps = inner->capabilities();
        manifest["backend"] = {{"kind", config.backend.kind},
                               {"deterministic", caps.deterministic},
                               {"concurrency_safe", caps.concurrency_safe},
                               {"latent_shape", {caps.latent_shape.channels, caps.latent_shape.height,
                                                 caps.latent_shape.width}},
                               {"scale_factor", caps.scale_factor}};
        CountingBackend backend(*inner);

        const auto generation_start = std::chrono::steady_clock::now();
        Outcome outcome = execute(backend, config);
        const auto generation_end = std::chrono::steady_clock::now();
        const GenerationResult& r = outcome.result;

        if (options.dump_latents && !r.latents.empty()) {
            fs::create_directories(options.out / "latents");
        }
        for (std::size_t f = 0; f < r.frames.size(); ++f) {
            const std::string file = numbered("frame", f, ".png");
            write_png(options.out / file, r.frames[f]);
            json entry = {{"index", f}, {"file", file}};
            if (outcome.has_accounting && f < r.calls.per_frame.size()) {
                entry["calls"] = counts_json(r.calls.per_frame[f]);
            }
            if (options.dump_latents && f < r.latents.size()) {
                const std::string latent = "latents/" + numbered("frame", f, ".nclf");
                write_latent(options.out / latent, r.latents[f]);
                entry["latent"] = latent;
            }
            manifest["frames"].push_back(std::move(entry));
        }
        json calls = {{"total", counts_json(backend.counts())}};
        if (outcome.has_accounting) {
            calls["prefix_calls"] = r.calls.prefix_calls;
            calls["reservoir_prefix_calls"] = r.calls.reservoir_prefix_calls;
            calls["probe_calls"] = r.calls.probe_calls;
            calls["suffix_calls"] = r.calls.suffix_calls();
            calls["shared"] = counts_json(r.calls.shared);
        }
        manifest["calls"] = std::move(calls);
        manifest["warnings"] = r.warnings;
        for (const std::string& w : r.warnings) {
            std::cerr << "noisecine: warning: " << w << "\n";
        }
        if (!outcome.extras.empty()) {
            manifest[std::string(to_string(config.method))] = outcome.extras;
        }
        manifest["timings"] = {
            {"generation_seconds", std::chrono::duration<double>(generation_end - generation_start).count()}};
        manifest["status"] = "ok";
    } catch (const Error& e) {
        code = exit_code_for(e.code());
        json error = {{"kind", std::string(to_string(e.code()))}, {"message", e.what()}};
        if (e.frame()) {
            error["frame"] = *e.frame();
        }
        manifest["status"] = "error";
        manifest["error"] = std::move(error);
        std::cerr << "noisecine: " << to_string(e.code()) << ": " << e.what();
        if (e.frame()) {
            std::cerr << " (frame " << *e.frame() << ")";
        }
        std::cerr << "\n";
    } catch (const std::exception& e) {
        code = kExitOther;
        manifest["status"] = "error";
        manifest["error"] = {{"kind", "internal"}, {"message", e.what()}};
        std::cerr << "noisecine: " << e.what() << "\n";
    }
    manifest["timings"]["total_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    try {
        write_json(options.out / "manifest.json", manifest);
    } catch (const Error& e) {
        std::cerr << "noisecine: " << e.what() << "\n";
        return code == kExitOk ? kExitIo : code;
    }
    return code;
}

} // namespace noisecine::cli
