#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "noisecine/backend.hpp"
#include "noisecine/flow.hpp"
#include "noisecine/pipeline.hpp"

namespace noisecine::cli {

enum class Method { crystal, liquid, img2vid, layers, vid2vid, upscale, composite };

std::string_view to_string(Method m);

struct BackendSpec {
    std::string kind = "mock";  // mock | bridge
    std::string command;        // bridge command line
};

struct ShiftSpec {
    int dx = 0;  // latent cells per frame
    int dy = 0;
    bool wrap_x = true;
    bool wrap_y = true;
};

struct ShearSpec {
    int horizon_row = 0;
    int near = 0;  // latent cells per frame at the bottom row
    int far = 0;   // latent cells per frame at and above the horizon
    bool wrap = true;
};

struct MosaicSpec {
    std::filesystem::path mask;  // latent-grid mask PNG
    int dx = 0;
    int dy = 0;
    bool wrap = true;
};

struct LayerSpec {
    std::filesystem::path image;
    std::filesystem::path alpha;
    std::filesystem::path flow_map;
    std::uint64_t seed = 0;
};

struct SceneConfig {
    Method method = Method::crystal;
    std::string prompt;
    std::uint64_t seed = 0;
    int frames = 16;
    std::optional<Shape> latent_shape;
    DenoiseSchedule schedule;
    BackendSpec backend;
    std::optional<std::filesystem::path> segmap;
    std::optional<std::filesystem::path> flow_map;
    std::optional<std::filesystem::path> source;
    FlowCalibration calibration;

    // crystal
    ShiftSpec shift;
    std::optional<ShearSpec> shear;
    std::vector<MosaicSpec> mosaic;

    // liquid
    double beta = 0.5;
    double floor = 0.7;
    std::optional<double> kurtosis_delta;
    double inject_image = 0.0;
    double inject_latent = 0.0;

    // flow-driven methods
    bool wrap_x = true;
    bool wrap_y = true;
    double strength = 0.5;
    bool track_noise = true;
    std::vector<LayerSpec> layers;
    std::vector<std::filesystem::path> inputs;
    std::vector<std::filesystem::path> flows;

    // upscale
    std::vector<UpscaleWindow> windows;
    NoisePlacement placement = NoisePlacement::tracked;
    std::optional<std::pair<std::size_t, std::size_t>> tile;  // latent cells

    // composite
    std::optional<std::filesystem::path> mask;
    std::uint64_t fg_seed = 0;
    std::uint64_t bg_seed = 1;
    double combine = 0.0;
};

/// Parses and validates a scene. Relative paths resolve against base_dir. Unknown keys,
/// keys the method does not use, and missing required keys raise validation errors that
/// name the key.
SceneConfig parse_scene_config(const nlohmann::json& j, const std::filesystem::path& base_dir);

/// Reads a config file as JSON; validation happens in parse_scene_config.
nlohmann::json read_config_json(const std::filesystem::path& path);

/// Normalized form with every default filled in and absolute paths; parses back to the
/// same configuration.
nlohmann::json to_json(const SceneConfig& config);

} // namespace noisecine::cli
