#pragma once

#include <filesystem>
#include <optional>
#include <string>

namespace noisecine::cli {

struct MetricOptions {
    std::filesystem::path frames_dir;
    std::optional<std::filesystem::path> out;  // report.json and slices.png
    std::size_t rows = 5;
};

struct PreviewOptions {
    std::filesystem::path latent;
    std::optional<std::filesystem::path> colormap;
    std::filesystem::path out;
    std::size_t scale = 1;
};

struct FitOptions {
    std::filesystem::path pairs_dir;  // NAME.nclf with NAME.png beside it
    std::filesystem::path out;
};

struct ProbeOptions {
    std::filesystem::path image;
    std::filesystem::path out;
    std::string backend = "mock";
    std::string bridge_cmd;
    int dx = 8;
    int dy = 0;
    int cycles = 4;
};

// Each returns an exit code and reports errors on stderr.
int metric_command(const MetricOptions& options);
int latent_preview_command(const PreviewOptions& options);
int fit_colormap_command(const FitOptions& options);
int probe_vae_command(const ProbeOptions& options);

} // namespace noisecine::cli
