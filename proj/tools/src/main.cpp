#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "run.hpp"

using namespace noisecine::cli;

int main(int argc, char** argv)
{
    CLI::App app{"noisecine: video frames from transported diffusion noise"};
    app.require_subcommand(1);

    RunOptions run;
    std::optional<int> frames;
    auto* run_cmd = app.add_subcommand("run", "Generate frames from a scene config");
    run_cmd->add_option("--config", run.config, "Scene config (JSON)")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--out", run.out, "Output directory")->required();
    run_cmd->add_option("--backend", run.backend, "mock or bridge")->check(CLI::IsMember({"mock", "bridge"}));
    run_cmd->add_option("--bridge-cmd", run.bridge_cmd, "Command line that starts the bridge server");
    run_cmd->add_flag("--dump-latents", run.dump_latents, "Write final latents as .nclf files");
    run_cmd->add_option("--frames", frames, "Override the frame count")->check(CLI::PositiveNumber);

    MetricOptions metric;
    auto* metric_cmd = app.add_subcommand("metric", "Temporal smoothness of a frame directory");
    metric_cmd->add_option("frames_dir", metric.frames_dir, "Directory of PNG frames, sorted by name")->required();
    metric_cmd->add_option("--out", metric.out, "Directory for report.json and slices.png");
    metric_cmd->add_option("--rows", metric.rows, "Number of evenly spaced rows")->check(CLI::PositiveNumber);

    PreviewOptions preview;
    auto* preview_cmd = app.add_subcommand("latent-preview", "Colour-map a latent dump to PNG");
    preview_cmd->add_option("latent", preview.latent, "Latent dump (.nclf)")->required();
    preview_cmd->add_option("--out", preview.out, "Output PNG")->required();
    preview_cmd->add_option("--colormap", preview.colormap, "Colour map JSON (default: built-in)");
    preview_cmd->add_option("--scale", preview.scale, "Nearest-neighbour upscale factor");

    FitOptions fit;
    auto* fit_cmd = app.add_subcommand("fit-colormap", "Fit a latent-to-RGB map from latent/image pairs");
    fit_cmd->add_option("pairs_dir", fit.pairs_dir, "Directory of NAME.nclf + NAME.png pairs")->required();
    fit_cmd->add_option("--out", fit.out, "Output JSON")->required();

    ProbeOptions probe;
    auto* probe_cmd = app.add_subcommand("probe-vae", "Roll and idempotency probes of the autoencoder");
    probe_cmd->add_option("image", probe.image, "Input PNG")->required();
    probe_cmd->add_option("--out", probe.out, "Output directory")->required();
    probe_cmd->add_option("--backend", probe.backend, "mock or bridge")->check(CLI::IsMember({"mock", "bridge"}));
    probe_cmd->add_option("--bridge-cmd", probe.bridge_cmd, "Command line that starts the bridge server");
    probe_cmd->add_option("--dx", probe.dx, "Horizontal roll in image px");
    probe_cmd->add_option("--dy", probe.dy, "Vertical roll in image px");
    probe_cmd->add_option("--cycles", probe.cycles, "Encode/decode round trips");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    if (*run_cmd) {
        run.frames = frames;
        if (const char* seed = std::getenv("NOISECINE_SEED")) {
            run.seed_override = seed;
        }
        return run_scene(run);
    }
    if (*metric_cmd) {
        return metric_command(metric);
    }
    if (*preview_cmd) {
        return latent_preview_command(preview);
    }
    if (*fit_cmd) {
        return fit_colormap_command(fit);
    }
    if (*probe_cmd) {
        if (probe.backend == "bridge" && probe.bridge_cmd.empty()) {
            std::cerr << "noisecine: --backend bridge needs --bridge-cmd\n";
            return kExitUsage;
        }
        return probe_vae_command(probe);
    }
    return kExitUsage;
}
