#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "noisecine/error.hpp"

namespace noisecine::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitOther = 1,
    kExitUsage = 2,
    kExitValidation = 3,
    kExitIo = 4,
    kExitShape = 5,
    kExitNumeric = 6,
    kExitBackend = 7,
};

int exit_code_for(Errc code);

struct RunOptions {
    std::filesystem::path config;
    std::filesystem::path out;
    std::optional<std::string> backend;     // overrides backend.kind
    std::optional<std::string> bridge_cmd;  // overrides backend.command
    std::optional<int> frames;
    std::optional<std::string> seed_override;  // raw NOISECINE_SEED value
    bool dump_latents = false;
};

/// Runs one scene: frames as out/frame_%04d.png, optional latents/frame_%04d.nclf, and
/// out/manifest.json, which is written on failure too. Returns the exit code.
int run_scene(const RunOptions& options);

} // namespace noisecine::cli
