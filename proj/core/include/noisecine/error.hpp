#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace noisecine {

/// Error classes raised by the engine. The CLI maps each class to its own exit code.
enum class Errc {
    invalid_shape,
    shape_mismatch,
    out_of_range,
    invalid_argument,
    missing_reservoir,
    out_of_bounds,
    bad_format,
    degenerate,
    singular,
    size,
    alignment,
    io,
    bad_magic,
    bad_version,
    truncated,
    determinism,
    transport,
    protocol,
    validation,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message);

    Errc code() const noexcept { return code_; }

    // Frame index attached by pipelines when a per-frame step fails.
    std::optional<int> frame() const noexcept { return frame_; }

    Error with_frame(int frame) const;

private:
    Errc code_;
    std::optional<int> frame_;
};

[[noreturn]] void fail(Errc code, const std::string& message);

} // namespace noisecine
