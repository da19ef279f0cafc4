#include "noisecine/error.hpp"

namespace noisecine {

std::string_view to_string(Errc code)
{
    switch (code) {
    case Errc::invalid_shape: return "invalid_shape";
    case Errc::shape_mismatch: return "shape_mismatch";
    case Errc::out_of_range: return "out_of_range";
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::missing_reservoir: return "missing_reservoir";
    case Errc::out_of_bounds: return "out_of_bounds";
    case Errc::bad_format: return "bad_format";
    case Errc::degenerate: return "degenerate";
    case Errc::singular: return "singular";
    case Errc::size: return "size";
    case Errc::alignment: return "alignment";
    case Errc::io: return "io";
    case Errc::bad_magic: return "bad_magic";
    case Errc::bad_version: return "bad_version";
    case Errc::truncated: return "truncated";
    case Errc::determinism: return "determinism";
    case Errc::transport: return "transport";
    case Errc::protocol: return "protocol";
    case Errc::validation: return "validation";
    }
    return "unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(message), code_(code)
{
}

Error Error::with_frame(int frame) const
{
    if (frame_) {
        return *this;
    }
    Error copy(code_, "frame " + std::to_string(frame) + ": " + what());
    copy.frame_ = frame;
    return copy;
}

void fail(Errc code, const std::string& message)
{
    throw Error(code, message);
}

} // namespace noisecine
