#include "noisecine/metric.hpp"

#include <cmath>
#include <numbers>

namespace noisecine {

namespace {

double wrap_to_pi(double a)
{
    while (a > std::numbers::pi) {
        a -= 2.0 * std::numbers::pi;
    }
    while (a <= -std::numbers::pi) {
        a += 2.0 * std::numbers::pi;
    }
    return a;
}

double luminance(const ImageField& frame, std::size_t y, std::size_t x)
{
    if (frame.channels() == 1) {
        return frame(0, y, x);
    }
    return 0.299 * frame(0, y, x) + 0.587 * frame(1, y, x) + 0.114 * frame(2, y, x);
}

} // namespace

XTSlice::XTSlice(std::size_t frames, std::size_t width, std::vector<double> data)
    : frames_(frames), width_(width), data_(std::move(data))
{
    if (data_.size() != frames * width) {
        fail(Errc::shape_mismatch, "XTSlice: data size does not match " + std::to_string(frames) + "x" +
                                       std::to_string(width));
    }
}

SliceExtraction extract_slices(std::span<const ImageField> frames, std::span<const std::size_t> rows)
{
    if (frames.size() < 3) {
        fail(Errc::size, "extract_slices: need at least 3 frames, got " + std::to_string(frames.size()));
    }
    const Shape shape = frames.front().shape();
    for (std::size_t f = 1; f < frames.size(); ++f) {
        if (frames[f].shape() != shape) {
            fail(Errc::shape_mismatch, "extract_slices: frame " + std::to_string(f) + " is " +
                                           to_string(frames[f].shape()) + ", frame 0 is " + to_string(shape));
        }
    }
    if (shape.channels != 3 && shape.channels != 1) {
        fail(Errc::invalid_shape, "extract_slices: frames must be RGB or grey");
    }
    SliceExtraction out;
    out.frames_available = frames.size();
    out.truncated = frames.size() > kMaxSliceFrames;
    const std::size_t used = std::min(frames.size(), kMaxSliceFrames);
    for (std::size_t row : rows) {
        if (row >= shape.height) {
            fail(Errc::out_of_range, "extract_slices: row " + std::to_string(row) + " outside frame height " +
                                         std::to_string(shape.height));
        }
        std::vector<double> data(used * shape.width);
        for (std::size_t t = 0; t < used; ++t) {
            for (std::size_t x = 0; x < shape.width; ++x) {
                data[t * shape.width + x] = luminance(frames[t], row, x);
            }
        }
        out.slices.emplace_back(used, shape.width, std::move(data));
    }
    return out;
}

std::vector<double> slice_directions(const XTSlice& s)
{
    const std::size_t frames = s.frames();
    const std::size_t width = s.width();
    if (frames < 3 || width < 3) {
        fail(Errc::size, "slice_directions: slice must be at least 3x3, got " + std::to_string(frames) + "x" +
                             std::to_string(width));
    }
    std::vector<double> directions;
    directions.reserve(frames - 2);
    double previous = 0.0;
    bool any_edges = false;
    for (std::size_t t = 1; t + 1 < frames; ++t) {
        double re = 0.0;
        double im = 0.0;
        for (std::size_t x = 1; x + 1 < width; ++x) {
            const double gx = (s(t - 1, x + 1) - s(t - 1, x - 1)) + 2.0 * (s(t, x + 1) - s(t, x - 1)) +
                              (s(t + 1, x + 1) - s(t + 1, x - 1));
            const double gt = (s(t + 1, x - 1) - s(t - 1, x - 1)) + 2.0 * (s(t + 1, x) - s(t - 1, x)) +
                              (s(t + 1, x + 1) - s(t - 1, x + 1));
            if (gx == 0.0 || std::hypot(gx, gt) < kEdgeMagnitudeThreshold) {
                continue;
            }
            // Edge direction is perpendicular to the gradient; take the member pointing forward
            // in time. Its time component is |gx| and its space component is -sign(gx) * gt, so
            // r * e^{i theta} needs no trigonometry.
            re += std::fabs(gx);
            im += gx > 0.0 ? -gt : gt;
        }
        if (re > 0.0) {
            previous = std::atan2(im, re);
            any_edges = true;
        }
        directions.push_back(previous);
    }
    if (!any_edges) {
        fail(Errc::degenerate, "slice has no edges with a forward-time direction");
    }
    return directions;
}

SliceScore slice_smoothness(const XTSlice& slice)
{
    if (slice.frames() < 5) {
        fail(Errc::degenerate, "slice_smoothness: " + std::to_string(slice.frames()) +
                                   " frames leave no interior second difference (need >= 5)");
    }
    const std::vector<double> raw = slice_directions(slice);
    std::vector<double> phi(raw.size());
    phi[0] = raw[0];
    for (std::size_t i = 1; i < raw.size(); ++i) {
        phi[i] = phi[i - 1] + wrap_to_pi(raw[i] - raw[i - 1]);
    }
    std::vector<double> second;
    second.reserve(phi.size() - 2);
    for (std::size_t i = 1; i + 1 < phi.size(); ++i) {
        second.push_back(phi[i + 1] - 2.0 * phi[i] + phi[i - 1]);
    }
    double mean = 0.0;
    for (double d : second) {
        mean += d;
    }
    mean /= static_cast<double>(second.size());
    double var = 0.0;
    for (double d : second) {
        var += (d - mean) * (d - mean);
    }
    var /= static_cast<double>(second.size());
    SliceScore score;
    score.roughness = std::sqrt(var);
    score.smoothness = std::exp(-score.roughness);
    return score;
}

std::vector<std::size_t> evenly_spaced_rows(std::size_t height, std::size_t count)
{
    std::vector<std::size_t> rows;
    rows.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        rows.push_back(((i + 1) * height) / (count + 1));
    }
    return rows;
}

SmoothnessReport video_smoothness(std::span<const ImageField> frames, std::size_t row_count)
{
    if (frames.empty()) {
        fail(Errc::size, "video_smoothness: no frames");
    }
    const std::vector<std::size_t> rows = evenly_spaced_rows(frames.front().height(), row_count);
    return video_smoothness(frames, rows);
}

SmoothnessReport video_smoothness(std::span<const ImageField> frames, std::span<const std::size_t> rows)
{
    if (rows.empty()) {
        fail(Errc::size, "video_smoothness: no rows requested");
    }
    const SliceExtraction extraction = extract_slices(frames, rows);
    SmoothnessReport report;
    report.rows.assign(rows.begin(), rows.end());
    report.frames_used = extraction.slices.front().frames();
    report.truncated = extraction.truncated;
    if (extraction.truncated) {
        report.warnings.push_back("video has " + std::to_string(extraction.frames_available) +
                                  " frames; slices use the first " + std::to_string(kMaxSliceFrames));
    }
    double sum = 0.0;
    std::size_t valid = 0;
    for (std::size_t i = 0; i < extraction.slices.size(); ++i) {
        try {
            const SliceScore score = slice_smoothness(extraction.slices[i]);
            report.slices.emplace_back(score);
            sum += score.smoothness;
            ++valid;
        } catch (const Error& e) {
            if (e.code() != Errc::degenerate) {
                throw;
            }
            report.slices.emplace_back(std::nullopt);
            report.warnings.push_back("row " + std::to_string(rows[i]) + " skipped: " + e.what());
        }
    }
    if (valid == 0) {
        fail(Errc::degenerate, "video_smoothness: every slice is degenerate");
    }
    report.mean_smoothness = sum / static_cast<double>(valid);
    return report;
}

ImageField slice_montage(std::span<const XTSlice> slices)
{
    if (slices.empty()) {
        fail(Errc::size, "slice_montage: no slices");
    }
    const std::size_t width = slices.front().width();
    std::size_t height = 0;
    for (const XTSlice& s : slices) {
        height += s.frames();
    }
    height += slices.size() - 1;
    ImageField out(Shape{1, height, width}, 128.0);
    std::size_t y0 = 0;
    for (const XTSlice& s : slices) {
        for (std::size_t t = 0; t < s.frames(); ++t) {
            for (std::size_t x = 0; x < std::min(width, s.width()); ++x) {
                out(0, y0 + t, x) = s(t, x);
            }
        }
        y0 += s.frames() + 1;
    }
    return out;
}

} // namespace noisecine
