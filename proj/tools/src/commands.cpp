#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <iterator>
#include <memory>
#include <vector>

#include <json.hpp>

#include "noisecine/bridge_backend.hpp"
#include "noisecine/colormap.hpp"
#include "noisecine/crystal.hpp"
#include "noisecine/image_io.hpp"
#include "noisecine/latent_io.hpp"
#include "noisecine/metric.hpp"
#include "noisecine/mock_backend.hpp"
#include "noisecine/vae_probe.hpp"
#include "run.hpp"

namespace noisecine::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <class F>
int guarded(F&& body)
{
    try {
        body();
        return kExitOk;
    } catch (const Error& e) {
        std::cerr << "noisecine: " << to_string(e.code()) << ": " << e.what() << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "noisecine: " << e.what() << "\n";
        return kExitOther;
    }
}

std::vector<fs::path> files_with_extension(const fs::path& dir, const char* extension)
{
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) {
        fail(Errc::io, "not a directory: " + dir.string());
    }
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == extension) {
            out.push_back(entry.path());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path);
    out << text;
    if (!out) {
        fail(Errc::io, "cannot write " + path.string());
    }
}

ImageField upscale_nearest(const ImageField& x, std::size_t factor)
{
    ImageField out(Shape{x.channels(), x.height() * factor, x.width() * factor});
    for (std::size_t c = 0; c < x.channels(); ++c) {
        for (std::size_t y = 0; y < out.height(); ++y) {
            for (std::size_t col = 0; col < out.width(); ++col) {
                out(c, y, col) = x(c, y / factor, col / factor);
            }
        }
    }
    return out;
}

// Images side by side with 4 px grey gutters.
ImageField side_by_side(const std::vector<ImageField>& images)
{
    constexpr std::size_t gutter = 4;
    std::size_t width = 0;
    std::size_t height = 0;
    for (const ImageField& im : images) {
        width += im.width();
        height = std::max(height, im.height());
    }
    width += gutter * (images.size() - 1);
    ImageField out(Shape{3, height, width}, 128.0);
    std::size_t x0 = 0;
    for (const ImageField& im : images) {
        for (std::size_t c = 0; c < 3; ++c) {
            const std::size_t src = std::min(c, im.channels() - 1);
            for (std::size_t y = 0; y < im.height(); ++y) {
                for (std::size_t x = 0; x < im.width(); ++x) {
                    out(c, y, x0 + x) = im(src, y, x);
                }
            }
        }
        x0 += im.width() + gutter;
    }
    return out;
}

} // namespace

int metric_command(const MetricOptions& o)
{
    return guarded([&] {
        std::vector<ImageField> frames;
        for (const fs::path& p : files_with_extension(o.frames_dir, ".png")) {
            frames.push_back(read_png(p));
        }
        const SmoothnessReport report = video_smoothness(frames, o.rows);
        json slices = json::array();
        for (std::size_t i = 0; i < report.rows.size(); ++i) {
            json s = {{"row", report.rows[i]}};
            if (report.slices[i]) {
                s["roughness"] = report.slices[i]->roughness;
                s["smoothness"] = report.slices[i]->smoothness;
            } else {
                s["skipped"] = true;
            }
            slices.push_back(std::move(s));
        }
        const json j = {{"mean_smoothness", report.mean_smoothness},
                        {"frames_used", report.frames_used},
                        {"frames_available", frames.size()},
                        {"truncated", report.truncated},
                        {"slices", std::move(slices)},
                        {"warnings", report.warnings}};
        std::cout << j.dump(2) << "\n";
        if (o.out) {
            fs::create_directories(*o.out);
            write_text(*o.out / "report.json", j.dump(2) + "\n");
            const SliceExtraction extracted = extract_slices(frames, report.rows);
            write_png(*o.out / "slices.png", slice_montage(extracted.slices));
        }
    });
}

int latent_preview_command(const PreviewOptions& o)
{
    return guarded([&] {
        if (o.scale == 0) {
            fail(Errc::validation, "--scale must be >= 1");
        }
        ColorMap34 map = ColorMap34::sd15();
        if (o.colormap) {
            std::ifstream in(*o.colormap);
            if (!in) {
                fail(Errc::io, "cannot read " + o.colormap->string());
            }
            map = colormap_from_json(std::string(std::istreambuf_iterator<char>(in), {}));
        }
        const ImageField rgb = apply_colormap(read_latent(o.latent), map);
        write_png(o.out, upscale_nearest(rgb, o.scale));
    });
}

int fit_colormap_command(const FitOptions& o)
{
    return guarded([&] {
        std::vector<ColormapSample> pairs;
        for (const fs::path& latent_path : files_with_extension(o.pairs_dir, ".nclf")) {
            fs::path image_path = latent_path;
            image_path.replace_extension(".png");
            if (!fs::exists(image_path)) {
                fail(Errc::io, "no image beside " + latent_path.string() + " (expected " + image_path.string() + ")");
            }
            const LatentField latent = read_latent(latent_path);
            ImageField image = read_png(image_path);
            if (image.height() != latent.height() || image.width() != latent.width()) {
                const std::size_t factor = image.height() / latent.height();
                if (factor == 0 || image.height() != factor * latent.height() ||
                    image.width() != factor * latent.width()) {
                    fail(Errc::shape_mismatch, image_path.string() + " is " + to_string(image.shape()) +
                                                   ", not a whole multiple of latent " + to_string(latent.shape()));
                }
                image = box_downsample(image, factor);
            }
            pairs.push_back(ColormapSample{latent, std::move(image)});
        }
        if (pairs.empty()) {
            fail(Errc::size, "no .nclf/.png pairs in " + o.pairs_dir.string());
        }
        const std::string text = colormap_to_json(fit_colormap(pairs));
        write_text(o.out, text + "\n");
        std::cout << text << "\n";
    });
}

int probe_vae_command(const ProbeOptions& o)
{
    return guarded([&] {
        if (o.cycles < 0) {
            fail(Errc::validation, "--cycles must be >= 0");
        }
        const ImageField image = read_png(o.image);
        std::unique_ptr<Backend> backend;
        if (o.backend == "bridge") {
            backend = std::make_unique<BridgeBackend>(o.bridge_cmd);
        } else if (o.backend == "mock") {
            if (image.height() % kVaeScale != 0 || image.width() % kVaeScale != 0) {
                fail(Errc::alignment, "probe-vae: image " + to_string(image.shape()) +
                                          " is not a multiple of the scale factor");
            }
            MockBackendConfig config;
            config.latent_shape = Shape{4, image.height() / kVaeScale, image.width() / kVaeScale};
            backend = std::make_unique<MockBackend>(config);
        } else {
            fail(Errc::validation, "--backend must be mock or bridge");
        }
        fs::create_directories(o.out);
        const ImageField decoded = backend->decode(backend->encode(image));
        const ImageField rolled = probe_roll(*backend, image, o.dx, o.dy);
        write_png(o.out / "roll.png", rolled);
        write_png(o.out / "roll_montage.png", side_by_side({decoded, rolled, roll(decoded, LatticeShift{o.dx, o.dy})}));
        const std::vector<ImageField> stages = probe_idempotency(*backend, image, o.cycles);
        write_png(o.out / "idempotency_montage.png", side_by_side(stages));
    });
}

} // namespace noisecine::cli
