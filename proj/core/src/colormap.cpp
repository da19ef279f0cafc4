#include "noisecine/colormap.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <sstream>

namespace noisecine {

ColorMap34 ColorMap34::sd15()
{
    ColorMap34 map;
    map.weights = {{
        {43.89, 16.35, -35.44, -21.61},
        {29.65, 44.57, 32.10, -29.15},
        {36.27, 5.53, 28.26, -82.53},
    }};
    map.biases = {123.54, 111.48, 98.52};
    return map;
}

ImageField apply_colormap(const LatentField& x, const ColorMap34& map)
{
    if (x.channels() != 4) {
        fail(Errc::invalid_shape, "apply_colormap: expected 4 latent channels, got " + to_string(x.shape()));
    }
    ImageField out(Shape{3, x.height(), x.width()});
    const std::size_t n = x.height() * x.width();
    for (std::size_t rgb = 0; rgb < 3; ++rgb) {
        auto dst = out.channel(rgb);
        for (std::size_t i = 0; i < n; ++i) {
            double v = map.biases[rgb];
            for (std::size_t c = 0; c < 4; ++c) {
                v += map.weights[rgb][c] * x.channel(c)[i];
            }
            dst[i] = v;
        }
    }
    return out;
}

ImageField box_downsample(const ImageField& image, std::size_t factor)
{
    if (factor == 0 || image.height() % factor != 0 || image.width() % factor != 0) {
        fail(Errc::shape_mismatch, "box_downsample: " + to_string(image.shape()) + " is not divisible by " +
                                       std::to_string(factor));
    }
    ImageField out(Shape{image.channels(), image.height() / factor, image.width() / factor});
    const double inv = 1.0 / static_cast<double>(factor * factor);
    for (std::size_t c = 0; c < image.channels(); ++c) {
        for (std::size_t y = 0; y < out.height(); ++y) {
            for (std::size_t x = 0; x < out.width(); ++x) {
                double sum = 0.0;
                for (std::size_t dy = 0; dy < factor; ++dy) {
                    for (std::size_t dx = 0; dx < factor; ++dx) {
                        sum += image(c, y * factor + dy, x * factor + dx);
                    }
                }
                out(c, y, x) = sum * inv;
            }
        }
    }
    return out;
}

ColorMap34 fit_colormap(std::span<const ColormapSample> pairs)
{
    if (pairs.empty()) {
        fail(Errc::size, "fit_colormap: no latent/image pairs");
    }
    std::size_t count = 0;
    Eigen::Vector4d mean_x = Eigen::Vector4d::Zero();
    Eigen::Vector3d mean_y = Eigen::Vector3d::Zero();
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const auto& [latent, image] = pairs[p];
        if (latent.channels() != 4 || image.channels() != 3 || latent.height() != image.height() ||
            latent.width() != image.width()) {
            fail(Errc::shape_mismatch, "fit_colormap: pair " + std::to_string(p) + " has latent " +
                                           to_string(latent.shape()) + " and image " + to_string(image.shape()));
        }
        const std::size_t n = latent.height() * latent.width();
        for (std::size_t i = 0; i < n; ++i) {
            for (int c = 0; c < 4; ++c) {
                mean_x[c] += latent.channel(static_cast<std::size_t>(c))[i];
            }
            for (int c = 0; c < 3; ++c) {
                mean_y[c] += image.channel(static_cast<std::size_t>(c))[i];
            }
        }
        count += n;
    }
    mean_x /= static_cast<double>(count);
    mean_y /= static_cast<double>(count);

    Eigen::Matrix4d cxx = Eigen::Matrix4d::Zero();
    Eigen::Matrix<double, 4, 3> cxy = Eigen::Matrix<double, 4, 3>::Zero();
    for (const auto& [latent, image] : pairs) {
        const std::size_t n = latent.height() * latent.width();
        for (std::size_t i = 0; i < n; ++i) {
            Eigen::Vector4d xv;
            Eigen::Vector3d yv;
            for (int c = 0; c < 4; ++c) {
                xv[c] = latent.channel(static_cast<std::size_t>(c))[i] - mean_x[c];
            }
            for (int c = 0; c < 3; ++c) {
                yv[c] = image.channel(static_cast<std::size_t>(c))[i] - mean_y[c];
            }
            cxx.noalias() += xv * xv.transpose();
            cxy.noalias() += xv * yv.transpose();
        }
    }
    cxx /= static_cast<double>(count);
    cxy /= static_cast<double>(count);

    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> eig(cxx);
    const double largest = eig.eigenvalues().maxCoeff();
    const double smallest = eig.eigenvalues().minCoeff();
    if (!(largest > 0.0) || smallest <= 1e-10 * largest) {
        std::ostringstream msg;
        msg << "fit_colormap: latent design matrix is rank deficient; channel variances [";
        for (int c = 0; c < 4; ++c) {
            msg << (c ? ", " : "") << cxx(c, c);
        }
        msg << "], null direction [";
        const Eigen::Vector4d null_dir = eig.eigenvectors().col(0);
        for (int c = 0; c < 4; ++c) {
            msg << (c ? ", " : "") << null_dir[c];
        }
        msg << "]";
        fail(Errc::singular, msg.str());
    }

    const Eigen::Matrix<double, 4, 3> solution = cxx.ldlt().solve(cxy);
    ColorMap34 map;
    for (int rgb = 0; rgb < 3; ++rgb) {
        double bias = mean_y[rgb];
        for (int c = 0; c < 4; ++c) {
            map.weights[static_cast<std::size_t>(rgb)][static_cast<std::size_t>(c)] = solution(c, rgb);
            bias -= solution(c, rgb) * mean_x[c];
        }
        map.biases[static_cast<std::size_t>(rgb)] = bias;
    }
    return map;
}

std::string colormap_to_json(const ColorMap34& map)
{
    nlohmann::ordered_json j;
    j["weights"] = map.weights;
    j["biases"] = map.biases;
    return j.dump(2) + "\n";
}

ColorMap34 colormap_from_json(std::string_view text)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        fail(Errc::bad_format, std::string("colour map JSON: ") + e.what());
    }
    if (!j.is_object()) {
        fail(Errc::bad_format, "colour map JSON: expected an object");
    }
    for (const auto& [key, value] : j.items()) {
        if (key != "weights" && key != "biases") {
            fail(Errc::bad_format, "colour map JSON: unknown key '" + key + "'");
        }
    }
    ColorMap34 map;
    try {
        const auto& w = j.at("weights");
        const auto& b = j.at("biases");
        if (w.size() != 3 || b.size() != 3) {
            fail(Errc::bad_format, "colour map JSON: weights must be 3x4 and biases 3");
        }
        for (std::size_t r = 0; r < 3; ++r) {
            if (w.at(r).size() != 4) {
                fail(Errc::bad_format, "colour map JSON: weights must be 3x4");
            }
            for (std::size_t c = 0; c < 4; ++c) {
                map.weights[r][c] = w.at(r).at(c).get<double>();
            }
            map.biases[r] = b.at(r).get<double>();
        }
    } catch (const nlohmann::json::exception& e) {
        fail(Errc::bad_format, std::string("colour map JSON: ") + e.what());
    }
    return map;
}

} // namespace noisecine
