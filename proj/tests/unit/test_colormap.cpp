#include <doctest.h>

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "noisecine/colormap.hpp"
#include "noisecine/rng.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace noisecine;
using namespace noisecine::testing;

namespace {

double max_param_error(const ColorMap34& a, const ColorMap34& b)
{
    double worst = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
        for (std::size_t c = 0; c < 4; ++c) {
            worst = std::max(worst, std::fabs(a.weights[k][c] - b.weights[k][c]));
        }
        worst = std::max(worst, std::fabs(a.biases[k] - b.biases[k]));
    }
    return worst;
}

ColorMap34 random_map(Gen& gen)
{
    ColorMap34 map;
    for (auto& row : map.weights) {
        for (double& w : row) {
            w = gen.real(-80.0, 80.0);
        }
    }
    for (double& b : map.biases) {
        b = gen.real(0.0, 255.0);
    }
    return map;
}

} // namespace

TEST_CASE("reference map examples")
{
    const ColorMap34 map = ColorMap34::sd15();
    const ImageField zero = apply_colormap(LatentField(Shape{4, 2, 3}, 0.0), map);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(zero.channel(0)[i] == doctest::Approx(123.54));
        CHECK(zero.channel(1)[i] == doctest::Approx(111.48));
        CHECK(zero.channel(2)[i] == doctest::Approx(98.52));
    }
    LatentField unit(Shape{4, 1, 1}, 0.0);
    unit(0, 0, 0) = 1.0;
    const ImageField one = apply_colormap(unit, map);
    CHECK(one(0, 0, 0) == doctest::Approx(123.54 + 43.89));
    CHECK(one(1, 0, 0) == doctest::Approx(111.48 + 29.65));
    CHECK(one(2, 0, 0) == doctest::Approx(98.52 + 36.27));

    const ImageField black = apply_colormap(sample_noise({3, Shape{4, 4, 4}}), ColorMap34{});
    for (double v : black.values()) {
        CHECK(v == 0.0);
    }
}

TEST_CASE("no reference column is negligible")
{
    const ColorMap34 map = ColorMap34::sd15();
    for (std::size_t c = 0; c < 4; ++c) {
        double biggest = 0.0;
        for (std::size_t k = 0; k < 3; ++k) {
            biggest = std::max(biggest, std::fabs(map.weights[k][c]));
        }
        CHECK(biggest > 5.0);
    }
}

TEST_CASE("shipped data file matches the built-in map")
{
    std::ifstream in(std::string(NOISECINE_SOURCE_DIR) + "/core/data/colormap_sd15.json");
    REQUIRE(in);
    std::stringstream text;
    text << in.rdbuf();
    CHECK(colormap_from_json(text.str()) == ColorMap34::sd15());
}

TEST_CASE("apply_colormap is affine")
{
    Gen gen(31);
    for (int trial = 0; trial < 20; ++trial) {
        const ColorMap34 map = random_map(gen);
        const LatentField x = gen.field<LatentTag>(Shape{4, 5, 6});
        const double a = gen.real(-4.0, 4.0);
        LatentField ax = x;
        for (double& v : ax.values()) {
            v *= a;
        }
        const ImageField lhs = apply_colormap(ax, map);
        const ImageField rhs = apply_colormap(x, map);
        for (std::size_t k = 0; k < 3; ++k) {
            for (std::size_t i = 0; i < 30; ++i) {
                CHECK(std::fabs((lhs.channel(k)[i] - map.biases[k]) - a * (rhs.channel(k)[i] - map.biases[k])) < 1e-6);
            }
        }
    }
    CHECK_THROWS_AS(apply_colormap(LatentField(Shape{3, 2, 2}), ColorMap34::sd15()), Error);
}

TEST_CASE("box_downsample averages blocks")
{
    ImageField img(Shape{1, 2, 4});
    const std::vector<double> v{1, 2, 10, 20, 3, 4, 30, 40};
    std::copy(v.begin(), v.end(), img.values().begin());
    const ImageField out = box_downsample(img, 2);
    CHECK(out.width() == 2);
    CHECK(out(0, 0, 0) == 2.5);
    CHECK(out(0, 0, 1) == 25.0);
    CHECK_THROWS_AS(box_downsample(img, 3), Error);
}

TEST_CASE("noise-free fit recovers the generating map")
{
    Gen gen(32);
    for (int trial = 0; trial < 10; ++trial) {
        const ColorMap34 truth = random_map(gen);
        std::vector<ColormapSample> pairs;
        for (int p = 0; p < 3; ++p) {
            const LatentField x = sample_noise({gen.u64(), Shape{4, 16, 16}});
            pairs.push_back({x, apply_colormap(x, truth)});
        }
        CHECK(max_param_error(fit_colormap(pairs), truth) < 1e-6);
    }
}

TEST_CASE("noisy fit agrees with the normal-equation oracle and the truth")
{
    Gen gen(33);
    const ColorMap34 truth = ColorMap34::sd15();
    std::vector<ColormapSample> pairs;
    // 4 pairs of 160x160 = 102400 pixels.
    for (int p = 0; p < 4; ++p) {
        const LatentField x = sample_noise({gen.u64(), Shape{4, 160, 160}});
        ImageField y = apply_colormap(x, truth);
        const ImageField n = sample_normal<ImageTag>(gen.u64(), y.shape());
        for (std::size_t i = 0; i < y.size(); ++i) {
            y.values()[i] += n.values()[i];
        }
        pairs.push_back({x, y});
    }
    const ColorMap34 fit = fit_colormap(pairs);
    CHECK(max_param_error(fit, truth) < 1e-2);
    const Solution oracle = oracle_fit(pairs);
    for (std::size_t k = 0; k < 3; ++k) {
        for (std::size_t c = 0; c < 4; ++c) {
            CHECK(std::fabs(fit.weights[k][c] - static_cast<double>(oracle[k][c])) < 1e-8);
        }
        CHECK(std::fabs(fit.biases[k] - static_cast<double>(oracle[k][4])) < 1e-8);
    }
}

TEST_CASE("fit errors")
{
    const LatentField flat(Shape{4, 8, 8}, 0.5);
    std::vector<ColormapSample> pairs{{flat, apply_colormap(flat, ColorMap34::sd15())}};
    try {
        fit_colormap(pairs);
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::singular);
    }
    // One channel copying another is also rank deficient.
    LatentField twin = sample_noise({4, Shape{4, 8, 8}});
    for (std::size_t i = 0; i < 64; ++i) {
        twin.channel(3)[i] = twin.channel(1)[i];
    }
    std::vector<ColormapSample> twins{{twin, apply_colormap(twin, ColorMap34::sd15())}};
    try {
        fit_colormap(twins);
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::singular);
    }
    CHECK_THROWS_AS(fit_colormap({}), Error);
    std::vector<ColormapSample> mismatched{{sample_noise({5, Shape{4, 8, 8}}), ImageField(Shape{3, 4, 4})}};
    CHECK_THROWS_AS(fit_colormap(mismatched), Error);
}

TEST_CASE("colour map JSON round trip and validation")
{
    Gen gen(34);
    const ColorMap34 map = random_map(gen);
    CHECK(colormap_from_json(colormap_to_json(map)) == map);
    CHECK_THROWS_AS(colormap_from_json("{"), Error);
    CHECK_THROWS_AS(colormap_from_json("[]"), Error);
    CHECK_THROWS_AS(colormap_from_json(R"({"weights": [[1,2,3,4]], "biases": [1,2,3]})"), Error);
    CHECK_THROWS_AS(colormap_from_json(R"({"weights": [[1,2,3,4],[1,2,3,4],[1,2,3,4]], "biases": [1,2,3], "x": 1})"),
                    Error);
}
