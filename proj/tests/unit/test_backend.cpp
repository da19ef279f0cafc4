#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "noisecine/backend.hpp"
#include "noisecine/crystal.hpp"
#include "noisecine/mock_backend.hpp"
#include "noisecine/rng.hpp"
#include "test_support.hpp"

using namespace noisecine;
using noisecine::testing::Gen;
using noisecine::testing::max_abs_diff;
using noisecine::testing::same_bits;

namespace {

long double oracle_alpha_bar(int timestep)
{
    long double product = 1.0L;
    const long double lo = std::sqrt(0.00085L);
    const long double hi = std::sqrt(0.012L);
    for (int i = 0; i <= timestep; ++i) {
        const long double root = lo + (hi - lo) * static_cast<long double>(i) / 999.0L;
        product *= 1.0L - root * root;
    }
    return product;
}

std::size_t circular_distance(std::size_t a, std::size_t b, std::size_t n)
{
    const std::size_t d = a > b ? a - b : b - a;
    return std::min(d, n - d);
}

MockBackendConfig small_config(std::size_t h = 12, std::size_t w = 16)
{
    MockBackendConfig config;
    config.latent_shape = Shape{4, h, w};
    return config;
}

} // namespace

TEST_CASE("schedule levels")
{
    const DenoiseSchedule schedule;
    CHECK(schedule.steps == 30);
    CHECK(schedule.switch_step() == 21);
    CHECK(schedule.switch_level() == 9);
    CHECK(DenoiseSchedule{30, 0.0}.switch_level() == 30);
    CHECK(DenoiseSchedule{30, 1.0}.switch_level() == 0);
    CHECK(DenoiseSchedule{10, 0.25}.switch_step() == 3);
    CHECK(schedule.level_for_strength(0.0) == 0);
    CHECK(schedule.level_for_strength(1.0) == 30);
    CHECK(schedule.level_for_strength(0.5) == 15);
    CHECK_THROWS_AS(schedule.level_for_strength(1.5), Error);
    CHECK_THROWS_AS((DenoiseSchedule{0, 0.5}.validate()), Error);
    CHECK_THROWS_AS((DenoiseSchedule{30, -0.1}.validate()), Error);
}

TEST_CASE("timesteps are strictly decreasing and match leading spacing")
{
    for (int steps : {1, 7, 30, 50, 1000}) {
        const std::vector<int> ts = DenoiseSchedule{steps, 0.5}.timesteps();
        REQUIRE(ts.size() == static_cast<std::size_t>(steps));
        CHECK(ts.back() == (steps == 1000 ? 0 : 1));
        for (std::size_t i = 1; i < ts.size(); ++i) {
            CHECK(ts[i] < ts[i - 1]);
        }
        CHECK(ts.front() < kTrainTimesteps);
    }
    CHECK(DenoiseSchedule{30, 0.5}.timesteps().front() == 958);
    CHECK(train_timestep(0, 30) == -1);
    CHECK_THROWS_AS(train_timestep(31, 30), Error);
}

TEST_CASE("alpha_bar follows the scaled-linear table")
{
    CHECK(alpha_bar(0, 30) == 1.0);
    CHECK(alpha_bar(1, 1000) == doctest::Approx(static_cast<double>(oracle_alpha_bar(0))).epsilon(1e-12));
    CHECK(alpha_bar(1000, 1000) == doctest::Approx(static_cast<double>(oracle_alpha_bar(999))).epsilon(1e-12));
    for (int steps : {10, 30, 50}) {
        double previous = 1.0;
        for (int level = 1; level <= steps; ++level) {
            const double ab = alpha_bar(level, steps);
            CHECK(ab == doctest::Approx(static_cast<double>(oracle_alpha_bar(train_timestep(level, steps))))
                            .epsilon(1e-12));
            CHECK(ab < previous);
            previous = ab;
        }
    }
    CHECK(static_cast<double>(oracle_alpha_bar(999)) == doctest::Approx(0.0047).epsilon(0.05));
}

TEST_CASE("mock denoise honours the identity segment")
{
    MockBackend backend(small_config());
    const ConditioningHandle c = backend.prepare_conditioning("a", nullptr);
    const LatentField x = sample_noise({1, Shape{4, 12, 16}});
    for (int level : {0, 5, 30}) {
        CHECK(same_bits(backend.denoise(x, level, level, 30, c), x));
    }
    CHECK_THROWS_AS(backend.denoise(x, 3, 5, 30, c), Error);
    CHECK_THROWS_AS(backend.denoise(x, 5, 3, 30, ConditioningHandle{999}), Error);
}

TEST_CASE("mock denoise segments compose")
{
    MockBackend backend(small_config());
    const ConditioningHandle c = backend.prepare_conditioning("b", nullptr);
    const LatentField x = sample_noise({2, Shape{4, 12, 16}});
    const LatentField whole = backend.denoise(x, 30, 0, 30, c);
    const LatentField split = backend.denoise(backend.denoise(x, 30, 9, 30, c), 9, 0, 30, c);
    CHECK(same_bits(whole, split));
}

TEST_CASE("mock decode of encode is the block mean")
{
    MockBackend backend(small_config());
    Gen gen(51);
    const ImageField img = gen.field<ImageTag>(Shape{3, 96, 128}, 0.0, 255.0);
    const ImageField back = backend.decode(backend.encode(img));
    const ImageField means = box_downsample(img, 8);
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t y = 0; y < 96; ++y) {
            for (std::size_t x = 0; x < 128; ++x) {
                CHECK(std::fabs(back(c, y, x) - means(c, y / 8, x / 8)) < 1e-5);
            }
        }
    }
    CHECK_THROWS_AS(backend.encode(ImageField(Shape{3, 12, 16})), Error);
    CHECK_THROWS_AS(backend.encode(ImageField(Shape{1, 16, 16})), Error);
}

TEST_CASE("every mock op commutes with matching rolls")
{
    MockBackend backend(small_config());
    Gen gen(52);
    for (int trial = 0; trial < 10; ++trial) {
        const LatticeShift latent_shift{static_cast<int>(gen.integer(-20, 20)), static_cast<int>(gen.integer(-20, 20))};
        const LatticeShift image_shift{latent_shift.dx * 8, latent_shift.dy * 8};
        const ImageField img = gen.field<ImageTag>(Shape{3, 96, 128}, 0.0, 255.0);
        const LatentField x = sample_noise({gen.u64(), Shape{4, 12, 16}});
        const LatentField n = sample_noise({gen.u64(), Shape{4, 12, 16}});

        CHECK(max_abs_diff(backend.encode(roll(img, image_shift)), roll(backend.encode(img), latent_shift)) < 1e-6);
        CHECK(max_abs_diff(backend.decode(roll(x, latent_shift)), roll(backend.decode(x), image_shift)) < 1e-6);
        CHECK(max_abs_diff(backend.add_noise(roll(x, latent_shift), roll(n, latent_shift), 12, 30),
                           roll(backend.add_noise(x, n, 12, 30), latent_shift)) < 1e-6);

        const ConditioningHandle plain = backend.prepare_conditioning("p", nullptr);
        CHECK(max_abs_diff(backend.denoise(roll(x, latent_shift), 20, 3, 30, plain),
                           roll(backend.denoise(x, 20, 3, 30, plain), latent_shift)) < 1e-6);

        const ConditioningHandle seg = backend.prepare_conditioning("p", &img);
        const ImageField rolled_img = roll(img, image_shift);
        const ConditioningHandle seg_rolled = backend.prepare_conditioning("p", &rolled_img);
        CHECK(max_abs_diff(backend.denoise(roll(x, latent_shift), 20, 3, 30, seg_rolled),
                           roll(backend.denoise(x, 20, 3, 30, seg), latent_shift)) < 1e-6);
    }
}

TEST_CASE("a k-level denoise spreads a change by at most k cells")
{
    MockBackend backend(small_config(20, 20));
    const ConditioningHandle c = backend.prepare_conditioning("", nullptr);
    const LatentField x = sample_noise({3, Shape{4, 20, 20}});
    LatentField poked = x;
    poked(1, 4, 17) += 1.0;
    for (int k : {1, 3, 5}) {
        const LatentField a = backend.denoise(x, k, 0, 30, c);
        const LatentField b = backend.denoise(poked, k, 0, 30, c);
        for (std::size_t ch = 0; ch < 4; ++ch) {
            for (std::size_t y = 0; y < 20; ++y) {
                for (std::size_t xx = 0; xx < 20; ++xx) {
                    const std::size_t d = std::max(circular_distance(y, 4, 20), circular_distance(xx, 17, 20));
                    const bool touched = a(ch, y, xx) != b(ch, y, xx);
                    if (d > static_cast<std::size_t>(k) || ch != 1) {
                        CHECK_FALSE(touched);
                    }
                    if (d <= static_cast<std::size_t>(k) && ch == 1) {
                        CHECK(touched);
                    }
                }
            }
        }
    }
}

TEST_CASE("mock conditioning depends on prompt and segmap")
{
    MockBackend backend(small_config());
    const LatentField x = sample_noise({4, Shape{4, 12, 16}});
    const ConditioningHandle a = backend.prepare_conditioning("cat", nullptr);
    const ConditioningHandle a2 = backend.prepare_conditioning("cat", nullptr);
    const ConditioningHandle b = backend.prepare_conditioning("dog", nullptr);
    CHECK(a != a2);
    CHECK(same_bits(backend.denoise(x, 10, 0, 30, a), backend.denoise(x, 10, 0, 30, a2)));
    CHECK_FALSE(same_bits(backend.denoise(x, 10, 0, 30, a), backend.denoise(x, 10, 0, 30, b)));
    const ImageField wrong(Shape{3, 64, 64});
    const ConditioningHandle bad = backend.prepare_conditioning("cat", &wrong);
    CHECK_THROWS_AS(backend.denoise(x, 10, 0, 30, bad), Error);
}

TEST_CASE("mock capabilities and stochastic mode")
{
    MockBackend det(small_config());
    CHECK(det.capabilities().deterministic);
    CHECK(det.capabilities().concurrency_safe);
    CHECK(det.capabilities().latent_shape == Shape{4, 12, 16});

    MockBackendConfig config = small_config();
    config.stochastic = true;
    MockBackend noisy(config);
    CHECK_FALSE(noisy.capabilities().deterministic);
    const ConditioningHandle c = noisy.prepare_conditioning("", nullptr);
    const LatentField x = sample_noise({5, Shape{4, 12, 16}});
    CHECK_FALSE(same_bits(noisy.denoise(x, 1, 0, 30, c), noisy.denoise(x, 1, 0, 30, c)));
    CHECK(same_bits(noisy.denoise(x, 4, 4, 30, c), x));

    MockBackendConfig bad;
    bad.latent_shape = Shape{3, 8, 8};
    CHECK_THROWS_AS(MockBackend{bad}, Error);
}

TEST_CASE("add_noise interpolates by alpha_bar")
{
    MockBackend backend(small_config());
    const LatentField x = sample_noise({6, Shape{4, 12, 16}});
    const LatentField n = sample_noise({7, Shape{4, 12, 16}});
    CHECK(same_bits(backend.add_noise(x, n, 0, 30), x));
    const double ab = alpha_bar(30, 30);
    const LatentField y = backend.add_noise(x, n, 30, 30);
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(y.values()[i] == doctest::Approx(std::sqrt(ab) * x.values()[i] + std::sqrt(1 - ab) * n.values()[i]));
    }
    CHECK_THROWS_AS(backend.add_noise(x, sample_noise({7, Shape{4, 12, 15}}), 3, 30), Error);
}

TEST_CASE("counting backend forwards and tallies")
{
    MockBackend inner(small_config());
    CountingBackend counting(inner);
    const ConditioningHandle c = counting.prepare_conditioning("", nullptr);
    const LatentField x = sample_noise({8, Shape{4, 12, 16}});
    const LatentField direct = inner.denoise(x, 30, 9, 30, c);
    CHECK(same_bits(counting.denoise(x, 30, 9, 30, c), direct));
    counting.denoise(x, 30, 9, 30, c);
    counting.denoise(x, 9, 0, 30, c);
    const ImageField img = counting.decode(x);
    counting.encode(img);
    counting.add_noise(x, x, 3, 30);

    const OpCounts counts = counting.counts();
    CHECK(counts.denoise == 3);
    CHECK(counts.decode == 1);
    CHECK(counts.encode == 1);
    CHECK(counts.add_noise == 1);
    CHECK(counts.prepare_conditioning == 1);
    CHECK(counts.total() == 7);
    CHECK(counting.denoise_segment_count(30, 9) == 2);
    CHECK(counting.denoise_segment_count(9, 0) == 1);
    CHECK(counting.denoise_segment_count(1, 0) == 0);
    CHECK(counting.capabilities().concurrency_safe);
    counting.reset();
    CHECK(counting.counts() == OpCounts{});

    OpCounts sum;
    sum += counts;
    sum += counts;
    CHECK(sum.denoise == 6);
}
