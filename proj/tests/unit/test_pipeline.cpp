#include <doctest.h>

#include <cmath>

#include "noisecine/mock_backend.hpp"
#include "noisecine/pipeline.hpp"
#include "noisecine/rng.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace noisecine;
using namespace noisecine::testing;

namespace {

MockBackendConfig mock_config(std::size_t h = 16, std::size_t w = 16)
{
    MockBackendConfig config;
    config.latent_shape = Shape{4, h, w};
    return config;
}

FlowField uniform_flow(std::size_t h, std::size_t w, double px_per_frame, bool wrap = true)
{
    FlowField flow(h, w, MotionPrimitive{0.0, px_per_frame, kConstantVelocity, 0.0});
    flow.wrap_x = wrap;
    flow.wrap_y = wrap;
    return flow;
}

std::vector<CrystalTransform> roll_frames(int count, int dx, int dy)
{
    std::vector<CrystalTransform> out(static_cast<std::size_t>(count));
    for (int f = 0; f < count; ++f) {
        out[static_cast<std::size_t>(f)].shift = LatticeShift{dx * f, dy * f};
    }
    return out;
}

// Forwards to a backend and throws a transport error on the n-th decode.
class FailingBackend final : public Backend {
public:
    FailingBackend(Backend& inner, int fail_on_decode) : inner_(inner), remaining_(fail_on_decode) {}

    BackendCapabilities capabilities() override { return inner_.capabilities(); }
    LatentField encode(const ImageField& image) override { return inner_.encode(image); }
    ImageField decode(const LatentField& latent) override
    {
        if (--remaining_ == 0) {
            fail(Errc::transport, "injected failure");
        }
        return inner_.decode(latent);
    }
    LatentField add_noise(const LatentField& clean, const LatentField& noise, int level, int total_steps) override
    {
        return inner_.add_noise(clean, noise, level, total_steps);
    }
    LatentField denoise(const LatentField& latent, int from, int to, int total, ConditioningHandle c) override
    {
        return inner_.denoise(latent, from, to, total, c);
    }
    ConditioningHandle prepare_conditioning(const std::string& prompt, const ImageField* segmap) override
    {
        return inner_.prepare_conditioning(prompt, segmap);
    }

private:
    Backend& inner_;
    int remaining_;
};

} // namespace

TEST_CASE("crystal single identity frame equals plain generation")
{
    MockBackend backend(mock_config());
    const Scene scene{42, "a lake", std::nullopt, std::nullopt};
    const DenoiseSchedule schedule;
    const auto transforms = roll_frames(1, 0, 0);
    const GenerationResult r = generate_crystal(backend, scene, schedule, transforms);
    REQUIRE(r.frames.size() == 1);
    const ConditioningHandle c = backend.prepare_conditioning(scene.prompt, nullptr);
    const LatentField plain = backend.denoise(sample_noise({42, Shape{4, 16, 16}}), 30, 0, 30, c);
    CHECK(same_bits(r.latents[0], plain));
    CHECK(same_bits(r.frames[0], backend.decode(plain)));
}

TEST_CASE("crystal roll frames are rolled copies of frame 0")
{
    MockBackend backend(mock_config());
    Gen gen(61);
    for (double s : {0.0, 0.3, 0.7, 1.0}) {
        const DenoiseSchedule schedule{30, s};
        const int dx = static_cast<int>(gen.integer(-3, 3));
        const int dy = static_cast<int>(gen.integer(-2, 2));
        const auto transforms = roll_frames(5, dx, dy);
        const Scene scene{gen.u64(), "p", std::nullopt, std::nullopt};
        const GenerationResult r = generate_crystal(backend, scene, schedule, transforms);
        for (std::size_t f = 1; f < 5; ++f) {
            const LatticeShift px{8 * dx * static_cast<int>(f), 8 * dy * static_cast<int>(f)};
            CHECK(max_abs_diff(r.frames[f], roll(r.frames[0], px)) < 1e-6);
        }
    }
}

TEST_CASE("crystal moves the segmap with the latent")
{
    MockBackend backend(mock_config());
    Gen gen(62);
    Scene scene{7, "p", gen.field<ImageTag>(Shape{3, 128, 128}, 0.0, 255.0), std::nullopt};
    const auto transforms = roll_frames(3, 2, 1);
    const GenerationResult r = generate_crystal(backend, scene, DenoiseSchedule{}, transforms);
    for (std::size_t f = 1; f < 3; ++f) {
        const LatticeShift px{16 * static_cast<int>(f), 8 * static_cast<int>(f)};
        CHECK(max_abs_diff(r.frames[f], roll(r.frames[0], px)) < 1e-6);
        CHECK(r.calls.per_frame[f].prepare_conditioning == 1);
    }
    CHECK(r.calls.per_frame[0].prepare_conditioning == 0);

    scene.segmap = ImageField(Shape{3, 64, 64});
    try {
        generate_crystal(backend, scene, DenoiseSchedule{}, transforms);
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::shape_mismatch);
    }
}

TEST_CASE("crystal prefix runs once per generation")
{
    MockBackend inner(mock_config());
    for (int frames : {1, 4, 16}) {
        CountingBackend counting(inner);
        const DenoiseSchedule schedule;
        const auto transforms = roll_frames(frames, 1, 0);
        const GenerationResult r = generate_crystal(counting, Scene{3, "", std::nullopt, std::nullopt}, schedule,
                                                    transforms);
        CHECK(counting.denoise_segment_count(30, schedule.switch_level()) == 1);
        CHECK(counting.denoise_segment_count(schedule.switch_level(), 0) == frames);
        CHECK(counting.denoise_segment_count(1, 0) == 2);
        CHECK(r.calls.prefix_calls == 1);
        CHECK(r.calls.probe_calls == 2);
        CHECK(r.calls.reservoir_prefix_calls == 0);
        CHECK(r.calls.suffix_calls() == frames);
        for (const OpCounts& c : r.calls.per_frame) {
            CHECK(c.denoise == 1);
            CHECK(c.decode == 1);
        }
        CHECK(r.calls.shared.denoise == 3);
    }
}

TEST_CASE("crystal without wrap draws on a reservoir prefix")
{
    MockBackend inner(mock_config());
    CountingBackend counting(inner);
    std::vector<CrystalTransform> transforms(3);
    transforms[1].shift = LatticeShift{2, 0, false, true};
    transforms[2].glide = discretize_shear(4, 3, 0, 16);
    transforms[2].glide->wrap = false;
    const GenerationResult r =
        generate_crystal(counting, Scene{9, "", std::nullopt, std::nullopt}, DenoiseSchedule{}, transforms);
    CHECK(r.calls.reservoir_prefix_calls == 1);
    CHECK(counting.denoise_segment_count(30, 9) == 2);
    CHECK(r.frames.size() == 3);
}

TEST_CASE("crystal rejects bad inputs")
{
    MockBackend backend(mock_config());
    const Scene scene{1, "", std::nullopt, std::nullopt};
    std::vector<CrystalTransform> not_identity(1);
    not_identity[0].shift.dx = 1;
    CHECK_THROWS_AS(generate_crystal(backend, scene, DenoiseSchedule{}, not_identity), Error);
    CHECK_THROWS_AS(generate_crystal(backend, scene, DenoiseSchedule{}, std::vector<CrystalTransform>{}), Error);

    MockBackendConfig config = mock_config();
    config.stochastic = true;
    MockBackend stochastic(config);
    try {
        generate_crystal(stochastic, scene, DenoiseSchedule{}, roll_frames(2, 1, 0));
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::determinism);
    }
}

TEST_CASE("determinism probe catches a backend that lies about determinism")
{
    MockBackendConfig config = mock_config();
    config.stochastic = true;
    MockBackend stochastic(config);
    // Claims determinism but is not.
    class Liar final : public Backend {
    public:
        explicit Liar(Backend& inner) : inner_(inner) {}
        BackendCapabilities capabilities() override
        {
            BackendCapabilities caps = inner_.capabilities();
            caps.deterministic = true;
            return caps;
        }
        LatentField encode(const ImageField& i) override { return inner_.encode(i); }
        ImageField decode(const LatentField& l) override { return inner_.decode(l); }
        LatentField add_noise(const LatentField& a, const LatentField& b, int l, int t) override
        {
            return inner_.add_noise(a, b, l, t);
        }
        LatentField denoise(const LatentField& x, int a, int b, int t, ConditioningHandle c) override
        {
            return inner_.denoise(x, a, b, t, c);
        }
        ConditioningHandle prepare_conditioning(const std::string& p, const ImageField* s) override
        {
            return inner_.prepare_conditioning(p, s);
        }

    private:
        Backend& inner_;
    } liar(stochastic);
    const ConditioningHandle c = liar.prepare_conditioning("", nullptr);
    try {
        verify_backend_determinism(liar, sample_noise({1, Shape{4, 16, 16}}), 30, c);
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::determinism);
    }
    MockBackend honest(mock_config());
    CHECK_NOTHROW(verify_backend_determinism(honest, sample_noise({1, Shape{4, 16, 16}}), 30,
                                             honest.prepare_conditioning("", nullptr)));
}

TEST_CASE("pipelines are deterministic and parallel frames change nothing")
{
    MockBackend backend(mock_config());
    const Scene scene{11, "x", std::nullopt, std::nullopt};
    const auto transforms = roll_frames(6, 1, 1);
    const GenerationResult a = generate_crystal(backend, scene, DenoiseSchedule{}, transforms);
    const GenerationResult b = generate_crystal(backend, scene, DenoiseSchedule{}, transforms);
    const GenerationResult c = generate_crystal(backend, scene, DenoiseSchedule{}, transforms, {true, true});
    for (std::size_t f = 0; f < 6; ++f) {
        CHECK(same_bits(a.frames[f], b.frames[f]));
        CHECK(same_bits(a.frames[f], c.frames[f]));
    }
    const FlowField flow = uniform_flow(128, 128, 3.0);
    LiquidOptions liquid;
    liquid.frames = 4;
    const LiquidResult la = generate_liquid(backend, scene, DenoiseSchedule{}, flow, liquid);
    const LiquidResult lb = generate_liquid(backend, scene, DenoiseSchedule{}, flow, liquid, {true, true});
    for (std::size_t f = 0; f < 4; ++f) {
        CHECK(same_bits(la.generation.frames[f], lb.generation.frames[f]));
    }
}

TEST_CASE("frame errors carry the frame index")
{
    MockBackend inner(mock_config());
    FailingBackend failing(inner, 3);
    try {
        generate_crystal(failing, Scene{1, "", std::nullopt, std::nullopt}, DenoiseSchedule{}, roll_frames(5, 1, 0));
        FAIL("no throw");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::transport);
        REQUIRE(e.frame().has_value());
        CHECK(*e.frame() == 2);
    }
    // Liquid decodes once before the frame loop, so the third decode is frame 1.
    FailingBackend failing_liquid(inner, 3);
    LiquidOptions liquid;
    liquid.frames = 4;
    try {
        generate_liquid(failing_liquid, Scene{1, "", std::nullopt, std::nullopt}, DenoiseSchedule{},
                        uniform_flow(128, 128, 0.0), liquid);
        FAIL("no throw");
    } catch (const Error& e) {
        REQUIRE(e.frame().has_value());
        CHECK(*e.frame() == 1);
    }
}

TEST_CASE("liquid with zero flow repeats frame 0")
{
    MockBackend backend(mock_config());
    LiquidOptions liquid;
    liquid.frames = 5;
    const LiquidResult r = generate_liquid(backend, Scene{5, "", std::nullopt, std::nullopt}, DenoiseSchedule{},
                                           uniform_flow(128, 128, 0.0), liquid);
    for (std::size_t f = 1; f < 5; ++f) {
        CHECK(max_abs_diff(r.generation.frames[f], r.generation.frames[0]) < 1e-5);
    }
}

TEST_CASE("liquid with 8 px per frame is a whole-cell roll")
{
    MockBackend backend(mock_config());
    LiquidOptions liquid;
    liquid.frames = 6;
    const LiquidResult r = generate_liquid(backend, Scene{6, "", std::nullopt, std::nullopt}, DenoiseSchedule{},
                                           uniform_flow(128, 128, 8.0), liquid);
    for (std::size_t f = 1; f < 6; ++f) {
        const ImageField expected = roll(r.generation.frames[0], LatticeShift{8 * static_cast<int>(f), 0});
        CHECK(max_abs_diff(r.generation.frames[f], expected) < 1e-4);
    }
}

TEST_CASE("liquid restores recorded stats on every frame")
{
    MockBackend backend(mock_config());
    FlowField flow(128, 128);
    for (std::size_t y = 0; y < 128; ++y) {
        for (std::size_t x = 0; x < 128; ++x) {
            flow(y, x) = MotionPrimitive{0.01 * static_cast<double>(x), 3.0 + 0.02 * static_cast<double>(y), 12.0,
                                         0.1 * static_cast<double>(y)};
        }
    }
    LiquidOptions liquid;
    liquid.frames = 8;
    liquid.inject_image_strength = 2.0;
    liquid.inject_latent_strength = 0.05;
    liquid.kurtosis = KurtosisSpec{1.2, true};
    const LiquidResult r =
        generate_liquid(backend, Scene{8, "", std::nullopt, std::nullopt}, DenoiseSchedule{}, flow, liquid);
    REQUIRE(r.matched_stats.size() == 8);
    for (std::size_t f = 0; f < 8; ++f) {
        for (std::size_t c = 0; c < 4; ++c) {
            CHECK(std::fabs(r.matched_stats[f].mean[c] - r.recorded_stats[f].mean[c]) < 1e-6);
            CHECK(std::fabs(r.matched_stats[f].std[c] - r.recorded_stats[f].std[c]) < 1e-6);
        }
    }
    CHECK(r.generation.warnings.empty());
}

TEST_CASE("liquid call accounting and warnings")
{
    MockBackend inner(mock_config());
    CountingBackend counting(inner);
    LiquidOptions liquid;
    liquid.frames = 4;
    const DenoiseSchedule schedule{30, 0.4};
    const LiquidResult r = generate_liquid(counting, Scene{1, "", std::nullopt, std::nullopt}, schedule,
                                           uniform_flow(128, 128, 1.0), liquid);
    CHECK(counting.denoise_segment_count(30, schedule.switch_level()) == 1);
    CHECK(counting.denoise_segment_count(schedule.switch_level(), 0) == 4);
    CHECK(r.generation.calls.shared.decode == 1);
    for (const OpCounts& c : r.generation.calls.per_frame) {
        CHECK(c.encode == 1);
        CHECK(c.decode == 1);
        CHECK(c.denoise == 1);
    }
    CHECK(r.generation.warnings.size() == 1);

    CHECK_THROWS_AS(generate_liquid(counting, Scene{1, "", std::nullopt, std::nullopt}, schedule,
                                    uniform_flow(64, 128, 1.0), liquid),
                    Error);
    liquid.frames = 0;
    CHECK_THROWS_AS(generate_liquid(counting, Scene{1, "", std::nullopt, std::nullopt}, schedule,
                                    uniform_flow(128, 128, 1.0), liquid),
                    Error);
}

TEST_CASE("noise canvas reads back the seeded latent")
{
    const LatentField canvas = make_noise_canvas(3, Shape{4, 6, 5}, 8);
    CHECK(canvas.shape() == Shape{4, 48, 40});
    CHECK(same_bits(sample_canvas(canvas, 8), sample_noise({3, Shape{4, 6, 5}})));
    CHECK(same_bits(sample_canvas(roll(canvas, LatticeShift{16, 8}), 8),
                    roll(sample_noise({3, Shape{4, 6, 5}}), LatticeShift{2, 1})));
    CHECK_THROWS_AS(sample_canvas(LatentField(Shape{4, 12, 16}), 8), Error);
}

TEST_CASE("image_to_video examples")
{
    MockBackend backend(mock_config());
    Gen gen(63);
    const ImageField source = gen.field<ImageTag>(Shape{3, 128, 128}, 0.0, 255.0);
    ImageToVideoOptions opts;
    opts.frames = 4;
    opts.seed = 17;

    SUBCASE("strength 0 returns the source")
    {
        opts.strength = 0.0;
        const GenerationResult r = image_to_video(backend, source, uniform_flow(128, 128, 0.0), DenoiseSchedule{}, opts);
        for (const ImageField& f : r.frames) {
            CHECK(max_abs_diff(f, source) < 1e-4);
        }
        CHECK(r.latents.empty());
        CHECK(r.calls.per_frame[0].total() == 0);
    }
    SUBCASE("zero flow gives identical frames")
    {
        opts.strength = 0.6;
        const GenerationResult r = image_to_video(backend, source, uniform_flow(128, 128, 0.0), DenoiseSchedule{}, opts);
        for (std::size_t f = 1; f < 4; ++f) {
            CHECK(same_bits(r.frames[f], r.frames[0]));
        }
        CHECK(r.latents.size() == 4);
    }
    SUBCASE("tracked noise beats frozen noise under uniform motion")
    {
        opts.strength = 0.5;
        for (int v : {8, 11, 13}) {
            const FlowField flow = uniform_flow(128, 128, v);
            opts.track_noise = true;
            const double tracked = compensated_residual(image_to_video(backend, source, flow, {}, opts).frames, v);
            opts.track_noise = false;
            const double frozen = compensated_residual(image_to_video(backend, source, flow, {}, opts).frames, v);
            CHECK(tracked < frozen);
            if (v == 8) {
                CHECK(tracked < 1e-9);
            }
        }
    }
    SUBCASE("errors")
    {
        CHECK_THROWS_AS(image_to_video(backend, ImageField(Shape{3, 100, 128}), uniform_flow(100, 128, 0.0), {}, opts),
                        Error);
        CHECK_THROWS_AS(image_to_video(backend, source, uniform_flow(64, 128, 0.0), {}, opts), Error);
        opts.strength = 1.5;
        CHECK_THROWS_AS(image_to_video(backend, source, uniform_flow(128, 128, 0.0), {}, opts), Error);
    }
}

TEST_CASE("animate_layers examples")
{
    MockBackend backend(mock_config(8, 32));
    Gen gen(64);
    const ImageField background = gen.field<ImageTag>(Shape{3, 64, 256}, 0.0, 255.0);
    const FlowField still = uniform_flow(64, 256, 0.0);
    const Layer bottom{background, Plane(Shape{1, 64, 256}, 1.0), still, 21};
    LayerOptions opts;
    opts.frames = 3;
    opts.strength = 0.2;

    SUBCASE("single opaque layer equals image_to_video")
    {
        const FlowField moving = uniform_flow(64, 256, 5.0);
        const Layer layer{background, Plane(Shape{1, 64, 256}, 1.0), moving, 21};
        const GenerationResult a = animate_layers(backend, std::span(&layer, 1), {}, opts);
        ImageToVideoOptions iv;
        iv.frames = 3;
        iv.strength = 0.2;
        iv.seed = 21;
        const GenerationResult b = image_to_video(backend, background, moving, {}, iv);
        for (std::size_t f = 0; f < 3; ++f) {
            CHECK(same_bits(a.frames[f], b.frames[f]));
        }
    }
    SUBCASE("transparent top layer changes nothing")
    {
        const Layer top{gen.field<ImageTag>(Shape{3, 64, 256}, 0.0, 255.0), Plane(Shape{1, 64, 256}, 0.0),
                        uniform_flow(64, 256, 7.0), 99};
        const std::vector<Layer> both{bottom, top};
        const GenerationResult a = animate_layers(backend, both, {}, opts);
        const GenerationResult b = animate_layers(backend, std::span(&bottom, 1), {}, opts);
        for (std::size_t f = 0; f < 3; ++f) {
            CHECK(same_bits(a.frames[f], b.frames[f]));
        }
    }
    SUBCASE("occluded background re-emerges unchanged")
    {
        // 16x16 px occluder moving 16 px per frame: cells 0-1 at frame 0, 8-9 at frame 4, 16-17 at frame 8.
        Plane alpha(Shape{1, 64, 256}, 0.0);
        ImageField sprite(Shape{3, 64, 256}, 0.0);
        for (std::size_t y = 16; y < 32; ++y) {
            for (std::size_t x = 0; x < 16; ++x) {
                alpha(0, y, x) = 1.0;
                for (std::size_t c = 0; c < 3; ++c) {
                    sprite(c, y, x) = 255.0;
                }
            }
        }
        const std::vector<Layer> layers{bottom, Layer{sprite, alpha, uniform_flow(64, 256, 16.0), 5}};
        opts.frames = 9;
        const DenoiseSchedule schedule;
        const int radius = schedule.level_for_strength(opts.strength);
        REQUIRE(radius == 6);
        const GenerationResult r = animate_layers(backend, layers, schedule, opts);
        bool covered_differs = false;
        for (std::size_t y = 0; y < 64; ++y) {
            for (std::size_t x = 64; x < 80; ++x) {
                for (std::size_t c = 0; c < 3; ++c) {
                    CHECK(r.frames[8](c, y, x) == r.frames[0](c, y, x));
                    covered_differs = covered_differs || r.frames[4](c, y, x) != r.frames[0](c, y, x);
                }
            }
        }
        CHECK(covered_differs);
    }
    SUBCASE("errors")
    {
        Layer bad = bottom;
        bad.alpha = Plane(Shape{1, 32, 256}, 1.0);
        CHECK_THROWS_AS(animate_layers(backend, std::span(&bad, 1), {}, opts), Error);
        CHECK_THROWS_AS(animate_layers(backend, std::span<const Layer>{}, {}, opts), Error);
    }
}

TEST_CASE("composite_seeds examples")
{
    MockBackend backend(mock_config(40, 40));
    const Scene scene{0, "room", std::nullopt, std::nullopt};
    const DenoiseSchedule schedule;
    const ConditioningHandle c = backend.prepare_conditioning("room", nullptr);
    const ImageField fg_only = backend.decode(backend.denoise(sample_noise({10, Shape{4, 40, 40}}), 30, 0, 30, c));
    const ImageField bg_only = backend.decode(backend.denoise(sample_noise({20, Shape{4, 40, 40}}), 30, 0, 30, c));

    CompositeOptions opts{10, 20, Mask(40, 40, true), 0.0};
    CHECK(same_bits(composite_seeds(backend, scene, schedule, opts), fg_only));
    opts.mask = Mask(40, 40, false);
    CHECK(same_bits(composite_seeds(backend, scene, schedule, opts), bg_only));

    // Mask covers cells 5..34; after combining, 30 - round(0.8 * 30) = 6 levels remain.
    Mask square(40, 40);
    for (std::size_t y = 5; y < 35; ++y) {
        for (std::size_t x = 5; x < 35; ++x) {
            square.set(y, x);
        }
    }
    for (double p : {0.0, 0.5, 0.8}) {
        opts.mask = square;
        opts.combine_fraction = p;
        const ImageField out = composite_seeds(backend, scene, schedule, opts);
        const int radius = 30 - static_cast<int>(std::lround(p * 30));
        bool any_checked = false;
        for (std::size_t cy = 0; cy < 40; ++cy) {
            for (std::size_t cx = 0; cx < 40; ++cx) {
                const int inside = std::min({static_cast<int>(cy) - 5, 34 - static_cast<int>(cy),
                                             static_cast<int>(cx) - 5, 34 - static_cast<int>(cx)});
                if (inside < radius) {
                    continue;
                }
                any_checked = true;
                for (std::size_t ch = 0; ch < 3; ++ch) {
                    CHECK(std::fabs(out(ch, cy * 8 + 3, cx * 8 + 3) - fg_only(ch, cy * 8 + 3, cx * 8 + 3)) < 1e-6);
                }
            }
        }
        CHECK(any_checked == (p == 0.8));
    }
    opts.mask = Mask(20, 40);
    CHECK_THROWS_AS(composite_seeds(backend, scene, schedule, opts), Error);
    opts.mask = square;
    opts.combine_fraction = 1.5;
    CHECK_THROWS_AS(composite_seeds(backend, scene, schedule, opts), Error);
}

TEST_CASE("vid2vid examples")
{
    MockBackend backend(mock_config());
    Gen gen(65);
    const ImageField base = gen.field<ImageTag>(Shape{3, 128, 128}, 0.0, 255.0);
    Vid2VidOptions opts;
    opts.strength = 0.5;
    opts.seed = 4;

    SUBCASE("zero flow on a still video gives identical frames")
    {
        const std::vector<ImageField> frames(4, base);
        const std::vector<DisplacementField> flows(3, DisplacementField::uniform(128, 128, 0.0, 0.0));
        const GenerationResult r = vid2vid_tracked(backend, frames, flows, {}, opts);
        for (std::size_t f = 1; f < 4; ++f) {
            CHECK(same_bits(r.frames[f], r.frames[0]));
        }
    }
    SUBCASE("strength 0 passes frames through")
    {
        std::vector<ImageField> frames;
        for (int f = 0; f < 3; ++f) {
            frames.push_back(roll(base, LatticeShift{f, 0}));
        }
        const std::vector<DisplacementField> flows(2, DisplacementField::uniform(128, 128, 1.0, 0.0));
        opts.strength = 0.0;
        const GenerationResult r = vid2vid_tracked(backend, frames, flows, {}, opts);
        for (std::size_t f = 0; f < 3; ++f) {
            CHECK(same_bits(r.frames[f], frames[f]));
        }
    }
    SUBCASE("tracked noise beats frozen noise on a moving video")
    {
        for (int v : {8, 11, 13}) {
            std::vector<ImageField> frames;
            for (int f = 0; f < 5; ++f) {
                frames.push_back(roll(base, LatticeShift{v * f, 0}));
            }
            const std::vector<DisplacementField> flows(4, DisplacementField::uniform(128, 128, v, 0.0));
            opts.track_noise = true;
            const double tracked = compensated_residual(vid2vid_tracked(backend, frames, flows, {}, opts).frames, v);
            opts.track_noise = false;
            const double frozen = compensated_residual(vid2vid_tracked(backend, frames, flows, {}, opts).frames, v);
            CHECK(tracked < frozen);
        }
    }
    SUBCASE("tracked noise beats frozen noise on a still video with uniform flow")
    {
        const std::vector<ImageField> frames(5, base);
        const std::vector<DisplacementField> flows(4, DisplacementField::uniform(128, 128, 8.0, 0.0));
        opts.strength = 0.9;
        opts.track_noise = true;
        const double tracked = compensated_residual(vid2vid_tracked(backend, frames, flows, {}, opts).frames, 8);
        opts.track_noise = false;
        const double frozen = compensated_residual(vid2vid_tracked(backend, frames, flows, {}, opts).frames, 8);
        CHECK(tracked < frozen);
    }
    SUBCASE("flow count must match")
    {
        const std::vector<ImageField> frames(3, base);
        const std::vector<DisplacementField> flows(3, DisplacementField::uniform(128, 128, 0.0, 0.0));
        try {
            vid2vid_tracked(backend, frames, flows, {}, opts);
            FAIL("no throw");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::size);
        }
    }
}

TEST_CASE("tile_noise repeats one tile")
{
    const LatentField canvas = tile_noise(5, Shape{4, 3, 4}, 7, 9);
    const LatentField tile = sample_noise({5, Shape{4, 3, 4}});
    for (std::size_t y = 0; y < 7; ++y) {
        for (std::size_t x = 0; x < 9; ++x) {
            CHECK(canvas(2, y, x) == tile(2, y % 3, x % 4));
        }
    }
}

TEST_CASE("seamless_upscale examples")
{
    MockBackend backend(mock_config());
    Gen gen(66);
    const ImageField source = gen.field<ImageTag>(Shape{3, 128, 256}, 0.0, 255.0);
    const LatentField canvas = sample_noise({8, Shape{4, 16, 32}});
    UpscaleOptions opts;
    opts.strength = 0.07;  // level 2
    const DenoiseSchedule schedule;
    const int radius = schedule.level_for_strength(opts.strength);
    REQUIRE(radius == 2);

    SUBCASE("identical windows give identical outputs")
    {
        const std::vector<UpscaleWindow> windows{{64, 0}, {64, 0}};
        const GenerationResult r = seamless_upscale(backend, canvas, source, windows, schedule, opts);
        CHECK(same_bits(r.frames[0], r.frames[1]));
    }
    SUBCASE("half-overlapping windows agree in the overlap only with tracked noise")
    {
        const std::vector<UpscaleWindow> windows{{0, 0}, {64, 0}};
        auto overlap_diff = [&](NoisePlacement placement) {
            opts.placement = placement;
            const GenerationResult r = seamless_upscale(backend, canvas, source, windows, schedule, opts);
            double worst = 0.0;
            double sum = 0.0;
            std::size_t n = 0;
            // Window A cells 8..15 meet window B cells 0..7; keep cells at least `radius` from both windows' edges.
            for (std::size_t cy = static_cast<std::size_t>(radius); cy + static_cast<std::size_t>(radius) < 16; ++cy) {
                for (std::size_t cx = 8 + static_cast<std::size_t>(radius); cx + static_cast<std::size_t>(radius) < 16;
                     ++cx) {
                    for (std::size_t c = 0; c < 3; ++c) {
                        const double d = std::fabs(r.frames[0](c, cy * 8, cx * 8) - r.frames[1](c, cy * 8, cx * 8 - 64));
                        worst = std::max(worst, d);
                        sum += d;
                        ++n;
                    }
                }
            }
            REQUIRE(n > 0);
            return std::pair{worst, sum / static_cast<double>(n)};
        };
        CHECK(overlap_diff(NoisePlacement::tracked).first <= 1e-6);
        CHECK(overlap_diff(NoisePlacement::stamped).second > 0.1);
    }
    SUBCASE("windows past the canvas wrap into the tiling")
    {
        ImageField periodic(Shape{3, 128, 256});
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t y = 0; y < 128; ++y) {
                for (std::size_t x = 0; x < 256; ++x) {
                    periodic(c, y, x) = source(c, y, x % 128);
                }
            }
        }
        const LatentField tile = tile_noise(8, Shape{4, 16, 16}, 16, 16);
        const std::vector<UpscaleWindow> windows{{0, 0}, {128, 0}};
        const GenerationResult r = seamless_upscale(backend, tile, periodic, windows, schedule, opts);
        CHECK(same_bits(r.frames[0], r.frames[1]));
    }
    SUBCASE("errors")
    {
        const std::vector<UpscaleWindow> misaligned{{4, 0}};
        try {
            seamless_upscale(backend, canvas, source, misaligned, schedule, opts);
            FAIL("no throw");
        } catch (const Error& e) {
            CHECK(e.code() == Errc::alignment);
        }
        const std::vector<UpscaleWindow> outside{{136, 0}};
        CHECK_THROWS_AS(seamless_upscale(backend, canvas, source, outside, schedule, opts), Error);
        CHECK_THROWS_AS(seamless_upscale(backend, canvas, source, std::vector<UpscaleWindow>{}, schedule, opts), Error);
    }
}
