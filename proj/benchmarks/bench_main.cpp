#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "noisecine/crystal.hpp"
#include "noisecine/flow.hpp"
#include "noisecine/metric.hpp"
#include "noisecine/mock_backend.hpp"
#include "noisecine/pipeline.hpp"
#include "noisecine/rng.hpp"

using namespace noisecine;

namespace {

std::size_t side(const benchmark::State& state)
{
    return static_cast<std::size_t>(state.range(0));
}

void BM_Roll(benchmark::State& state)
{
    const LatentField x = sample_noise({1, Shape{4, side(state), side(state)}});
    for (auto _ : state) {
        benchmark::DoNotOptimize(roll(x, LatticeShift{3, -2}));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.size()));
}
BENCHMARK(BM_Roll)->Arg(64)->Arg(128)->Arg(256);

void BM_Glide(benchmark::State& state)
{
    const std::size_t h = side(state);
    const LatentField x = sample_noise({2, Shape{4, h, h}});
    const RowShiftProfile profile = discretize_shear(static_cast<int>(h / 3), 7, 0, static_cast<int>(h));
    for (auto _ : state) {
        benchmark::DoNotOptimize(glide(x, profile));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.size()));
}
BENCHMARK(BM_Glide)->Arg(64)->Arg(128)->Arg(256);

void BM_Warp(benchmark::State& state)
{
    const std::size_t h = side(state);
    const ImageField img = sample_normal<ImageTag>(3, Shape{3, h, h});
    FlowField flow(h, h, MotionPrimitive{2.0, 3.5, 12.0, 0.0});
    const DisplacementField disp = displacement_at(flow, 5.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(warp_image(img, disp, true, true));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(img.size()));
}
BENCHMARK(BM_Warp)->Arg(256)->Arg(512);

void BM_SliceSmoothness(benchmark::State& state)
{
    const std::size_t width = side(state);
    std::vector<double> data(16 * width);
    for (std::size_t t = 0; t < 16; ++t) {
        for (std::size_t x = 0; x < width; ++x) {
            const double phase = static_cast<double>(x) - 1.5 * static_cast<double>(t);
            data[t * width + x] = 128.0 + 60.0 * std::sin(2.0 * std::numbers::pi * phase / 9.0);
        }
    }
    const XTSlice slice(16, width, std::move(data));
    for (auto _ : state) {
        benchmark::DoNotOptimize(slice_smoothness(slice));
    }
}
BENCHMARK(BM_SliceSmoothness)->Arg(512)->Arg(2048);

void BM_MockCrystal(benchmark::State& state)
{
    MockBackendConfig config;
    config.latent_shape = Shape{4, 32, 32};
    MockBackend backend(config);
    const auto frames = static_cast<std::size_t>(state.range(0));
    std::vector<CrystalTransform> transforms(frames);
    for (std::size_t f = 0; f < frames; ++f) {
        transforms[f].shift = LatticeShift{static_cast<int>(f), 0};
    }
    const PipelineOptions options{true, state.range(1) != 0};
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            generate_crystal(backend, Scene{7, "bench", std::nullopt, std::nullopt}, DenoiseSchedule{}, transforms,
                             options));
    }
}
BENCHMARK(BM_MockCrystal)->Args({4, 0})->Args({16, 0})->Args({16, 1})->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
