#include "noisecine/mock_backend.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "noisecine/rng.hpp"

namespace noisecine {

namespace {

LatentField blur3x3_circular(const LatentField& x)
{
    const auto h = static_cast<std::ptrdiff_t>(x.height());
    const auto w = static_cast<std::ptrdiff_t>(x.width());
    LatentField out(x.shape());
    for (std::size_t c = 0; c < x.channels(); ++c) {
        for (std::ptrdiff_t y = 0; y < h; ++y) {
            for (std::ptrdiff_t xx = 0; xx < w; ++xx) {
                double sum = 0.0;
                for (std::ptrdiff_t dy = -1; dy <= 1; ++dy) {
                    for (std::ptrdiff_t dx = -1; dx <= 1; ++dx) {
                        sum += x(c, wrap_index(y + dy, h), wrap_index(xx + dx, w));
                    }
                }
                out(c, y, xx) = sum / 9.0;
            }
        }
    }
    return out;
}

} // namespace

MockBackend::MockBackend(MockBackendConfig config) : config_(std::move(config))
{
    if (config_.latent_shape.channels != 4) {
        fail(Errc::invalid_shape, "mock backend: latent must have 4 channels");
    }
    Eigen::Matrix<double, 3, 4> weights;
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 4; ++c) {
            weights(r, c) = config_.colormap.weights[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
        }
    }
    const Eigen::Matrix3d gram = weights * weights.transpose();
    if (std::abs(gram.determinant()) < 1e-9) {
        fail(Errc::singular, "mock backend: colour map weights are not full rank");
    }
    const Eigen::Matrix<double, 4, 3> pinv = weights.transpose() * gram.inverse();
    for (int c = 0; c < 4; ++c) {
        for (int r = 0; r < 3; ++r) {
            inverse_[static_cast<std::size_t>(c)][static_cast<std::size_t>(r)] = pinv(c, r);
        }
    }
}

BackendCapabilities MockBackend::capabilities()
{
    return BackendCapabilities{!config_.stochastic, true, config_.latent_shape, config_.scale_factor};
}

LatentField MockBackend::encode(const ImageField& image)
{
    if (image.channels() != 3) {
        fail(Errc::invalid_shape, "mock encode: expected RGB, got " + to_string(image.shape()));
    }
    const ImageField small = box_downsample(image, config_.scale_factor);
    LatentField out(Shape{4, small.height(), small.width()});
    const std::size_t n = small.height() * small.width();
    for (std::size_t c = 0; c < 4; ++c) {
        auto dst = out.channel(c);
        for (std::size_t i = 0; i < n; ++i) {
            double v = 0.0;
            for (std::size_t r = 0; r < 3; ++r) {
                v += inverse_[c][r] * (small.channel(r)[i] - config_.colormap.biases[r]);
            }
            dst[i] = v;
        }
    }
    return out;
}

ImageField MockBackend::decode(const LatentField& latent)
{
    const ImageField small = apply_colormap(latent, config_.colormap);
    const std::size_t f = config_.scale_factor;
    ImageField out(Shape{3, small.height() * f, small.width() * f});
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t y = 0; y < out.height(); ++y) {
            for (std::size_t x = 0; x < out.width(); ++x) {
                out(c, y, x) = small(c, y / f, x / f);
            }
        }
    }
    return out;
}

LatentField MockBackend::add_noise(const LatentField& clean, const LatentField& noise, int level, int total_steps)
{
    require_same_shape(clean, noise, "mock add_noise");
    const double ab = alpha_bar(level, total_steps);
    const double signal = std::sqrt(ab);
    const double sigma = std::sqrt(1.0 - ab);
    LatentField out(clean.shape());
    auto dst = out.values();
    const auto x0 = clean.values();
    const auto n = noise.values();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = signal * x0[i] + sigma * n[i];
    }
    return out;
}

MockBackend::Conditioning MockBackend::lookup(ConditioningHandle handle)
{
    std::lock_guard lock(mutex_);
    const auto it = conditionings_.find(handle.id);
    if (it == conditionings_.end()) {
        fail(Errc::invalid_argument, "mock backend: unknown conditioning handle " + std::to_string(handle.id));
    }
    return it->second;
}

LatentField MockBackend::denoise(const LatentField& latent, int from_level, int to_level, int total_steps,
                                 ConditioningHandle conditioning)
{
    if (from_level < to_level) {
        fail(Errc::out_of_range, "mock denoise: from level " + std::to_string(from_level) + " below to level " +
                                     std::to_string(to_level));
    }
    alpha_bar(from_level, total_steps);
    alpha_bar(to_level, total_steps);
    const Conditioning cond = lookup(conditioning);
    if (cond.structure && cond.structure->shape() != latent.shape()) {
        fail(Errc::shape_mismatch, "mock denoise: conditioning structure " + to_string(cond.structure->shape()) +
                                       " does not match latent " + to_string(latent.shape()));
    }
    LatentField x = latent;
    for (int level = from_level; level > to_level; --level) {
        const LatentField blurred = blur3x3_circular(x);
        for (std::size_t c = 0; c < x.channels(); ++c) {
            const double bias = cond.channel_bias[c % cond.channel_bias.size()];
            auto dst = x.channel(c);
            const auto soft = blurred.channel(c);
            for (std::size_t i = 0; i < dst.size(); ++i) {
                const double target = bias + (cond.structure ? cond.structure->channel(c)[i] : 0.0);
                dst[i] += config_.blur_mix * (soft[i] - dst[i]) + config_.conditioning_pull * (target - dst[i]);
            }
        }
    }
    if (config_.stochastic && from_level != to_level) {
        std::uint64_t call;
        {
            std::lock_guard lock(mutex_);
            call = ++denoise_calls_;
        }
        const LatentField jitter = sample_normal<LatentTag>(derive_seed(call, "mock-jitter"), x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) {
            x.values()[i] += 1e-3 * jitter.values()[i];
        }
    }
    return x;
}

ConditioningHandle MockBackend::prepare_conditioning(const std::string& prompt, const ImageField* segmap)
{
    Conditioning cond;
    NormalSampler sampler(derive_seed(0, prompt));
    for (std::size_t c = 0; c < 4; ++c) {
        cond.channel_bias.push_back(0.25 * sampler.next());
    }
    if (segmap != nullptr) {
        cond.structure = encode(*segmap);
    }
    std::lock_guard lock(mutex_);
    const ConditioningHandle handle{next_handle_++};
    conditionings_.emplace(handle.id, std::move(cond));
    return handle;
}

} // namespace noisecine
