#pragma once

#include <memory>
#include <mutex>
#include <string>

#include "noisecine/backend.hpp"

namespace noisecine {

/// Backend served by a subprocess speaking the bridge wire protocol over stdin/stdout.
///
/// The command line runs through `sh -c`. The constructor performs the capabilities
/// handshake. Requests are strictly serialized, so the backend always reports
/// concurrency_safe = false. A dead or silent server raises transport errors; malformed or
/// mismatched responses raise protocol errors; error responses carry the server's error
/// kind when it names a known error class.
class BridgeBackend final : public Backend {
public:
    explicit BridgeBackend(const std::string& command);
    ~BridgeBackend() override;

    BridgeBackend(const BridgeBackend&) = delete;
    BridgeBackend& operator=(const BridgeBackend&) = delete;

    BackendCapabilities capabilities() override;
    LatentField encode(const ImageField& image) override;
    ImageField decode(const LatentField& latent) override;
    LatentField add_noise(const LatentField& clean, const LatentField& noise, int level, int total_steps) override;
    LatentField denoise(const LatentField& latent, int from_level, int to_level, int total_steps,
                        ConditioningHandle conditioning) override;
    ConditioningHandle prepare_conditioning(const std::string& prompt, const ImageField* segmap) override;

private:
    struct Session;

    std::unique_ptr<Session> session_;
    std::mutex mutex_;
    BackendCapabilities caps_;
};

} // namespace noisecine
