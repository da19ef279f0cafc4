#include "noisecine/bridge_backend.hpp"

#include <boost/process.hpp>

#include <chrono>
#include <csignal>

#include "wire.hpp"

namespace noisecine {

namespace bp = boost::process;

struct BridgeBackend::Session {
    bp::opstream to_server;
    bp::ipstream from_server;
    bp::child child;
    std::uint64_t next_id = 1;
    std::string command;
    bool broken = false;  // stream position unknown after a transport or protocol failure

    explicit Session(const std::string& cmd)
        : child(bp::search_path("sh"), "-c", cmd, bp::std_in < to_server, bp::std_out > from_server), command(cmd)
    {
    }

    std::string exit_note()
    {
        std::error_code ec;
        if (!child.running(ec) && !ec) {
            return " (server exited with status " + std::to_string(child.exit_code()) + ")";
        }
        return "";
    }

    wire::Message call(wire::Message request)
    {
        if (broken) {
            fail(Errc::transport, "bridge: session unusable after an earlier failure");
        }
        request.request_id = next_id++;
        try {
            wire::write_message(to_server, request, wire::Direction::request);
        } catch (const Error&) {
            broken = true;
            fail(Errc::transport, "bridge: could not send '" + request.op + "'" + exit_note());
        }
        std::optional<wire::Message> response;
        try {
            response = wire::read_message(from_server, wire::Direction::response);
        } catch (const Error& e) {
            broken = true;
            if (e.code() == Errc::truncated) {
                fail(Errc::transport, "bridge: connection lost mid-response to '" + request.op + "'" + exit_note());
            }
            fail(Errc::protocol, std::string("bridge: bad response to '") + request.op + "': " + e.what());
        }
        if (!response) {
            broken = true;
            fail(Errc::transport, "bridge: server closed the connection before answering '" + request.op + "'" +
                                      exit_note());
        }
        if (response->request_id != request.request_id) {
            broken = true;
            fail(Errc::protocol, "bridge: response id " + std::to_string(response->request_id) +
                                     " does not match request id " + std::to_string(request.request_id));
        }
        if (response->op != request.op) {
            fail(Errc::protocol, "bridge: response op '" + response->op + "' does not match request '" + request.op +
                                     "'");
        }
        if (!response->ok) {
            for (int c = 0; c <= static_cast<int>(Errc::validation); ++c) {
                const auto code = static_cast<Errc>(c);
                if (to_string(code) == response->error_kind) {
                    fail(code, "bridge: " + response->error_message);
                }
            }
            fail(Errc::protocol,
                 "bridge: server error '" + response->error_kind + "' on '" + request.op + "': " + response->error_message);
        }
        return std::move(*response);
    }
};

namespace {

wire::Message request(const std::string& op)
{
    wire::Message m;
    m.op = op;
    return m;
}

template <class Json>
int meta_int(const Json& meta, const char* key)
{
    const auto it = meta.find(key);
    if (it == meta.end() || !it->is_number_integer()) {
        fail(Errc::protocol, std::string("bridge: response meta lacks integer \"") + key + "\"");
    }
    return it->template get<int>();
}

template <class Tag>
Field<Tag> single_tensor(const wire::Message& response)
{
    if (response.tensors.size() != 1) {
        fail(Errc::protocol, "bridge: '" + response.op + "' must return exactly one tensor, got " +
                                 std::to_string(response.tensors.size()));
    }
    return wire::tensor_field<Tag>(response, 0);
}

} // namespace

BridgeBackend::BridgeBackend(const std::string& command)
{
    if (command.empty()) {
        fail(Errc::invalid_argument, "bridge: empty command line");
    }
    // A server that dies mid-write must surface as a transport error, not kill the engine.
    std::signal(SIGPIPE, SIG_IGN);
    try {
        session_ = std::make_unique<Session>(command);
    } catch (const std::exception& e) {
        fail(Errc::transport, std::string("bridge: could not launch '") + command + "': " + e.what());
    }
    const wire::Message response = session_->call(request("capabilities"));
    const auto& meta = response.meta;
    const auto shape = meta.find("latent_shape");
    if (shape == meta.end() || !shape->is_array() || shape->size() != 3) {
        fail(Errc::protocol, "bridge: capabilities lack latent_shape [C, H, W]");
    }
    for (const auto& d : *shape) {
        if (!d.is_number_unsigned() || d.get<std::uint64_t>() == 0) {
            fail(Errc::protocol, "bridge: latent_shape entries must be positive integers");
        }
    }
    const int scale = meta_int(meta, "scale_factor");
    if (scale <= 0) {
        fail(Errc::protocol, "bridge: scale_factor must be positive");
    }
    const auto deterministic = meta.find("deterministic");
    if (deterministic == meta.end() || !deterministic->is_boolean()) {
        fail(Errc::protocol, "bridge: capabilities lack boolean \"deterministic\"");
    }
    caps_.deterministic = deterministic->get<bool>();
    caps_.concurrency_safe = false;
    caps_.latent_shape = Shape{(*shape)[0].get<std::size_t>(), (*shape)[1].get<std::size_t>(),
                               (*shape)[2].get<std::size_t>()};
    caps_.scale_factor = static_cast<std::size_t>(scale);
}

BridgeBackend::~BridgeBackend()
{
    if (!session_) {
        return;
    }
    std::error_code ec;
    session_->to_server.pipe().close();
    if (!session_->child.wait_for(std::chrono::seconds(5), ec)) {
        session_->child.terminate(ec);
    }
}

BackendCapabilities BridgeBackend::capabilities()
{
    return caps_;
}

LatentField BridgeBackend::encode(const ImageField& image)
{
    wire::Message m = request("encode");
    wire::push_tensor(m, image);
    std::lock_guard lock(mutex_);
    return single_tensor<LatentTag>(session_->call(std::move(m)));
}

ImageField BridgeBackend::decode(const LatentField& latent)
{
    wire::Message m = request("decode");
    wire::push_tensor(m, latent);
    std::lock_guard lock(mutex_);
    return single_tensor<ImageTag>(session_->call(std::move(m)));
}

LatentField BridgeBackend::add_noise(const LatentField& clean, const LatentField& noise, int level, int total_steps)
{
    wire::Message m = request("add_noise");
    wire::push_tensor(m, clean);
    wire::push_tensor(m, noise);
    m.meta = {{"level", level}, {"total_steps", total_steps}};
    std::lock_guard lock(mutex_);
    return single_tensor<LatentTag>(session_->call(std::move(m)));
}

LatentField BridgeBackend::denoise(const LatentField& latent, int from_level, int to_level, int total_steps,
                                   ConditioningHandle conditioning)
{
    wire::Message m = request("denoise");
    wire::push_tensor(m, latent);
    m.meta = {{"from_level", from_level},
              {"to_level", to_level},
              {"total_steps", total_steps},
              {"conditioning", conditioning.id}};
    std::lock_guard lock(mutex_);
    return single_tensor<LatentTag>(session_->call(std::move(m)));
}

ConditioningHandle BridgeBackend::prepare_conditioning(const std::string& prompt, const ImageField* segmap)
{
    wire::Message m = request("prepare_conditioning");
    if (segmap != nullptr) {
        wire::push_tensor(m, *segmap);
    }
    m.meta = {{"prompt", prompt}};
    std::lock_guard lock(mutex_);
    const wire::Message response = session_->call(std::move(m));
    const auto handle = response.meta.find("handle");
    if (handle == response.meta.end() || !handle->is_number_unsigned()) {
        fail(Errc::protocol, "bridge: prepare_conditioning response lacks an integer handle");
    }
    return ConditioningHandle{handle->get<std::uint64_t>()};
}

} // namespace noisecine
