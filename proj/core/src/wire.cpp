#include "wire.hpp"

#include <bit>
#include <istream>
#include <ostream>

namespace noisecine::wire {

namespace {

using nlohmann::json;

[[noreturn]] void bad_header(const std::string& what)
{
    fail(Errc::protocol, "wire header: " + what);
}

Shape parse_shape(const json& j)
{
    if (!j.is_array() || j.size() != 3) {
        bad_header("each shape must be an array [C, H, W]");
    }
    std::size_t dims[3];
    for (std::size_t i = 0; i < 3; ++i) {
        if (!j[i].is_number_unsigned() || j[i].get<std::uint64_t>() == 0) {
            bad_header("shape dimensions must be positive integers");
        }
        dims[i] = j[i].get<std::size_t>();
    }
    const Shape shape{dims[0], dims[1], dims[2]};
    std::size_t values = 1;
    for (std::size_t d : dims) {
        if (d > kMaxTensorValues || values * d > kMaxTensorValues) {
            bad_header("tensor " + to_string(shape) + " exceeds the size limit");
        }
        values *= d;
    }
    return shape;
}

} // namespace

Message parse_header(const std::string& line, Direction direction)
{
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        bad_header("not a JSON object");
    }
    const auto version = j.find("version");
    if (version == j.end()) {
        bad_header("missing \"version\"");
    }
    if (!version->is_number_integer() || version->get<std::int64_t>() != kVersion) {
        fail(Errc::bad_version, "wire header: unsupported version " + version->dump());
    }

    Message m;
    const auto op = j.find("op");
    if (op == j.end() || !op->is_string() || op->get<std::string>().empty()) {
        bad_header("\"op\" must be a non-empty string");
    }
    m.op = op->get<std::string>();

    const auto id = j.find("request_id");
    if (id == j.end() || !id->is_number_unsigned()) {
        bad_header("\"request_id\" must be a non-negative integer");
    }
    m.request_id = id->get<std::uint64_t>();

    const auto shapes = j.find("shapes");
    const auto dtypes = j.find("dtypes");
    if (shapes == j.end() || !shapes->is_array()) {
        bad_header("\"shapes\" must be an array");
    }
    if (dtypes == j.end() || !dtypes->is_array() || dtypes->size() != shapes->size()) {
        bad_header("\"dtypes\" must be an array matching \"shapes\"");
    }
    std::size_t total = 0;
    for (std::size_t i = 0; i < shapes->size(); ++i) {
        if ((*dtypes)[i] != "f32") {
            bad_header("unsupported dtype " + (*dtypes)[i].dump());
        }
        m.shapes.push_back(parse_shape((*shapes)[i]));
        total += m.shapes.back().size();
        if (total > kMaxTensorValues) {
            bad_header("payload exceeds the size limit");
        }
    }

    const auto meta = j.find("meta");
    if (meta != j.end()) {
        if (!meta->is_object()) {
            bad_header("\"meta\" must be an object");
        }
        m.meta = *meta;
    }

    if (direction == Direction::response) {
        const auto ok = j.find("ok");
        if (ok == j.end() || !ok->is_boolean()) {
            bad_header("response needs a boolean \"ok\"");
        }
        m.ok = ok->get<bool>();
        if (!m.ok) {
            const auto error = j.find("error");
            if (error == j.end() || !error->is_object() || !error->contains("kind") || !error->contains("message") ||
                !(*error)["kind"].is_string() || !(*error)["message"].is_string()) {
                bad_header("failed response needs \"error\": {\"kind\", \"message\"}");
            }
            m.error_kind = (*error)["kind"].get<std::string>();
            m.error_message = (*error)["message"].get<std::string>();
        }
    }
    return m;
}

std::string serialize_header(const Message& message, Direction direction)
{
    json j;
    j["version"] = kVersion;
    j["op"] = message.op;
    j["request_id"] = message.request_id;
    json shapes = json::array();
    json dtypes = json::array();
    for (const Shape& s : message.shapes) {
        shapes.push_back({s.channels, s.height, s.width});
        dtypes.push_back("f32");
    }
    j["shapes"] = std::move(shapes);
    j["dtypes"] = std::move(dtypes);
    j["meta"] = message.meta;
    if (direction == Direction::response) {
        j["ok"] = message.ok;
        if (!message.ok) {
            j["error"] = {{"kind", message.error_kind}, {"message", message.error_message}};
        }
    }
    return j.dump();
}

std::size_t payload_bytes(const Message& message)
{
    std::size_t total = 0;
    for (const Shape& s : message.shapes) {
        total += 4 * s.size();
    }
    return total;
}

std::string encode_f32(const std::vector<float>& values)
{
    std::string out(4 * values.size(), '\0');
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(values[i]);
        for (std::size_t b = 0; b < 4; ++b) {
            out[4 * i + b] = static_cast<char>((bits >> (8 * b)) & 0xFFu);
        }
    }
    return out;
}

std::vector<float> decode_f32(const char* bytes, std::size_t count)
{
    std::vector<float> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t bits = 0;
        for (std::size_t b = 0; b < 4; ++b) {
            bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + b])) << (8 * b);
        }
        out[i] = std::bit_cast<float>(bits);
    }
    return out;
}

std::optional<Message> read_message(std::istream& in, Direction direction)
{
    std::string line;
    char ch = 0;
    bool any = false;
    while (in.get(ch)) {
        any = true;
        if (ch == '\n') {
            break;
        }
        if (line.size() >= kMaxHeaderBytes) {
            bad_header("header line longer than " + std::to_string(kMaxHeaderBytes) + " bytes");
        }
        line.push_back(ch);
    }
    if (!any) {
        return std::nullopt;
    }
    if (ch != '\n') {
        fail(Errc::truncated, "wire: stream ended inside a header line");
    }
    Message m = parse_header(line, direction);
    std::string payload(payload_bytes(m), '\0');
    in.read(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (static_cast<std::size_t>(in.gcount()) != payload.size()) {
        fail(Errc::truncated, "wire: payload has " + std::to_string(in.gcount()) + " of " +
                                  std::to_string(payload.size()) + " announced bytes");
    }
    std::size_t offset = 0;
    for (const Shape& s : m.shapes) {
        m.tensors.push_back(decode_f32(payload.data() + offset, s.size()));
        offset += 4 * s.size();
    }
    return m;
}

void write_message(std::ostream& out, const Message& message, Direction direction)
{
    if (message.tensors.size() != message.shapes.size()) {
        fail(Errc::protocol, "wire: message '" + message.op + "' has " + std::to_string(message.shapes.size()) +
                                 " shapes but " + std::to_string(message.tensors.size()) + " tensors");
    }
    for (std::size_t i = 0; i < message.shapes.size(); ++i) {
        if (message.tensors[i].size() != message.shapes[i].size()) {
            fail(Errc::protocol, "wire: tensor " + std::to_string(i) + " does not match its shape");
        }
    }
    const std::string header = serialize_header(message, direction);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.put('\n');
    for (const auto& t : message.tensors) {
        const std::string bytes = encode_f32(t);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    out.flush();
    if (!out) {
        fail(Errc::transport, "wire: write failed");
    }
}

} // namespace noisecine::wire
