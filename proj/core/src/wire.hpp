#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "noisecine/field.hpp"

// Bridge wire format: one JSON header line, then the tensors named in "shapes" as
// little-endian f32, concatenated in order. Schema in docs/bridge_protocol.md.
namespace noisecine::wire {

inline constexpr int kVersion = 1;
inline constexpr std::size_t kMaxHeaderBytes = 1 << 20;
inline constexpr std::size_t kMaxTensorValues = std::size_t{1} << 28;

struct Message {
    std::string op;
    std::uint64_t request_id = 0;
    nlohmann::json meta = nlohmann::json::object();
    std::vector<Shape> shapes;
    std::vector<std::vector<float>> tensors;  // one per shape, filled once the payload is read

    // Response fields.
    bool ok = true;
    std::string error_kind;
    std::string error_message;
};

enum class Direction { request, response };

/// Parses and validates a header line. Throws protocol errors for malformed JSON or schema
/// violations and bad_version for a version other than kVersion.
Message parse_header(const std::string& line, Direction direction);

std::string serialize_header(const Message& message, Direction direction);

std::size_t payload_bytes(const Message& message);

/// Reads one message. Returns nullopt on end of stream before the header; a payload shorter
/// than the header announces throws truncated.
std::optional<Message> read_message(std::istream& in, Direction direction);

/// Writes header and payload and flushes.
void write_message(std::ostream& out, const Message& message, Direction direction);

std::string encode_f32(const std::vector<float>& values);
std::vector<float> decode_f32(const char* bytes, std::size_t count);

template <class Tag>
void push_tensor(Message& message, const Field<Tag>& field)
{
    message.shapes.push_back(field.shape());
    std::vector<float> values(field.size());
    const auto src = field.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] = static_cast<float>(src[i]);
    }
    message.tensors.push_back(std::move(values));
}

template <class Tag>
Field<Tag> tensor_field(const Message& message, std::size_t index)
{
    if (index >= message.tensors.size() || index >= message.shapes.size()) {
        fail(Errc::protocol, "message '" + message.op + "' carries " + std::to_string(message.tensors.size()) +
                                 " tensors, tensor " + std::to_string(index) + " requested");
    }
    const std::vector<float>& values = message.tensors[index];
    std::vector<double> data(values.begin(), values.end());
    return Field<Tag>(message.shapes[index], std::move(data));
}

} // namespace noisecine::wire
