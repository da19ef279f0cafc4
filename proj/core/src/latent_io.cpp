#include "noisecine/latent_io.hpp"

#include <bit>
#include <fstream>
#include <iterator>

namespace noisecine {

namespace {

constexpr char kMagic[4] = {'N', 'C', 'L', 'F'};
constexpr std::size_t kHeaderBytes = 4 + 4 * 4;

void put_u32(std::string& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
    }
}

std::uint32_t get_u32(const std::string& in, std::size_t offset)
{
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
    }
    return v;
}

} // namespace

std::string encode_latent(const LatentField& x)
{
    std::string out;
    out.reserve(kHeaderBytes + 4 * x.size());
    out.append(kMagic, 4);
    put_u32(out, kLatentDumpVersion);
    put_u32(out, static_cast<std::uint32_t>(x.channels()));
    put_u32(out, static_cast<std::uint32_t>(x.height()));
    put_u32(out, static_cast<std::uint32_t>(x.width()));
    for (double v : x.values()) {
        put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
    }
    return out;
}

LatentField decode_latent(const std::string& bytes)
{
    if (bytes.size() < 4 || bytes.compare(0, 4, kMagic, 4) != 0) {
        fail(Errc::bad_magic, "latent dump: bad magic (expected NCLF)");
    }
    if (bytes.size() < kHeaderBytes) {
        fail(Errc::truncated, "latent dump: header truncated");
    }
    const std::uint32_t version = get_u32(bytes, 4);
    if (version != kLatentDumpVersion) {
        fail(Errc::bad_version, "latent dump: unsupported version " + std::to_string(version));
    }
    const Shape shape{get_u32(bytes, 8), get_u32(bytes, 12), get_u32(bytes, 16)};
    if (shape.empty()) {
        fail(Errc::invalid_shape, "latent dump: shape " + to_string(shape) + " has a zero dimension");
    }
    const std::size_t payload = bytes.size() - kHeaderBytes;
    if (payload / 4 < shape.size()) {
        fail(Errc::truncated, "latent dump: payload holds " + std::to_string(payload) + " bytes, header claims " +
                                  std::to_string(4 * shape.size()));
    }
    std::vector<double> values(shape.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] = static_cast<double>(std::bit_cast<float>(get_u32(bytes, kHeaderBytes + 4 * i)));
    }
    return LatentField(shape, std::move(values));
}

void write_latent(const std::filesystem::path& path, const LatentField& x)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        fail(Errc::io, "cannot open " + path.string() + " for writing");
    }
    const std::string bytes = encode_latent(x);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        fail(Errc::io, "write failed: " + path.string());
    }
}

LatentField read_latent(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        fail(Errc::io, "cannot open " + path.string());
    }
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_latent(bytes);
}

} // namespace noisecine
