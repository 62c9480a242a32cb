#include "opicl/io/container.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "opicl/errors.hpp"

namespace opicl::io {

namespace {

constexpr std::size_t kMagicLen = 6;

std::uint64_t to_little(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        std::uint64_t r = 0;
        for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xFFu) << (8 * (7 - i));
        return r;
    }
    return v;
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xFFu));
}

} // namespace

void write_container(const std::filesystem::path& path, nlohmann::json header, std::span<const double> payload) {
    header["payload_count"] = payload.size();
    const std::string text = header.dump();
    if (text.size() > 0xFFFFFFFFu) throw SchemaError("container header too large");

    std::string bytes(kMagic, kMagicLen);
    put_u32(bytes, std::uint32_t(text.size()));
    bytes += text;
    const std::size_t head = bytes.size();
    bytes.resize(head + 8 * payload.size());
    for (std::size_t i = 0; i < payload.size(); ++i) {
        const std::uint64_t v = to_little(std::bit_cast<std::uint64_t>(payload[i]));
        std::memcpy(bytes.data() + head + 8 * i, &v, 8);
    }

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
    os.write(bytes.data(), std::streamsize(bytes.size()));
    if (!os) throw IoError("failed writing '" + path.string() + "'");
}

Container read_container(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path.string() + "'");
    const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (is.bad()) throw IoError("failed reading '" + path.string() + "'");

    if (bytes.size() < kMagicLen + 4 || bytes.compare(0, kMagicLen, kMagic) != 0) {
        throw SchemaError("'" + path.string() + "' is not an OPICL1 file (bad magic)");
    }
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= std::uint32_t(std::uint8_t(bytes[kMagicLen + i])) << (8 * i);
    const std::size_t head = kMagicLen + 4 + std::size_t(len);
    if (bytes.size() < head) throw SchemaError("'" + path.string() + "': truncated header");

    Container c;
    try {
        c.header = nlohmann::json::parse(bytes.begin() + std::ptrdiff_t(kMagicLen + 4),
                                         bytes.begin() + std::ptrdiff_t(head));
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("'" + path.string() + "': malformed header: " + e.what());
    }
    if (!c.header.is_object() || !c.header.contains("payload_count") ||
        !c.header["payload_count"].is_number_unsigned()) {
        throw SchemaError("'" + path.string() + "': header lacks payload_count");
    }
    const std::size_t count = c.header["payload_count"].get<std::size_t>();
    const std::size_t body = bytes.size() - head;
    if (body != 8 * count) {
        throw SchemaError("'" + path.string() + "': payload holds " + std::to_string(body) + " bytes, expected " +
                          std::to_string(8 * count));
    }
    c.payload.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint64_t v;
        std::memcpy(&v, bytes.data() + head + 8 * i, 8);
        c.payload[i] = std::bit_cast<double>(to_little(v));
    }
    return c;
}

double PayloadReader::next() {
    if (pos_ >= payload_.size()) throw SchemaError("payload ended early");
    return payload_[pos_++];
}

void PayloadReader::read_into(std::span<double> out) {
    if (payload_.size() - pos_ < out.size()) throw SchemaError("payload ended early");
    std::copy_n(payload_.begin() + std::ptrdiff_t(pos_), out.size(), out.begin());
    pos_ += out.size();
}

std::vector<double> PayloadReader::take(std::size_t n) {
    std::vector<double> v(n);
    read_into(v);
    return v;
}

void expect_kind(const nlohmann::json& header, const std::string& kind, int version) {
    if (!header.contains("kind") || header["kind"] != kind) {
        throw SchemaError("expected a '" + kind + "' file, found '" +
                          (header.contains("kind") ? header["kind"].dump() : std::string("?")) + "'");
    }
    if (!header.contains("schema_version") || header["schema_version"] != version) {
        throw SchemaError("unsupported " + kind + " schema version " +
                          (header.contains("schema_version") ? header["schema_version"].dump() : std::string("?")) +
                          " (expected " + std::to_string(version) + ")");
    }
}

} // namespace opicl::io
