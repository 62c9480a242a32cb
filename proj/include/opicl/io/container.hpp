#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace opicl::io {

/// Every binary artifact shares one envelope:
///   bytes 0..5  magic "OPICL1"
///   bytes 6..9  header length L, unsigned 32-bit little-endian
///   next L      UTF-8 JSON header
///   remainder   payload of IEEE-754 binary64 values, little-endian
/// The header's "payload_count" field holds the number of payload values.
inline constexpr char kMagic[] = "OPICL1";

struct Container {
    nlohmann::json header;
    std::vector<double> payload;
};

void write_container(const std::filesystem::path& path, nlohmann::json header, std::span<const double> payload);

/// Throws IoError if unreadable and SchemaError on bad magic, malformed JSON,
/// or a payload whose size differs from "payload_count".
Container read_container(const std::filesystem::path& path);

/// Sequential reader over a payload that reports truncation as SchemaError.
class PayloadReader {
public:
    explicit PayloadReader(std::span<const double> payload) : payload_(payload) {}

    double next();
    void read_into(std::span<double> out);
    std::vector<double> take(std::size_t n);
    bool exhausted() const noexcept { return pos_ == payload_.size(); }

private:
    std::span<const double> payload_;
    std::size_t pos_ = 0;
};

/// Validates header["kind"] and header["schema_version"].
void expect_kind(const nlohmann::json& header, const std::string& kind, int version);

} // namespace opicl::io
