#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "json.hpp"
#include "opicl/deeposets/model.hpp"
#include "opicl/ndmath/adam.hpp"

namespace opicl::deeposets {

inline constexpr int kCheckpointSchemaVersion = 1;

struct RngPosition {
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;
    std::uint64_t position = 0;

    friend bool operator==(const RngPosition&, const RngPosition&) = default;
};

/// Header (JSON, keys sorted):
///   kind: "checkpoint", schema_version, arch{...}, step, seed,
///   optimizer{beta1, beta2, epsilon, step_count} (optional),
///   sampler{seed, stream_id, position} (optional), extra{...}
/// Payload: parameters in ModelParams::blocks() order (φ, branch, trunk
/// layers as row-major W then b; then output_bias), followed, when an
/// optimizer is present, by all first moments then all second moments in
/// the same order.
struct Checkpoint {
    ModelParams params;
    std::uint64_t step = 0;
    std::uint64_t seed = 0;
    std::optional<ndmath::AdamState> optimizer;
    std::optional<RngPosition> sampler;
    nlohmann::json extra = nlohmann::json::object();
};

nlohmann::json arch_to_json(const ArchConfig& arch);
ArchConfig arch_from_json(const nlohmann::json& j);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
/// Throws SchemaError on version mismatch, shape inconsistencies, or truncation.
Checkpoint read_checkpoint(const std::filesystem::path& path);

} // namespace opicl::deeposets
