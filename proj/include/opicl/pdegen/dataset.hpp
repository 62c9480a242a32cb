#pragma once

#include <filesystem>

#include "opicl/pdegen/instance.hpp"

namespace opicl::pdegen {

inline constexpr int kDatasetSchemaVersion = 1;

/// Header (JSON, keys sorted):
///   kind: "dataset", schema_version, grid_n, count,
///   instances: [{family, direction, m}, ...], generation: {...} (optional)
/// Payload, per instance in order:
///   a, c, u0, u1, then m prompt pairs (parameter[grid_n], solution[grid_n]),
///   then the query pair (parameter[grid_n], solution[grid_n]).
void write_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& path);

/// Writes then reads back.
Dataset dataset_roundtrip(const Dataset& dataset, const std::filesystem::path& path);

} // namespace opicl::pdegen
