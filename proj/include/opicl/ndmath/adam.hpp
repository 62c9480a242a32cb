#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "opicl/ndmath/dense_matrix.hpp"

namespace opicl::ndmath {

struct AdamState {
    std::vector<Vector> first_moment;
    std::vector<Vector> second_moment;
    std::int64_t step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    /// Zero moments shaped like `blocks`.
    static AdamState for_blocks(std::span<const std::span<const double>> blocks);
    static AdamState for_blocks(std::span<const std::span<double>> blocks);

    friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// One bias-corrected Adam update applied block by block. Every block is
/// updated elementwise, so block order never affects the result.
/// `block_names`, if given, label blocks in error messages.
void adam_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
               AdamState& state, double lr, std::span<const std::string> block_names = {});

} // namespace opicl::ndmath
