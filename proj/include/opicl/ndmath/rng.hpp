#pragma once

#include <cstddef>
#include <cstdint>

#include "opicl/ndmath/dense_matrix.hpp"

namespace opicl::ndmath {

/// Counter-based generator: draw i of stream (seed, stream_id) is a pure
/// function of (seed, stream_id, i). The position is plain data, so it can be
/// checkpointed and restored exactly.
class Rng {
public:
    Rng(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t position = 0) noexcept;

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }
    std::uint64_t position() const noexcept { return counter_; }

    /// Raw 64-bit draw; advances the counter by one.
    std::uint64_t next_u64() noexcept;
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept;
    /// Unbiased integer in [0, n). n must be positive.
    std::uint64_t uniform_index(std::uint64_t n) noexcept;
    /// One standard normal; consumes two uniforms.
    double normal() noexcept;

    /// Derived generator for a child stream; independent of this one's position.
    Rng split(std::uint64_t child) const noexcept;

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t key_;
    std::uint64_t counter_;
};

/// n i.i.d. standard normals (Box-Muller, both branches used).
Vector gaussian_vector(Rng& rng, std::size_t n);

std::uint64_t mix64(std::uint64_t x) noexcept;

} // namespace opicl::ndmath
