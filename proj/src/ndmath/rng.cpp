#include "opicl/ndmath/rng.hpp"

#include <cmath>
#include <numbers>

namespace opicl::ndmath {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kStreamSalt = 0xD1B54A32D192ED03ULL;
} // namespace

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ULL;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBULL;
    x ^= x >> 31;
    return x;
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t position) noexcept
    : seed_(seed),
      stream_id_(stream_id),
      key_(mix64(mix64(seed + kGolden) ^ mix64((stream_id + 1) * kStreamSalt))),
      counter_(position) {}

std::uint64_t Rng::next_u64() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
}

double Rng::uniform() noexcept { return double(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

std::uint64_t Rng::uniform_index(std::uint64_t n) noexcept {
    // Rejection on the top of the range keeps every residue equally likely.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

double Rng::normal() noexcept {
    const double u1 = 1.0 - uniform(); // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::split(std::uint64_t child) const noexcept {
    return Rng(mix64(seed_ ^ mix64(stream_id_ + kGolden)), child);
}

Vector gaussian_vector(Rng& rng, std::size_t n) {
    Vector out(n);
    for (std::size_t i = 0; i < n; i += 2) {
        const double u1 = 1.0 - rng.uniform();
        const double u2 = rng.uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        out[i] = r * std::cos(angle);
        if (i + 1 < n) out[i + 1] = r * std::sin(angle);
    }
    return out;
}

} // namespace opicl::ndmath
