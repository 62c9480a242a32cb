#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "opicl/ndmath/dense_matrix.hpp"

namespace opicl::pdegen {

/// Uniform grid on [0, 1] with points i/(n-1).
class Grid {
public:
    explicit Grid(std::size_t n);

    std::size_t size() const noexcept { return points_.size(); }
    double spacing() const noexcept { return 1.0 / double(points_.size() - 1); }
    double operator[](std::size_t i) const { return points_[i]; }
    std::span<const double> points() const noexcept { return points_; }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    ndmath::Vector points_;
};

Grid uniform_grid(std::size_t n);

/// Values sampled on a grid; the grid itself travels alongside (dataset or instance).
struct GridFunction {
    ndmath::Vector values;

    std::size_t size() const noexcept { return values.size(); }
    friend bool operator==(const GridFunction&, const GridFunction&) = default;
};

} // namespace opicl::pdegen
