#include "opicl/pdegen/grid.hpp"

#include <string>

#include "opicl/errors.hpp"

namespace opicl::pdegen {

Grid::Grid(std::size_t n) {
    if (n < 2) throw InvalidArgument("uniform_grid: need at least 2 points, got " + std::to_string(n));
    points_.resize(n);
    const double denom = double(n - 1);
    for (std::size_t i = 0; i < n; ++i) points_[i] = double(i) / denom;
}

Grid uniform_grid(std::size_t n) { return Grid(n); }

} // namespace opicl::pdegen
