#include "opicl/pdegen/gp.hpp"

#include <cmath>

#include "opicl/errors.hpp"
#include "opicl/ndmath/cholesky.hpp"

namespace opicl::pdegen {

void GpConfig::validate() const {
    if (!(variance > 0.0)) throw InvalidArgument("GpConfig: variance must be positive");
    if (!(length_scale > 0.0)) throw InvalidArgument("GpConfig: length_scale must be positive");
    if (!(jitter >= 0.0)) throw InvalidArgument("GpConfig: jitter must be non-negative");
}

ndmath::DenseMatrix se_kernel_matrix(const Grid& grid, const GpConfig& cfg) {
    cfg.validate();
    const std::size_t n = grid.size();
    const double inv = 1.0 / (2.0 * cfg.length_scale * cfg.length_scale);
    ndmath::DenseMatrix k(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        k(i, i) = cfg.variance;
        for (std::size_t j = 0; j < i; ++j) {
            const double d = grid[i] - grid[j];
            const double v = cfg.variance * std::exp(-d * d * inv);
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

ndmath::DenseMatrix gp_cholesky(const Grid& grid, const GpConfig& cfg) {
    return ndmath::cholesky_factor(se_kernel_matrix(grid, cfg), cfg.jitter * cfg.variance);
}

GridFunction sample_gp_function(const ndmath::DenseMatrix& chol, const Grid& grid, ndmath::Rng& rng) {
    if (chol.rows() != grid.size() || chol.cols() != grid.size()) {
        throw ShapeError("sample_gp_function: factor is " + std::to_string(chol.rows()) + "x" +
                         std::to_string(chol.cols()) + " but grid has " + std::to_string(grid.size()) + " points");
    }
    const ndmath::Vector z = ndmath::gaussian_vector(rng, grid.size());
    GridFunction f;
    f.values.assign(grid.size(), 0.0);
    // Lower-triangular product, summed in index order.
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j <= i; ++j) s += chol(i, j) * z[j];
        f.values[i] = s;
    }
    return f;
}

} // namespace opicl::pdegen
