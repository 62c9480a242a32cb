#pragma once

#include "opicl/ndmath/dense_matrix.hpp"
#include "opicl/ndmath/rng.hpp"
#include "opicl/pdegen/grid.hpp"

namespace opicl::pdegen {

/// Squared-exponential Gaussian process prior. `jitter` is relative: the
/// diagonal shift used before factorization is jitter * variance.
struct GpConfig {
    double variance = 2.0;
    double length_scale = 0.5;
    double jitter = 1e-8;

    void validate() const;
};

/// K[i][j] = variance * exp(-(x_i - x_j)^2 / (2 * length_scale^2)).
ndmath::DenseMatrix se_kernel_matrix(const Grid& grid, const GpConfig& cfg);

/// Cholesky factor of the jittered kernel matrix over `grid`.
ndmath::DenseMatrix gp_cholesky(const Grid& grid, const GpConfig& cfg);

/// Mean-zero draw L z with z standard normal.
GridFunction sample_gp_function(const ndmath::DenseMatrix& chol, const Grid& grid, ndmath::Rng& rng);

} // namespace opicl::pdegen
