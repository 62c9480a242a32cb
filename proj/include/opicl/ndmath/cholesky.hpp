#pragma once

#include "opicl/ndmath/dense_matrix.hpp"

namespace opicl::ndmath {

/// Lower-triangular L with L Lᵀ = matrix + jitter·I. Only the lower triangle
/// of `matrix` is read. Throws SingularSystemError on a non-positive pivot.
DenseMatrix cholesky_factor(const DenseMatrix& matrix, double jitter = 0.0);

} // namespace opicl::ndmath
