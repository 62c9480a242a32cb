#include "opicl/ndmath/cholesky.hpp"

#include <cmath>
#include <string>

#include "opicl/errors.hpp"

namespace opicl::ndmath {

DenseMatrix cholesky_factor(const DenseMatrix& matrix, double jitter) {
    if (matrix.rows() != matrix.cols()) throw ShapeError("cholesky_factor: matrix is not square");
    if (!(jitter >= 0.0)) throw InvalidArgument("cholesky_factor: jitter must be non-negative");
    const std::size_t n = matrix.rows();
    DenseMatrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double diag = matrix(j, j) + jitter;
        for (std::size_t k = 0; k < j; ++k) diag -= l(j, k) * l(j, k);
        if (!(diag > 0.0)) {
            throw SingularSystemError("cholesky_factor: non-positive pivot " + std::to_string(diag) + " at index " +
                                          std::to_string(j),
                                      j);
        }
        const double ljj = std::sqrt(diag);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = matrix(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / ljj;
        }
    }
    return l;
}

} // namespace opicl::ndmath
