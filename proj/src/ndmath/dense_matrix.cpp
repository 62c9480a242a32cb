#include "opicl/ndmath/dense_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "opicl/errors.hpp"

namespace opicl::ndmath {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, Vector data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeError("DenseMatrix: data length " + std::to_string(data_.size()) + " != " +
                         std::to_string(rows_) + "x" + std::to_string(cols_));
    }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

DenseMatrix DenseMatrix::transpose() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

bool DenseMatrix::all_finite() const noexcept { return ndmath::all_finite(data_); }

double DenseMatrix::max_abs() const noexcept { return ndmath::max_abs(data_); }

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions " + std::to_string(a.cols()) + " and " + std::to_string(b.rows()));
    }
    DenseMatrix out(a.rows(), b.cols());
    if (out.size() != 0 && a.cols() != 0) out.map().noalias() = a.map() * b.map();
    return out;
}

Vector matvec(const DenseMatrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) {
        throw ShapeError("matvec: matrix has " + std::to_string(a.cols()) + " columns, vector has " +
                         std::to_string(x.size()) + " entries");
    }
    Vector y(a.rows(), 0.0);
    if (!y.empty() && !x.empty()) as_eigen(std::span<double>(y)).noalias() = a.map() * as_eigen(x);
    return y;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double max_abs(std::span<const double> v) noexcept {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

bool all_finite(std::span<const double> v) noexcept {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

} // namespace opicl::ndmath
