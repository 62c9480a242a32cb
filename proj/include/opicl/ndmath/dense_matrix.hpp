#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/StdVector>

namespace opicl::ndmath {

/// 64-byte aligned, so vectorized kernels see the same alignment on every
/// allocation and results do not depend on where the heap placed a buffer.
using Vector = std::vector<double, Eigen::aligned_allocator<double>>;

using EigenRowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<EigenRowMajor>;
using ConstMatrixMap = Eigen::Map<const EigenRowMajor>;
using VectorMap = Eigen::Map<Eigen::VectorXd>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

/// Row-major dense matrix of 64-bit reals.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    DenseMatrix(std::size_t rows, std::size_t cols, Vector data);

    static DenseMatrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> flat() noexcept { return data_; }
    std::span<const double> flat() const noexcept { return data_; }
    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    MatrixMap map() { return {data_.data(), Eigen::Index(rows_), Eigen::Index(cols_)}; }
    ConstMatrixMap map() const { return {data_.data(), Eigen::Index(rows_), Eigen::Index(cols_)}; }

    DenseMatrix transpose() const;
    bool all_finite() const noexcept;
    double max_abs() const noexcept;

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    Vector data_;
};

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
Vector matvec(const DenseMatrix& a, std::span<const double> x);

inline ConstVectorMap as_eigen(std::span<const double> v) { return {v.data(), Eigen::Index(v.size())}; }
inline VectorMap as_eigen(std::span<double> v) { return {v.data(), Eigen::Index(v.size())}; }

double dot(std::span<const double> a, std::span<const double> b);
double max_abs(std::span<const double> v) noexcept;
bool all_finite(std::span<const double> v) noexcept;

} // namespace opicl::ndmath
