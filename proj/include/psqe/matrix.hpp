#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace psqe {

/// Dense row-major matrix of 64-bit reals.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

/// Scales `v` to unit length; returns the original norm (0 leaves `v` untouched).
double normalize(std::span<double> v);

/// Copy of `m` with every row scaled to unit length. Zero rows stay zero.
Matrix normalized_rows(const Matrix& m);

/// C = A * B^T, i.e. C(i, j) = dot(A.row(i), B.row(j)).
Matrix multiply_transposed(const Matrix& a, const Matrix& b);

/// Gathers the listed rows of `m` in order.
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows);

/// Horizontal concatenation; all blocks must share a row count.
Matrix hconcat(std::span<const Matrix* const> blocks);

bool all_finite(const Matrix& m);

}  // namespace psqe
