#include "psqe/matrix.hpp"

#include <stdexcept>
#include <string>

namespace psqe {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw std::invalid_argument("matrix data size " + std::to_string(data_.size()) +
                                    " does not match " + std::to_string(rows_) + "x" +
                                    std::to_string(cols_));
    }
}

double normalize(std::span<double> v) {
    const double n = norm(v);
    if (n > 0.0) {
        for (double& x : v) x /= n;
    }
    return n;
}

Matrix normalized_rows(const Matrix& m) {
    Matrix out = m;
    for (std::size_t r = 0; r < out.rows(); ++r) normalize(out.row(r));
    return out;
}

Matrix multiply_transposed(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw std::invalid_argument("multiply_transposed: column mismatch (" +
                                    std::to_string(a.cols()) + " vs " + std::to_string(b.cols()) +
                                    ")");
    }
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto ai = a.row(i);
        auto ci = c.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) ci[j] = dot(ai, b.row(j));
    }
    return c;
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
    Matrix out(rows.size(), m.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto src = m.row(rows[k]);
        std::copy(src.begin(), src.end(), out.row(k).begin());
    }
    return out;
}

Matrix hconcat(std::span<const Matrix* const> blocks) {
    if (blocks.empty()) return {};
    const std::size_t n = blocks.front()->rows();
    std::size_t total = 0;
    for (const Matrix* b : blocks) {
        if (b->rows() != n) throw std::invalid_argument("hconcat: row count mismatch");
        total += b->cols();
    }
    Matrix out(n, total);
    for (std::size_t r = 0; r < n; ++r) {
        auto dst = out.row(r).begin();
        for (const Matrix* b : blocks) {
            const auto src = b->row(r);
            dst = std::copy(src.begin(), src.end(), dst);
        }
    }
    return out;
}

bool all_finite(const Matrix& m) {
    for (double x : m.data()) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace psqe
