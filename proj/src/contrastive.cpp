#include "psqe/contrastive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace psqe {

double icl_prob(std::span<const double> anchor, std::span<const double> positive,
                const Matrix& negatives, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("icl_prob: tau must be positive");
    const double pos = dot(anchor, positive) / tau;
    double m = pos;
    std::vector<double> neg(negatives.rows());
    for (std::size_t j = 0; j < negatives.rows(); ++j) {
        neg[j] = dot(anchor, negatives.row(j)) / tau;
        m = std::max(m, neg[j]);
    }
    double z = std::exp(pos - m);
    const double num = z;
    for (double s : neg) z += std::exp(s - m);
    return num / z;
}

namespace {

double log_add_exp(double a, double b) {
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

IclLossGrad icl_loss_grad(const Matrix& first, const Matrix& second, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("icl_loss: tau must be positive");
    if (first.rows() != second.rows() || first.cols() != second.cols()) {
        throw std::invalid_argument("icl_loss: batch matrices differ in shape");
    }
    const std::size_t b = first.rows();
    const std::size_t d = first.cols();
    IclLossGrad out;
    out.d_first = Matrix(b, d, 0.0);
    out.d_second = Matrix(b, d, 0.0);
    if (b == 0) return out;

    // Stack X = [first; second]; row r's positive is r±b, its negatives every other row.
    const std::size_t n = 2 * b;
    Matrix x(n, d);
    std::copy(first.data().begin(), first.data().end(), x.data().begin());
    std::copy(second.data().begin(), second.data().end(), x.data().begin() + static_cast<std::ptrdiff_t>(b * d));
    Matrix g = multiply_transposed(x, x);
    for (double& v : g.data()) v /= tau;

    auto pos_of = [b](std::size_t r) { return r < b ? r + b : r - b; };

    // Row-wise log-softmax with the diagonal excluded; keep log p at the positive.
    std::vector<double> log_p(n), row_max(n), log_z(n);
    for (std::size_t r = 0; r < n; ++r) {
        const auto gr = g.row(r);
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < n; ++c) {
            if (c != r) m = std::max(m, gr[c]);
        }
        double z = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            if (c != r) z += std::exp(gr[c] - m);
        }
        row_max[r] = m;
        log_z[r] = std::log(z);
        log_p[r] = gr[pos_of(r)] - m - log_z[r];
    }

    double loss = 0.0;
    std::vector<double> weight(n);
    for (std::size_t i = 0; i < b; ++i) {
        const double lse = log_add_exp(log_p[i], log_p[i + b]);
        loss += -(std::log(0.5) + lse);
        weight[i] = std::exp(log_p[i] - lse);
        weight[i + b] = std::exp(log_p[i + b] - lse);
    }
    out.loss = loss / static_cast<double>(b);

    // dL/dG[r][c] = -(w_r / b) * (delta(c, pos(r)) - pi_r[c]); turn g into that, in place.
    const double inv_b = 1.0 / static_cast<double>(b);
    for (std::size_t r = 0; r < n; ++r) {
        auto gr = g.row(r);
        const double shift = row_max[r] + log_z[r];
        const double wr = weight[r] * inv_b;
        for (std::size_t c = 0; c < n; ++c) {
            if (c == r) {
                gr[c] = 0.0;
                continue;
            }
            const double pi = std::exp(gr[c] - shift);
            gr[c] = wr * pi;
        }
        gr[pos_of(r)] -= wr;
    }

    // dX = (dG + dG^T) X / tau.
    for (std::size_t r = 0; r < n; ++r) {
        auto dst = r < b ? out.d_first.row(r) : out.d_second.row(r - b);
        for (std::size_t c = 0; c < n; ++c) {
            const double coef = (g(r, c) + g(c, r)) / tau;
            if (coef == 0.0) continue;
            const auto xc = x.row(c);
            for (std::size_t k = 0; k < d; ++k) dst[k] += coef * xc[k];
        }
    }
    return out;
}

double icl_loss(const Matrix& first, const Matrix& second, std::span<const std::size_t> batch,
                double tau) {
    return icl_loss_grad(gather_rows(first, batch), gather_rows(second, batch), tau).loss;
}

}  // namespace psqe
