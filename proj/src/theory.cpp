#include "psqe/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "psqe/errors.hpp"
#include "psqe/rng.hpp"

namespace psqe::theory {

namespace {

double log_add_exp(double a, double b) {
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// log(1 + Σ exp(x_j))
double log1p_sum_exp(std::span<const double> x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, v);
    double s = std::exp(-m);
    for (double v : x) s += std::exp(v - m);
    return m + std::log(s);
}

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return s;
}

void require_batch(const Matrix& h1, const Matrix& h2) {
    if (h1.rows() != h2.rows() || h1.cols() != h2.cols()) {
        throw DataError("theory: batch matrices differ in shape");
    }
    if (h1.rows() < 2) throw DataError("theory: batch needs at least two pairs");
    require_unit_rows(h1);
    require_unit_rows(h2);
}

std::vector<double> unit_vector(std::span<const double> w) {
    std::vector<double> h(w.begin(), w.end());
    normalize(h);
    return h;
}

// Gaussian vector orthogonal to every row of `basis` (assumed orthonormal), unit length.
std::vector<double> random_orthogonal(Rng& rng, std::size_t dim, const std::vector<std::vector<double>>& basis) {
    std::normal_distribution<double> g;
    std::vector<double> v(dim);
    for (;;) {
        for (double& x : v) x = g(rng);
        for (const auto& b : basis) {
            const double p = dot(v, b);
            for (std::size_t k = 0; k < dim; ++k) v[k] -= p * b[k];
        }
        if (normalize(v) > 1e-6) return v;
    }
}

}  // namespace

void require_unit_rows(const Matrix& h, double tol) {
    for (std::size_t r = 0; r < h.rows(); ++r) {
        const double n = norm(h.row(r));
        if (!(std::abs(n - 1.0) <= tol)) {
            throw DataError("theory: row " + std::to_string(r) + " has norm " + std::to_string(n) +
                            ", expected unit norm");
        }
    }
}

double unidirectional_loss(const Matrix& h1, const Matrix& h2) {
    require_batch(h1, h2);
    const std::size_t b = h1.rows();
    std::vector<double> x;
    double loss = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        const double pos = dot(h1.row(i), h2.row(i));
        x.clear();
        for (std::size_t j = 0; j < b; ++j) {
            if (j != i) x.push_back(dot(h1.row(i), h2.row(j)) - pos);
        }
        loss += log1p_sum_exp(x);
    }
    return loss;
}

BoundReport icl_lower_bound(const Matrix& h1, const Matrix& h2) {
    BoundReport r;
    r.loss = unidirectional_loss(h1, h2);
    const std::size_t b = h1.rows();
    const double d = static_cast<double>(b - 1);
    r.negatives = b - 1;
    for (std::size_t i = 0; i < b; ++i) {
        const double attraction = 0.5 * sq_dist(h1.row(i), h2.row(i));
        double repulsion = 0.0;
        for (std::size_t j = 0; j < b; ++j) {
            if (j != i) repulsion += sq_dist(h1.row(i), h2.row(j));
        }
        repulsion /= 2.0 * d;
        r.bound += log_add_exp(0.0, std::log(d) + attraction - repulsion);
    }
    r.margin = r.loss - r.bound;
    return r;
}

TermDecomposition decompose_terms(const Matrix& h1, const Matrix& h2) {
    require_batch(h1, h2);
    const std::size_t b = h1.rows();
    const double d = static_cast<double>(b - 1);
    TermDecomposition t;
    for (std::size_t i = 0; i < b; ++i) {
        const double pos = sq_dist(h1.row(i), h2.row(i));
        double rep = 0.0, rep_sq = 0.0;
        for (std::size_t j = 0; j < b; ++j) {
            if (j == i) continue;
            const double s = sq_dist(h1.row(i), h2.row(j));
            rep += std::sqrt(s);
            rep_sq += s;
        }
        t.attraction.push_back(0.5 * std::sqrt(pos));
        t.attraction_sq.push_back(0.5 * pos);
        t.repulsion.push_back(rep / (2.0 * d));
        t.repulsion_sq.push_back(rep_sq / (2.0 * d));
    }
    return t;
}

double anchor_loss(std::span<const double> anchor, std::span<const double> positive, const Matrix& negatives,
                   bool normalized) {
    const std::vector<double> h = normalized ? unit_vector(anchor) : std::vector<double>(anchor.begin(), anchor.end());
    const double pos = dot(h, positive);
    std::vector<double> x(negatives.rows());
    for (std::size_t j = 0; j < negatives.rows(); ++j) x[j] = dot(h, negatives.row(j)) - pos;
    return log1p_sum_exp(x);
}

GradientDiagnostics gradient_diagnostics(std::span<const double> anchor, std::span<const double> positive,
                                         const Matrix& negatives) {
    GradientDiagnostics g;
    const double pos = dot(anchor, positive);
    std::vector<double> s(negatives.rows());
    double m = pos;
    for (std::size_t j = 0; j < s.size(); ++j) {
        s[j] = dot(anchor, negatives.row(j));
        m = std::max(m, s[j]);
    }
    double z = std::exp(pos - m);
    for (double v : s) z += std::exp(v - m);
    g.p_ii = std::exp(pos - m) / z;
    g.p_ij.resize(s.size());
    const double hh = dot(anchor, anchor);
    for (std::size_t j = 0; j < s.size(); ++j) {
        g.p_ij[j] = std::exp(s[j] - m) / z;
        g.repulsion_magnitude += std::abs(g.p_ij[j]);
        // ‖(I − h hᵀ) h_j‖² = ‖h_j‖² − (2 − ‖h‖²)(h·h_j)²
        const auto hj = negatives.row(j);
        const double perp_sq = std::max(0.0, dot(hj, hj) - (2.0 - hh) * s[j] * s[j]);
        g.projected_repulsion += g.p_ij[j] * std::sqrt(perp_sq);
    }
    return g;
}

std::vector<double> analytic_icl_gradient(std::span<const double> anchor, std::span<const double> positive,
                                          const Matrix& negatives, bool with_normalization) {
    const std::vector<double> h = with_normalization ? unit_vector(anchor)
                                                     : std::vector<double>(anchor.begin(), anchor.end());
    const GradientDiagnostics diag = gradient_diagnostics(h, positive, negatives);
    std::vector<double> g(h.size());
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = positive[k] * (diag.p_ii - 1.0);
    for (std::size_t j = 0; j < negatives.rows(); ++j) {
        const auto hj = negatives.row(j);
        for (std::size_t k = 0; k < g.size(); ++k) g[k] += hj[k] * diag.p_ij[j];
    }
    if (!with_normalization) return g;
    const double w_norm = norm(anchor);
    const double proj = dot(h, g);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = (g[k] - proj * h[k]) / w_norm;
    return g;
}

std::vector<double> finite_difference(const std::function<double(std::span<const double>)>& f,
                                      std::span<const double> x, double step) {
    std::vector<double> probe(x.begin(), x.end());
    std::vector<double> g(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        probe[k] = x[k] + step;
        const double up = f(probe);
        probe[k] = x[k] - step;
        const double down = f(probe);
        probe[k] = x[k];
        g[k] = (up - down) / (2.0 * step);
    }
    return g;
}

double relative_error(std::span<const double> a, std::span<const double> b, double floor) {
    double diff = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) diff += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(diff) / std::max({norm(a), norm(b), floor});
}

SkewReport repulsion_skew_experiment(const SkewConfig& cfg) {
    if (cfg.dim < 4) throw ConfigError("skew experiment: dim must be at least 4");
    for (double s : {cfg.dense_dot, cfg.sparse_dot}) {
        if (!(s >= 0.0 && s < 1.0)) throw ConfigError("skew experiment: group dots must lie in [0, 1)");
    }
    if (!(std::abs(cfg.positive_dot) < 1.0)) throw ConfigError("skew experiment: positive_dot must lie in (-1, 1)");
    Rng rng(cfg.rng_seed);
    std::vector<double> anchor(cfg.dim, 0.0);
    anchor[0] = 1.0;
    const std::vector<std::vector<double>> anchor_basis = {anchor};

    std::vector<double> positive = random_orthogonal(rng, cfg.dim, anchor_basis);
    const double c = cfg.positive_dot;
    for (std::size_t k = 0; k < cfg.dim; ++k) positive[k] = c * anchor[k] + std::sqrt(1.0 - c * c) * positive[k];

    auto make_group = [&](std::size_t count, double s) {
        Matrix g(count, cfg.dim);
        const std::vector<double> u = random_orthogonal(rng, cfg.dim, anchor_basis);
        const std::vector<std::vector<double>> basis = {anchor, u};
        for (std::size_t r = 0; r < count; ++r) {
            const std::vector<double> v = random_orthogonal(rng, cfg.dim, basis);
            auto row = g.row(r);
            for (std::size_t k = 0; k < cfg.dim; ++k) row[k] = std::sqrt(s) * u[k] + std::sqrt(1.0 - s) * v[k];
            normalize(row);
        }
        return g;
    };
    const Matrix dense = make_group(cfg.dense_count, cfg.dense_dot);
    const Matrix sparse = make_group(cfg.sparse_count, cfg.sparse_dot);

    Matrix negatives(cfg.dense_count + cfg.sparse_count, cfg.dim);
    std::copy(dense.data().begin(), dense.data().end(), negatives.data().begin());
    std::copy(sparse.data().begin(), sparse.data().end(),
              negatives.data().begin() + static_cast<std::ptrdiff_t>(dense.data().size()));
    const GradientDiagnostics diag = gradient_diagnostics(anchor, positive, negatives);

    auto contribution = [&](std::size_t begin, std::size_t end) {
        std::vector<double> acc(cfg.dim, 0.0);
        for (std::size_t j = begin; j < end; ++j) {
            const auto hj = negatives.row(j);
            const double along = dot(anchor, hj);
            for (std::size_t k = 0; k < cfg.dim; ++k) acc[k] += diag.p_ij[j] * (hj[k] - along * anchor[k]);
        }
        return norm(acc);
    };
    auto mean_dot = [](const Matrix& g) {
        if (g.rows() < 2) return 0.0;
        double s = 0.0;
        for (std::size_t a = 0; a < g.rows(); ++a) {
            for (std::size_t b = a + 1; b < g.rows(); ++b) s += dot(g.row(a), g.row(b));
        }
        return s / (0.5 * static_cast<double>(g.rows() * (g.rows() - 1)));
    };

    SkewReport r;
    r.dense_contribution = contribution(0, cfg.dense_count);
    r.sparse_contribution = contribution(cfg.dense_count, negatives.rows());
    r.dense_mean_dot = mean_dot(dense);
    r.sparse_mean_dot = mean_dot(sparse);
    return r;
}

Matrix random_unit_rows(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> g;
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        auto row = m.row(r);
        do {
            for (double& v : row) v = g(rng);
        } while (normalize(row) < 1e-9);
    }
    return m;
}

CheckReport run_check(std::size_t batches, std::uint64_t seed) {
    CheckReport rep;
    rep.batches = batches;
    rep.min_margin = std::numeric_limits<double>::infinity();
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> size_dist(2, 64), dim_dist(4, 64);
    for (std::size_t t = 0; t < batches; ++t) {
        const std::size_t b = size_dist(rng), d = dim_dist(rng);
        const Matrix h1 = random_unit_rows(b, d, rng());
        const Matrix h2 = random_unit_rows(b, d, rng());
        const BoundReport r = icl_lower_bound(h1, h2);
        rep.min_margin = std::min(rep.min_margin, r.margin);
        if (r.margin < -1e-9) ++rep.bound_violations;
    }
    if (batches == 0) rep.min_margin = 0.0;

    // Equal-dot configurations: all rows identical, and matched orthonormal bases.
    for (std::size_t b = 2; b <= 16; ++b) {
        const Matrix one = random_unit_rows(1, 8, rng());
        Matrix same(b, 8);
        for (std::size_t r = 0; r < b; ++r) std::copy(one.row(0).begin(), one.row(0).end(), same.row(r).begin());
        rep.tightness_gap = std::max(rep.tightness_gap, std::abs(icl_lower_bound(same, same).margin));

        Matrix basis(b, b, 0.0);
        for (std::size_t r = 0; r < b; ++r) basis(r, r) = 1.0;
        rep.tightness_gap = std::max(rep.tightness_gap, std::abs(icl_lower_bound(basis, basis).margin));
    }

    std::uniform_int_distribution<std::size_t> neg_dist(1, 6);
    std::uniform_real_distribution<double> scale(0.5, 2.0);
    for (std::size_t t = 0; t < 100; ++t) {
        const std::size_t n = neg_dist(rng);
        const Matrix pos = random_unit_rows(1, 4, rng());
        const Matrix neg = random_unit_rows(n, 4, rng());
        const Matrix a = random_unit_rows(1, 4, rng());
        for (bool normalized : {false, true}) {
            std::vector<double> x(a.row(0).begin(), a.row(0).end());
            if (normalized) {
                const double s = scale(rng);
                for (double& v : x) v *= s;
            }
            const auto analytic = analytic_icl_gradient(x, pos.row(0), neg, normalized);
            const auto numeric = finite_difference(
                [&](std::span<const double> p) { return anchor_loss(p, pos.row(0), neg, normalized); }, x);
            rep.max_fd_error = std::max(rep.max_fd_error, relative_error(analytic, numeric));
        }
    }
    return rep;
}

}  // namespace psqe::theory
