#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "psqe/matrix.hpp"

namespace psqe::theory {

/// Unidirectional batch ICL without temperature: anchor h1_i, positive h2_i,
/// negatives h2_j (j != i). All quantities are summed over the batch.
struct BoundReport {
    double loss = 0.0;
    double bound = 0.0;
    double margin = 0.0;  // loss - bound
    std::size_t negatives = 0;  // D = |B| - 1
};

/// Throws DataError unless every row has norm 1 within `tol`.
void require_unit_rows(const Matrix& h, double tol = 1e-9);

double unidirectional_loss(const Matrix& h1, const Matrix& h2);

/// Lower bound sum_i log(1 + D exp(½‖h1_i − h2_i‖² − (1/2D) Σ_j ‖h1_i − h2_j‖²)).
/// Equality holds exactly when each anchor's negative dot products are all equal.
BoundReport icl_lower_bound(const Matrix& h1, const Matrix& h2);

struct TermDecomposition {
    /// ½‖h1_i − h2_i‖ and (1/2D) Σ_j ‖h1_i − h2_j‖ per anchor.
    std::vector<double> attraction;
    std::vector<double> repulsion;
    /// The same with squared distances, the form that enters the bound.
    std::vector<double> attraction_sq;
    std::vector<double> repulsion_sq;
};

TermDecomposition decompose_terms(const Matrix& h1, const Matrix& h2);

/// Single-anchor loss -log P_ii with P the softmax of anchor·x over
/// {positive} ∪ negatives. With `normalized`, `anchor` is the raw output w and
/// the loss is evaluated at w / ‖w‖.
double anchor_loss(std::span<const double> anchor, std::span<const double> positive,
                   const Matrix& negatives, bool normalized);

struct GradientDiagnostics {
    double p_ii = 0.0;
    std::vector<double> p_ij;
    /// Σ |P_ij|
    double repulsion_magnitude = 0.0;
    /// Σ_j P_ij ‖(I − h hᵀ) h_j‖
    double projected_repulsion = 0.0;
};

GradientDiagnostics gradient_diagnostics(std::span<const double> anchor, std::span<const double> positive,
                                         const Matrix& negatives);

/// dL/dh = h2 (P_ii − 1) + Σ_j h_j P_ij. With `with_normalization`, `anchor` is
/// the pre-normalization w and the result is (I − h hᵀ)/‖w‖ applied to that.
std::vector<double> analytic_icl_gradient(std::span<const double> anchor, std::span<const double> positive,
                                          const Matrix& negatives, bool with_normalization);

/// Central differences of f at x.
std::vector<double> finite_difference(const std::function<double(std::span<const double>)>& f,
                                      std::span<const double> x, double step = 1e-5);

/// ‖a − b‖ / max(‖a‖, ‖b‖, floor).
double relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-8);

struct SkewConfig {
    std::size_t dense_count = 9;
    std::size_t sparse_count = 1;
    double dense_dot = 0.9;   // target pairwise dot inside the dense group
    double sparse_dot = 0.0;  // target pairwise dot inside the sparse group
    double positive_dot = 0.5;
    std::size_t dim = 32;
    std::uint64_t rng_seed = 42;
};

struct SkewReport {
    /// ‖Σ_{j in group} P_ij (I − h hᵀ) h_j‖ per group.
    double dense_contribution = 0.0;
    double sparse_contribution = 0.0;
    double dense_mean_dot = 0.0;
    double sparse_mean_dot = 0.0;
};

/// Anchor with two groups of negatives, each orthogonal to the anchor, whose
/// in-group pairwise dots are set by the config; reports the aggregate
/// repulsive gradient of each group.
SkewReport repulsion_skew_experiment(const SkewConfig& cfg);

/// Random unit-norm rows.
Matrix random_unit_rows(std::size_t rows, std::size_t cols, std::uint64_t seed);

struct CheckReport {
    std::size_t batches = 0;
    std::size_t bound_violations = 0;
    double min_margin = 0.0;
    double max_fd_error = 0.0;
    double tightness_gap = 0.0;
};

/// Randomized bound check over `batches` draws (sizes 2-64, dims 4-64), finite
/// difference checks of the anchor gradient with and without normalization,
/// and the worst gap on equal-dot configurations.
CheckReport run_check(std::size_t batches, std::uint64_t seed);

}  // namespace psqe::theory
