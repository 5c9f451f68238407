#pragma once

#include <span>

#include "psqe/matrix.hpp"

namespace psqe {

/// Alignment probability of `positive` for `anchor` against the rows of
/// `negatives`: softmax over {positive} ∪ negatives of anchor·x / tau, read at
/// the positive. Evaluated with max-subtraction.
double icl_prob(std::span<const double> anchor, std::span<const double> positive,
                const Matrix& negatives, double tau);

struct IclLossGrad {
    double loss = 0.0;
    /// d loss / d rows of the two input matrices.
    Matrix d_first;
    Matrix d_second;
};

/// Bidirectional intra-modal contrastive loss over a batch of row-aligned seed
/// pairs (row k of `first` matches row k of `second`). Each anchor's negatives
/// are every other batch row from both graphs. Returns the batch mean of
/// -log(0.5 * (p(first_k, second_k) + p(second_k, first_k))) and its gradient.
IclLossGrad icl_loss_grad(const Matrix& first, const Matrix& second, double tau);

/// Loss only, over the listed rows of row-aligned seed matrices.
double icl_loss(const Matrix& first, const Matrix& second, std::span<const std::size_t> batch,
                double tau);

}  // namespace psqe
