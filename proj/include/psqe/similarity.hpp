#pragma once

#include <json.hpp>

#include "psqe/kg.hpp"
#include "psqe/matrix.hpp"

namespace psqe {

/// Cross-graph similarity scores, |E1| x |E2|.
using SimMatrix = Matrix;

/// Per-modality weights used when fusing similarities for seed scoring.
struct ModalityWeights {
    double visual = 0.8;
    double attribute = 0.1;
    double relation = 0.1;

    double operator[](Modality m) const;
    double& operator[](Modality m);

    /// Copy scaled to sum 1. Throws ConfigError if a weight is negative or all are zero.
    ModalityWeights normalized() const;
    /// Copy with `m` zeroed (used by the modality ablations).
    ModalityWeights without(Modality m) const;

    bool operator==(const ModalityWeights&) const = default;
};

nlohmann::json to_json(const ModalityWeights& w);
ModalityWeights weights_from_json(const nlohmann::json& j);

/// Entry (i, j) = cos(A_i, B_j). Throws DataError naming any zero-norm row.
SimMatrix cosine_sim_matrix(const Matrix& a, const Matrix& b);

/// Weighted sum of per-modality cosine matrices, weights normalized to sum 1.
SimMatrix fused_sim(const MultiModalKG& kg1, const MultiModalKG& kg2, const ModalityWeights& w);

/// Per-entity fused representation: the concatenation of sqrt(w_m) * unit(h_m)
/// over modalities with w_m > 0 (weights normalized). Rows have unit norm and
/// fused_features(kg1) . fused_features(kg2)^T equals fused_sim(kg1, kg2).
Matrix fused_features(const MultiModalKG& kg, const ModalityWeights& w);

}  // namespace psqe
