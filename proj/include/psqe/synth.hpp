#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "psqe/kg.hpp"

namespace psqe {

enum class DegreeProfile { uniform, power_law };

/// Paired-graph generator settings. Spreads and noise levels are expressed as
/// the expected Euclidean norm of the perturbation, independent of dimension.
struct SynthConfig {
    std::size_t n_pairs = 500;
    std::size_t dim_visual = 32;
    std::size_t dim_attribute = 8;
    std::size_t dim_relation = 8;

    /// Entity-level deviation of each latent from its cluster centre.
    double spread_visual = 0.6;
    double spread_attribute = 0.6;
    double spread_relation = 0.6;

    /// Per-graph observation noise.
    double noise_visual = 0.0;
    double noise_attribute = 0.0;
    double noise_relation = 0.0;
    /// Visual noise applied to sparse-region entities; defaults to noise_visual.
    std::optional<double> noise_visual_sparse;

    std::size_t cluster_count = 3;
    /// Norm of the cluster centres (centres are uniform on a sphere of this radius).
    double cluster_separation = 1.0;

    DegreeProfile degree_profile = DegreeProfile::uniform;
    double power_law_exponent = 2.5;
    double mean_degree = 6.0;

    /// Leading fraction of latent entities forming the dense region.
    double dense_fraction = 0.0;
    /// Share of all edges placed among dense-region entities.
    double dense_edge_share = 0.0;
    /// Independent per-graph probability of dropping each shared edge.
    double edge_drop = 0.0;

    std::uint64_t rng_seed = 42;
};

/// Throws ConfigError on invalid settings (including infeasible degree profiles).
void validate(const SynthConfig& cfg);

SynthConfig synth_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SynthConfig& cfg);

struct SynthResult {
    MultiModalKG kg1;
    MultiModalKG kg2;
    AlignmentMap truth;
    /// Planted cluster per entity, per graph.
    std::vector<std::uint32_t> cluster1, cluster2;
    /// Dense-region membership per entity, per graph.
    std::vector<bool> dense1, dense2;
};

/// Deterministic in cfg.rng_seed. Aligned entities share one latent vector per
/// modality; each graph observes latent + independent Gaussian noise. Both
/// graphs are independently permuted so indices carry no alignment signal.
SynthResult synth_generate(const SynthConfig& cfg);

}  // namespace psqe
