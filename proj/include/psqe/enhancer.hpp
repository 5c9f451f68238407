#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "psqe/kg.hpp"
#include "psqe/matrix.hpp"
#include "psqe/seeds.hpp"

namespace psqe {

/// Which modalities take part in enhancement (the rest are dropped entirely).
struct ModalityMask {
    std::array<bool, 3> on = {true, true, true};

    bool operator[](Modality m) const { return on[static_cast<std::size_t>(m)]; }
    static ModalityMask all() { return {}; }
    static ModalityMask without(Modality m) {
        ModalityMask k;
        k.on[static_cast<std::size_t>(m)] = false;
        return k;
    }
    std::size_t count() const { return std::size_t(on[0]) + on[1] + on[2]; }
    bool operator==(const ModalityMask&) const = default;
};

/// Stage II feature enhancer: one linear map per modality (hidden x input) and
/// a single-head GAT attention vector [a_self; a_neighbor] over the visual branch.
struct EnhancerParams {
    Matrix w_visual;
    Matrix w_attribute;
    Matrix w_relation;
    std::vector<double> attention;

    const Matrix& weight(Modality m) const;
    Matrix& weight(Modality m);
    std::size_t hidden_dim() const { return w_visual.rows(); }

    bool operator==(const EnhancerParams&) const = default;
};

/// Glorot-uniform initialization, U(±sqrt(6 / (fan_in + fan_out))).
EnhancerParams init_params(std::size_t dim_visual, std::size_t dim_attribute,
                           std::size_t dim_relation, std::size_t hidden_dim, std::uint64_t seed);

/// Visits every tensor as a flat span, in a fixed order.
template <typename Params, typename F>
void for_each_tensor(Params& p, F&& f) {
    f(p.w_visual.data());
    f(p.w_attribute.data());
    f(p.w_relation.data());
    f(std::span(p.attention));
}

EnhancerParams zeros_like(const EnhancerParams& p);

void save_params(const std::filesystem::path& dir, const EnhancerParams& p);
EnhancerParams load_params(const std::filesystem::path& dir);

enum class Optimizer { sgd, adam };

struct TrainConfig {
    std::size_t epochs = 300;
    double lr = 0.01;
    std::size_t batch_size = 2000;
    std::size_t hidden_dim = 300;
    double tau = 0.1;
    std::uint64_t rng_seed = 42;
    Optimizer optimizer = Optimizer::sgd;
};

void validate(const TrainConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

inline constexpr double kLeakySlope = 0.2;

/// Per-graph enhanced features; every row has unit norm. `joint` is the
/// re-normalized concatenation of the active modality blocks.
struct EnhancedFeatures {
    Matrix visual;
    Matrix attribute;
    Matrix relation;
    Matrix joint;

    const Matrix& block(Modality m) const;
};

EnhancedFeatures forward(const MultiModalKG& kg, const EnhancerParams& params,
                         const ModalityMask& mask = ModalityMask::all());

struct LossGrad {
    double loss = 0.0;
    EnhancerParams grad;
};

/// Sum over active modalities of the batch ICL loss between enhanced G1 and G2
/// features of the listed seed pairs, with the exact gradient w.r.t. params.
LossGrad loss_and_grad(const MultiModalKG& kg1, const MultiModalKG& kg2,
                       const EnhancerParams& params, std::span<const SeedPair> batch, double tau,
                       const ModalityMask& mask = ModalityMask::all());

struct TrainResult {
    EnhancerParams params;
    /// Size-weighted mean batch loss of each epoch.
    std::vector<double> loss_trace;
};

/// Mini-batch training on the seed pairs. Each epoch reshuffles the seeds from
/// a stream derived from cfg.rng_seed. Deterministic given the config.
TrainResult train(const MultiModalKG& kg1, const MultiModalKG& kg2, const SeedSet& seeds,
                  const TrainConfig& cfg, const ModalityMask& mask = ModalityMask::all());

void write_loss_trace(const std::filesystem::path& path, std::span<const double> trace);

/// Ranks every cross-graph pair by joint-feature cosine and appends up to `n`
/// greedy one-to-one picks (stage S2) whose entities are absent from `existing`.
SeedSet global_sample(const EnhancedFeatures& enh1, const EnhancedFeatures& enh2, std::size_t n,
                      const SeedSet& existing);

struct MicRemoval {
    SeedPair pair;
    /// Seed index whose G2 entity outscored (or tied) the pair's own partner.
    std::size_t competitor = 0;
};

struct MicResult {
    SeedSet kept;
    std::vector<MicRemoval> removed;
};

/// Multimodal information correction. With M(k, l) = feat1[e1_k] · feat2[e2_l]
/// over the seed list, pair k survives only if M(k, k) strictly exceeds every
/// other entry of row k. Survivors keep their order.
MicResult mic_correct_detailed(const SeedSet& seeds, const Matrix& feat1, const Matrix& feat2);
SeedSet mic_correct(const SeedSet& seeds, const Matrix& feat1, const Matrix& feat2);

}  // namespace psqe
