#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "psqe/enhancer.hpp"
#include "psqe/expansion.hpp"
#include "psqe/kg.hpp"
#include "psqe/metrics.hpp"
#include "psqe/seeds.hpp"
#include "psqe/similarity.hpp"
#include "psqe/synth.hpp"

namespace psqe {

/// Either three file paths or an inline generator config.
struct PipelineInput {
    std::optional<std::filesystem::path> kg1;
    std::optional<std::filesystem::path> kg2;
    std::optional<std::filesystem::path> truth;
    std::optional<SynthConfig> synth;
};

struct Ablation {
    bool skip_stage2 = false;
    bool skip_stage3 = false;
    /// Also skips the Stage III recheck, which is the same correction.
    bool skip_mic = false;
    std::optional<Modality> drop_modality;
};

struct PipelineConfig {
    PipelineInput input;
    std::size_t n_init_seeds = 1000;
    ModalityWeights weights;
    std::size_t cluster_min = 2;
    std::size_t cluster_max = 5;
    /// Fixed k instead of silhouette selection.
    std::optional<std::size_t> cluster_count;
    std::size_t kmeans_max_iter = 100;
    /// train.rng_seed is replaced by rng_seed when the pipeline runs.
    TrainConfig train;
    ExpansionConfig expansion;
    Ablation ablation;
    std::uint64_t rng_seed = 42;
    std::optional<std::filesystem::path> output_dir;
    /// Start Stage I from the UVP seeds instead of an empty set.
    bool warm_start_uvp = false;
    /// Keep only the fixed_n highest-scored final pairs.
    std::optional<std::size_t> fixed_n;
    /// Share of ground-truth pairs used as ranking queries.
    double test_fraction = 0.7;
};

void validate(const PipelineConfig& cfg);
/// Strict: unknown keys are ConfigErrors. Relative input paths resolve against `base_dir`.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
nlohmann::json to_json(const PipelineConfig& cfg);

struct Dataset {
    MultiModalKG kg1;
    MultiModalKG kg2;
    AlignmentMap truth;  // may be empty
};

Dataset load_dataset(const PipelineInput& input);

/// Ground-truth pairs held out as ranking queries, chosen from a stream derived from rng_seed.
std::vector<std::pair<EntityId, EntityId>> test_split(const AlignmentMap& truth, double fraction,
                                                      std::uint64_t rng_seed);

/// Trains a fresh enhancer on `seeds` and ranks the test pairs on its joint features.
RankingReport downstream_ranking(const Dataset& data, const SeedSet& seeds, const TrainConfig& train,
                                 const ModalityMask& mask,
                                 const std::vector<std::pair<EntityId, EntityId>>& test);

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct RunRecord {
    nlohmann::json config;
    SeedSet s0, s1, s2, s3;
    QualityReport q0, q1, q2, q3;
    RankingReport ranking;
    std::size_t clusters = 0;
    std::vector<std::size_t> quota;
    std::size_t global_added = 0;
    std::size_t mic_removed = 0;
    std::size_t expansion_added = 0;
    std::size_t recheck_removed = 0;
    std::vector<double> loss_trace;
    std::vector<AuditEntry> audit;
    std::vector<StageTiming> timing;
};

/// Stage counts, quality reports and ranking; wall-clock times only with `with_timing`.
nlohmann::json to_json(const RunRecord& r, bool with_timing = true);

RunRecord run_pipeline(const PipelineConfig& cfg);
RunRecord run_pipeline(const PipelineConfig& cfg, const Dataset& data);

/// Writes seeds_{s0,s1,s2,s3}.txt, record.json, loss.csv and expansion.csv.
void write_outputs(const std::filesystem::path& dir, const RunRecord& r);

struct TypeRow {
    std::string strategy;
    QualityReport quality;
    RankingReport ranking;
};

/// Visual-only UVP (type I), multimodal UVP (type II) and the full pipeline
/// (type III) on the same data, each scored by seed quality and by the ranking
/// of an enhancer trained on its seeds.
std::vector<TypeRow> type_comparison(const PipelineConfig& cfg);

}  // namespace psqe
