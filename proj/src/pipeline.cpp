#include "psqe/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "psqe/cluster.hpp"
#include "psqe/errors.hpp"
#include "psqe/rng.hpp"

namespace psqe {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::optional<Modality> modality_from_string(const std::string& s) {
    if (s == "none") return std::nullopt;
    if (s == "visual") return Modality::visual;
    if (s == "attribute" || s == "attr") return Modality::attribute;
    if (s == "relation" || s == "rel") return Modality::relation;
    throw ConfigError("ablation: drop_modality must be visual, attr, rel or none, got \"" + s + "\"");
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) throw ConfigError(where + ": unknown key \"" + key + "\"");
    }
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

void validate(const PipelineConfig& cfg) {
    const auto& in = cfg.input;
    const bool files = in.kg1 || in.kg2 || in.truth;
    if (files == in.synth.has_value()) throw ConfigError("input: give either kg1/kg2 paths or a synth block");
    if (files && !(in.kg1 && in.kg2)) throw ConfigError("input: both kg1 and kg2 are required");
    if (in.synth) validate(*in.synth);
    if (cfg.n_init_seeds == 0) throw ConfigError("n_init_seeds must be positive");
    if (cfg.cluster_min < 2 || cfg.cluster_max > 5 || cfg.cluster_min > cfg.cluster_max) {
        throw ConfigError("cluster_range must lie within [2, 5]");
    }
    if (cfg.cluster_count && *cfg.cluster_count == 0) throw ConfigError("cluster_count must be positive");
    if (!(cfg.test_fraction > 0.0 && cfg.test_fraction <= 1.0)) throw ConfigError("test_fraction must lie in (0, 1]");
    if (cfg.fixed_n && *cfg.fixed_n == 0) throw ConfigError("fixed_n must be positive");
    validate(cfg.train);
    validate(cfg.expansion);
    auto w = cfg.weights;
    if (cfg.ablation.drop_modality) w = w.without(*cfg.ablation.drop_modality);
    (void)w.normalized();
}

PipelineConfig pipeline_config_from_json(const json& j, const fs::path& base_dir) {
    reject_unknown(j, {"input", "synth", "n_init_seeds", "weights", "cluster_range", "cluster_count",
                       "kmeans_max_iter", "train", "expansion", "ablation", "rng_seed", "output_dir",
                       "warm_start_uvp", "fixed_n", "test_fraction"},
                   "pipeline config");
    PipelineConfig cfg;
    try {
        if (j.contains("input")) {
            const json& in = j["input"];
            reject_unknown(in, {"kg1", "kg2", "truth"}, "input");
            if (in.contains("kg1")) cfg.input.kg1 = resolve(base_dir, in["kg1"].get<std::string>());
            if (in.contains("kg2")) cfg.input.kg2 = resolve(base_dir, in["kg2"].get<std::string>());
            if (in.contains("truth")) cfg.input.truth = resolve(base_dir, in["truth"].get<std::string>());
        }
        if (j.contains("synth")) cfg.input.synth = synth_config_from_json(j["synth"]);
        cfg.n_init_seeds = j.value("n_init_seeds", cfg.n_init_seeds);
        if (j.contains("weights")) cfg.weights = weights_from_json(j["weights"]);
        if (j.contains("cluster_range")) {
            const auto r = j["cluster_range"].get<std::vector<std::size_t>>();
            if (r.size() != 2) throw ConfigError("cluster_range must be [min, max]");
            cfg.cluster_min = r[0];
            cfg.cluster_max = r[1];
        }
        if (j.contains("cluster_count") && !j["cluster_count"].is_null()) {
            cfg.cluster_count = j["cluster_count"].get<std::size_t>();
        }
        cfg.kmeans_max_iter = j.value("kmeans_max_iter", cfg.kmeans_max_iter);
        if (j.contains("train")) cfg.train = train_config_from_json(j["train"]);
        if (j.contains("expansion")) cfg.expansion = expansion_config_from_json(j["expansion"]);
        if (j.contains("ablation")) {
            const json& a = j["ablation"];
            reject_unknown(a, {"skip_stage2", "skip_stage3", "skip_mic", "drop_modality"}, "ablation");
            cfg.ablation.skip_stage2 = a.value("skip_stage2", false);
            cfg.ablation.skip_stage3 = a.value("skip_stage3", false);
            cfg.ablation.skip_mic = a.value("skip_mic", false);
            cfg.ablation.drop_modality = modality_from_string(a.value("drop_modality", std::string("none")));
        }
        cfg.rng_seed = j.value("rng_seed", cfg.rng_seed);
        if (j.contains("output_dir") && !j["output_dir"].is_null()) {
            cfg.output_dir = resolve(base_dir, j["output_dir"].get<std::string>());
        }
        cfg.warm_start_uvp = j.value("warm_start_uvp", false);
        if (j.contains("fixed_n") && !j["fixed_n"].is_null()) cfg.fixed_n = j["fixed_n"].get<std::size_t>();
        cfg.test_fraction = j.value("test_fraction", cfg.test_fraction);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("pipeline config: ") + e.what());
    }
    validate(cfg);
    return cfg;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return pipeline_config_from_json(j, path.parent_path());
}

json to_json(const PipelineConfig& cfg) {
    json j;
    if (cfg.input.synth) {
        j["synth"] = to_json(*cfg.input.synth);
    } else {
        json in;
        if (cfg.input.kg1) in["kg1"] = cfg.input.kg1->string();
        if (cfg.input.kg2) in["kg2"] = cfg.input.kg2->string();
        if (cfg.input.truth) in["truth"] = cfg.input.truth->string();
        j["input"] = in;
    }
    j["n_init_seeds"] = cfg.n_init_seeds;
    j["weights"] = to_json(cfg.weights);
    j["cluster_range"] = {cfg.cluster_min, cfg.cluster_max};
    j["cluster_count"] = cfg.cluster_count ? json(*cfg.cluster_count) : json(nullptr);
    j["kmeans_max_iter"] = cfg.kmeans_max_iter;
    j["train"] = to_json(cfg.train);
    j["expansion"] = to_json(cfg.expansion);
    j["ablation"] = {{"skip_stage2", cfg.ablation.skip_stage2},
                     {"skip_stage3", cfg.ablation.skip_stage3},
                     {"skip_mic", cfg.ablation.skip_mic},
                     {"drop_modality", cfg.ablation.drop_modality ? to_string(*cfg.ablation.drop_modality) : "none"}};
    j["rng_seed"] = cfg.rng_seed;
    j["warm_start_uvp"] = cfg.warm_start_uvp;
    j["fixed_n"] = cfg.fixed_n ? json(*cfg.fixed_n) : json(nullptr);
    j["test_fraction"] = cfg.test_fraction;
    return j;
}

Dataset load_dataset(const PipelineInput& input) {
    Dataset d;
    if (input.synth) {
        SynthResult r = synth_generate(*input.synth);
        d.kg1 = std::move(r.kg1);
        d.kg2 = std::move(r.kg2);
        d.truth = std::move(r.truth);
        return d;
    }
    if (!input.kg1 || !input.kg2) throw ConfigError("input: both kg1 and kg2 are required");
    d.kg1 = load_kg(*input.kg1);
    d.kg2 = load_kg(*input.kg2);
    if (input.truth) d.truth = read_alignment(*input.truth);
    return d;
}

std::vector<std::pair<EntityId, EntityId>> test_split(const AlignmentMap& truth, double fraction,
                                                      std::uint64_t rng_seed) {
    auto pairs = truth.pairs();
    Rng rng(derive_seed(rng_seed, stream::test_split));
    std::shuffle(pairs.begin(), pairs.end(), rng);
    const auto keep = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(pairs.size())));
    pairs.resize(std::min(keep, pairs.size()));
    return pairs;
}

RankingReport downstream_ranking(const Dataset& data, const SeedSet& seeds, const TrainConfig& train_cfg,
                                 const ModalityMask& mask,
                                 const std::vector<std::pair<EntityId, EntityId>>& test) {
    if (test.empty() || seeds.empty()) return {};
    const TrainResult model = train(data.kg1, data.kg2, seeds, train_cfg, mask);
    const EnhancedFeatures f1 = forward(data.kg1, model.params, mask);
    const EnhancedFeatures f2 = forward(data.kg2, model.params, mask);
    return rank_alignment(f1.joint, f2.joint, test);
}

json to_json(const RunRecord& r, bool with_timing) {
    json j;
    j["config"] = r.config;
    j["counts"] = {{"s0", r.s0.size()}, {"s1", r.s1.size()}, {"s2", r.s2.size()}, {"s3", r.s3.size()}};
    j["quality"] = {{"s0", to_json(r.q0)}, {"s1", to_json(r.q1)}, {"s2", to_json(r.q2)}, {"s3", to_json(r.q3)}};
    j["ranking"] = to_json(r.ranking);
    j["stage1"] = {{"clusters", r.clusters}, {"quota", r.quota}};
    j["stage2"] = {{"global_added", r.global_added}, {"mic_removed", r.mic_removed},
                   {"final_loss", r.loss_trace.empty() ? json(nullptr) : json(r.loss_trace.back())}};
    j["stage3"] = {{"candidates", r.audit.size()},
                   {"added", r.expansion_added},
                   {"recheck_removed", r.recheck_removed}};
    if (with_timing) {
        json t = json::object();
        for (const auto& s : r.timing) t[s.stage] = s.seconds;
        j["timing"] = t;
    }
    return j;
}

namespace {

class StageClock {
public:
    explicit StageClock(std::vector<StageTiming>& out) : out_(out) {}
    void lap(const std::string& stage) {
        const auto now = std::chrono::steady_clock::now();
        out_.push_back({stage, std::chrono::duration<double>(now - last_).count()});
        last_ = now;
    }

private:
    std::vector<StageTiming>& out_;
    std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

SeedSet truncate_by_score(const SeedSet& s, std::size_t n) {
    std::vector<SeedPair> pairs(s.begin(), s.end());
    std::stable_sort(pairs.begin(), pairs.end(),
                     [](const SeedPair& a, const SeedPair& b) { return a.score > b.score; });
    pairs.resize(std::min(n, pairs.size()));
    return add_pairs({}, pairs);
}

QualityReport stage_quality(const SeedSet& s, const Dataset& d) {
    return quality_report(s, d.truth, d.kg1, d.kg2);
}

}  // namespace

RunRecord run_pipeline(const PipelineConfig& cfg) {
    validate(cfg);
    const Dataset data = load_dataset(cfg.input);
    return run_pipeline(cfg, data);
}

RunRecord run_pipeline(const PipelineConfig& cfg, const Dataset& data) {
    validate(cfg);
    RunRecord rec;
    rec.config = to_json(cfg);
    StageClock clock(rec.timing);

    ModalityWeights weights = cfg.weights;
    ModalityMask mask;
    if (cfg.ablation.drop_modality) {
        weights = weights.without(*cfg.ablation.drop_modality);
        mask = ModalityMask::without(*cfg.ablation.drop_modality);
    }
    TrainConfig train_cfg = cfg.train;
    train_cfg.rng_seed = cfg.rng_seed;

    const Matrix orig1 = fused_features(data.kg1, weights);
    const Matrix orig2 = fused_features(data.kg2, weights);
    const SimMatrix sim = multiply_transposed(orig1, orig2);
    rec.s0 = uvp_seeds(sim, cfg.n_init_seeds);
    clock.lap("uvp");

    // Stage I: cluster-balanced sampling.
    const Matrix points = stack_rows(orig1, orig2);
    const std::uint64_t kseed = derive_seed(cfg.rng_seed, stream::kmeans);
    rec.clusters = cfg.cluster_count ? *cfg.cluster_count
                                     : select_k(points, cfg.cluster_min, cfg.cluster_max, kseed, cfg.kmeans_max_iter);
    ClusterAssignment assignment = kmeans(points, rec.clusters, cfg.kmeans_max_iter, kseed);
    assignment.n_first = data.kg1.n_entities;
    const ClusterQuota quota = cluster_quota(assignment, cfg.n_init_seeds);
    rec.quota = quota.per_cluster;
    rec.s1 = stage1_sample(sim, assignment, quota, cfg.warm_start_uvp ? rec.s0 : SeedSet{});
    clock.lap("stage1");

    // Stage II: enhancement, global sampling, correction.
    std::optional<EnhancedFeatures> enh1, enh2;
    if (cfg.ablation.skip_stage2 || rec.s1.empty()) {
        rec.s2 = rec.s1;
    } else {
        TrainResult model = train(data.kg1, data.kg2, rec.s1, train_cfg, mask);
        rec.loss_trace = std::move(model.loss_trace);
        enh1 = forward(data.kg1, model.params, mask);
        enh2 = forward(data.kg2, model.params, mask);
        const SeedSet sampled = global_sample(*enh1, *enh2, cfg.n_init_seeds, rec.s1);
        rec.global_added = sampled.size() - rec.s1.size();
        if (cfg.ablation.skip_mic) {
            rec.s2 = sampled;
        } else {
            rec.s2 = mic_correct(sampled, orig1, orig2);
            rec.mic_removed = sampled.size() - rec.s2.size();
        }
    }
    clock.lap("stage2");

    // Stage III: neighbor expansion and recheck.
    if (cfg.ablation.skip_stage3) {
        rec.s3 = rec.s2;
    } else {
        const Matrix& e1 = enh1 ? enh1->joint : orig1;
        const Matrix& e2 = enh2 ? enh2->joint : orig2;
        ExpansionResult ex = expand(rec.s2, cfg.expansion, data.kg1, data.kg2, orig1, orig2, e1, e2);
        rec.expansion_added = ex.seeds.size() - rec.s2.size();
        rec.audit = std::move(ex.audit);
        if (cfg.ablation.skip_mic) {
            rec.s3 = std::move(ex.seeds);
        } else {
            rec.s3 = recheck(ex.seeds, orig1, orig2);
            rec.recheck_removed = ex.seeds.size() - rec.s3.size();
        }
    }
    if (cfg.fixed_n) rec.s3 = truncate_by_score(rec.s3, *cfg.fixed_n);
    clock.lap("stage3");

    rec.q0 = stage_quality(rec.s0, data);
    rec.q1 = stage_quality(rec.s1, data);
    rec.q2 = stage_quality(rec.s2, data);
    rec.q3 = stage_quality(rec.s3, data);
    const auto test = test_split(data.truth, cfg.test_fraction, cfg.rng_seed);
    rec.ranking = downstream_ranking(data, rec.s3, train_cfg, mask, test);
    clock.lap("evaluation");

    if (cfg.output_dir) write_outputs(*cfg.output_dir, rec);
    return rec;
}

void write_outputs(const fs::path& dir, const RunRecord& r) {
    fs::create_directories(dir);
    write_seeds(dir / "seeds_s0.txt", r.s0);
    write_seeds(dir / "seeds_s1.txt", r.s1);
    write_seeds(dir / "seeds_s2.txt", r.s2);
    write_seeds(dir / "seeds_s3.txt", r.s3);
    write_loss_trace(dir / "loss.csv", r.loss_trace);
    write_audit(dir / "expansion.csv", r.audit);
    std::ofstream os(dir / "record.json", std::ios::binary);
    if (!os) throw DataError("cannot write " + (dir / "record.json").string());
    os << to_json(r).dump(2) << '\n';
}

std::vector<TypeRow> type_comparison(const PipelineConfig& cfg) {
    validate(cfg);
    const Dataset data = load_dataset(cfg.input);
    PipelineConfig run_cfg = cfg;
    run_cfg.output_dir.reset();
    const RunRecord rec = run_pipeline(run_cfg, data);

    TrainConfig train_cfg = cfg.train;
    train_cfg.rng_seed = cfg.rng_seed;
    ModalityMask mask;
    if (cfg.ablation.drop_modality) mask = ModalityMask::without(*cfg.ablation.drop_modality);
    const auto test = test_split(data.truth, cfg.test_fraction, cfg.rng_seed);

    const SeedSet visual = uvp_seeds(cosine_sim_matrix(data.kg1.visual, data.kg2.visual), cfg.n_init_seeds);
    std::vector<TypeRow> rows;
    rows.push_back({"type1_uvp_visual", stage_quality(visual, data),
                    downstream_ranking(data, visual, train_cfg, mask, test)});
    rows.push_back({"type2_uvp_multimodal", rec.q0, downstream_ranking(data, rec.s0, train_cfg, mask, test)});
    rows.push_back({"type3_psqe", rec.q3, rec.ranking});
    return rows;
}

}  // namespace psqe
