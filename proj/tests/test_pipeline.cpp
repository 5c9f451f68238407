#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "helpers.hpp"
#include "psqe/cli.hpp"
#include "psqe/errors.hpp"
#include "psqe/pipeline.hpp"

using namespace psqe;
namespace fs = std::filesystem;

namespace {

PipelineConfig small_config() {
    SynthConfig sc;
    sc.n_pairs = 150;
    sc.cluster_count = 3;
    sc.cluster_separation = 2.0;
    sc.noise_visual = 0.5;
    sc.noise_attribute = 0.3;
    sc.noise_relation = 0.3;
    sc.rng_seed = 5;
    PipelineConfig cfg;
    cfg.input.synth = sc;
    cfg.n_init_seeds = 50;
    cfg.train.epochs = 10;
    cfg.train.hidden_dim = 16;
    cfg.train.batch_size = 64;
    cfg.train.optimizer = Optimizer::adam;
    return cfg;
}

std::set<std::pair<std::uint32_t, std::uint32_t>> as_set(const SeedSet& s) {
    std::set<std::pair<std::uint32_t, std::uint32_t>> out;
    for (const auto& p : s) out.emplace(p.e1.value, p.e2.value);
    return out;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("skipping both later stages passes Stage I through") {
    PipelineConfig cfg = small_config();
    cfg.ablation.skip_stage2 = cfg.ablation.skip_stage3 = true;
    const RunRecord r = run_pipeline(cfg);
    CHECK(r.s3 == r.s1);
    CHECK(r.s2 == r.s1);
}

TEST_CASE("noise-free run is exact") {
    PipelineConfig cfg = small_config();
    cfg.input.synth->noise_visual = cfg.input.synth->noise_attribute = cfg.input.synth->noise_relation = 0.0;
    const RunRecord r = run_pipeline(cfg);
    CHECK(r.q3.precision == 1.0);
    CHECK(r.s3.size() >= r.s1.size());
    CHECK(r.ranking.hits1 == 1.0);
}

TEST_CASE("stage outputs keep their invariants") {
    const RunRecord r = run_pipeline(small_config());
    for (const SeedSet* s : {&r.s0, &r.s1, &r.s2, &r.s3}) CHECK(s->is_one_to_one());
    CHECK(r.q3.coverage_raw >= r.q2.coverage_raw);
    CHECK(r.q2.coverage_raw >= r.q1.coverage_raw);
    CHECK(r.q1.seeds == r.s1.size());
    CHECK(r.s1.size() == 50);
    CHECK(r.clusters >= 2);
}

TEST_CASE("MIC only removes") {
    PipelineConfig cfg = small_config();
    const RunRecord full = run_pipeline(cfg);
    cfg.ablation.skip_mic = true;
    const RunRecord raw = run_pipeline(cfg);
    const auto a = as_set(full.s2), b = as_set(raw.s2);
    CHECK(std::includes(b.begin(), b.end(), a.begin(), a.end()));
}

TEST_CASE("runs are reproducible") {
    PipelineConfig cfg = small_config();
    const auto d1 = testing::temp_dir("det1"), d2 = testing::temp_dir("det2");
    cfg.output_dir = d1;
    const RunRecord a = run_pipeline(cfg);
    cfg.output_dir = d2;
    const RunRecord b = run_pipeline(cfg);
    CHECK(to_json(a, false) == to_json(b, false));
    for (const char* f : {"seeds_s0.txt", "seeds_s1.txt", "seeds_s2.txt", "seeds_s3.txt", "loss.csv", "expansion.csv"}) {
        CHECK(slurp(d1 / f) == slurp(d2 / f));
        CHECK_FALSE(slurp(d1 / f).empty());
    }
    CHECK(fs::exists(d1 / "record.json"));
}

TEST_CASE("fixed size keeps the best-scored pairs") {
    PipelineConfig cfg = small_config();
    cfg.fixed_n = 20;
    const RunRecord r = run_pipeline(cfg);
    REQUIRE(r.s3.size() == 20);
    cfg.fixed_n.reset();
    const RunRecord full = run_pipeline(cfg);
    std::vector<double> scores;
    for (const auto& p : full.s3) scores.push_back(p.score);
    std::sort(scores.rbegin(), scores.rend());
    CHECK(r.s3[19].score == scores[19]);
}

TEST_CASE("pipeline config parsing") {
    const auto j = to_json(small_config());
    const PipelineConfig back = pipeline_config_from_json(j);
    CHECK(to_json(back) == j);
    auto bad = j;
    bad["n_init"] = 3;
    CHECK_THROWS_AS(pipeline_config_from_json(bad), ConfigError);
    bad = j;
    bad["ablation"]["drop_modality"] = "audio";
    CHECK_THROWS_AS(pipeline_config_from_json(bad), ConfigError);
    bad = j;
    bad.erase("synth");
    CHECK_THROWS_AS(pipeline_config_from_json(bad), ConfigError);
    bad = j;
    bad["cluster_range"] = {1, 5};
    CHECK_THROWS_AS(pipeline_config_from_json(bad), ConfigError);

    const PipelineConfig defaults = pipeline_config_from_json({{"synth", nlohmann::json::object()}});
    CHECK(defaults.n_init_seeds == 1000);
    CHECK(defaults.rng_seed == 42);
    CHECK(defaults.weights == ModalityWeights{0.8, 0.1, 0.1});
    CHECK(defaults.train.epochs == 300);
    CHECK(defaults.train.lr == 0.01);
    CHECK(defaults.train.batch_size == 2000);
    CHECK(defaults.train.hidden_dim == 300);
    CHECK(defaults.expansion.eta == 0.8);
}

TEST_CASE("type comparison reports three strategies") {
    PipelineConfig cfg = small_config();
    const auto rows = type_comparison(cfg);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].strategy == "type1_uvp_visual");
    CHECK(rows[2].quality.seeds == run_pipeline(cfg).s3.size());
}

TEST_CASE("noise-free data gives perfect seeds for every type") {
    PipelineConfig cfg = small_config();
    cfg.input.synth->noise_visual = cfg.input.synth->noise_attribute = cfg.input.synth->noise_relation = 0.0;
    for (const TypeRow& row : type_comparison(cfg)) CHECK(row.quality.precision == 1.0);
}
