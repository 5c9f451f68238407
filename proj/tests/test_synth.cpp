#include <doctest.h>

#include "psqe/errors.hpp"
#include "psqe/seeds.hpp"
#include "psqe/similarity.hpp"
#include "psqe/synth.hpp"

using namespace psqe;

TEST_CASE("noise-free pairs have identical fused features") {
    SynthConfig cfg;
    cfg.n_pairs = 10;
    cfg.mean_degree = 2.0;
    const SynthResult r = synth_generate(cfg);
    const SimMatrix sim = fused_sim(r.kg1, r.kg2, ModalityWeights{});
    for (const auto& [a, b] : r.truth.pairs()) CHECK(sim(a.index(), b.index()) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("generation is deterministic in the seed") {
    SynthConfig cfg;
    cfg.n_pairs = 80;
    cfg.noise_visual = 0.3;
    const SynthResult a = synth_generate(cfg), b = synth_generate(cfg);
    CHECK(a.kg1 == b.kg1);
    CHECK(a.kg2 == b.kg2);
    CHECK(a.truth == b.truth);
    cfg.rng_seed = 43;
    CHECK_FALSE(synth_generate(cfg).kg1 == a.kg1);
}

TEST_CASE("power-law degree profile hits the target mean") {
    SynthConfig cfg;
    cfg.n_pairs = 1000;
    cfg.degree_profile = DegreeProfile::power_law;
    cfg.power_law_exponent = 2.5;
    cfg.mean_degree = 6.0;
    const SynthResult r = synth_generate(cfg);
    for (const MultiModalKG* kg : {&r.kg1, &r.kg2}) {
        std::size_t deg = 0;
        for (const auto& nb : kg->adjacency) deg += nb.size();
        const double mean = double(deg) / double(kg->n_entities);
        CHECK(mean >= 5.4);
        CHECK(mean <= 6.6);
    }
}

TEST_CASE("infeasible degree requests are config errors") {
    SynthConfig cfg;
    cfg.n_pairs = 5;
    cfg.mean_degree = 5.0;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    CHECK_THROWS_AS(synth_config_from_json({{"n_pairs", 10}, {"bogus", 1}}), ConfigError);
}

TEST_CASE("UVP recovers every seed on noise-free data") {
    SynthConfig cfg;
    cfg.n_pairs = 150;
    const SynthResult r = synth_generate(cfg);
    const SeedSet s = uvp_seeds(fused_sim(r.kg1, r.kg2, ModalityWeights{}), 150);
    CHECK(s.size() == 150);
    for (const auto& p : s) CHECK(r.truth.contains(p.e1, p.e2));
}

TEST_CASE("dense region receives its share of edges") {
    SynthConfig cfg;
    cfg.n_pairs = 300;
    cfg.dense_fraction = 0.2;
    cfg.dense_edge_share = 0.6;
    const SynthResult r = synth_generate(cfg);
    std::size_t inside = 0, total = 0;
    for (std::size_t u = 0; u < r.kg1.n_entities; ++u) {
        for (auto v : r.kg1.adjacency[u]) {
            if (u >= v) continue;
            ++total;
            inside += r.dense1[u] && r.dense1[v];
        }
    }
    CHECK(double(inside) / double(total) >= 0.6);
}

TEST_CASE("config JSON round-trips") {
    SynthConfig cfg;
    cfg.n_pairs = 77;
    cfg.noise_visual_sparse = 0.4;
    cfg.degree_profile = DegreeProfile::power_law;
    const SynthConfig back = synth_config_from_json(to_json(cfg));
    CHECK(to_json(back) == to_json(cfg));
}
