#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "psqe/kg.hpp"
#include "psqe/matrix.hpp"
#include "psqe/seeds.hpp"

namespace psqe {

/// Fraction of seed pairs found in `truth`; 0 for an empty set.
double seed_precision(const SeedSet& seeds, const AlignmentMap& truth);

struct QualityReport {
    std::size_t seeds = 0;    // S
    std::size_t correct = 0;  // S_t
    double precision = 0.0;
    std::size_t aggregated = 0;  // S_a, seed entities outside the bottom degree quartile
    std::size_t scattered = 0;   // S_f, seed entities below their graph's 25th degree percentile
    std::size_t edges = 0;       // edges incident to a seed entity, both graphs
    std::size_t total_edges = 0; // G_Edge
    double entities = 0.0;       // G_n
    double coverage_raw = 0.0;   // S_a/(2 G_n) + Edge/(2 G_Edge) + S_f/G_n
    double coverage = 0.0;       // coverage_raw clamped to [0, 1.5]
};

/// 25th percentile of the degree distribution, linear interpolation between order statistics.
double degree_quartile(const MultiModalKG& kg);

/// Coverage components only; precision fields stay zero.
QualityReport graph_coverage(const SeedSet& seeds, const MultiModalKG& kg1, const MultiModalKG& kg2);

/// Coverage plus precision against `truth`.
QualityReport quality_report(const SeedSet& seeds, const AlignmentMap& truth, const MultiModalKG& kg1,
                             const MultiModalKG& kg2);

nlohmann::json to_json(const QualityReport& q);

struct RankingReport {
    double hits1 = 0.0;
    double hits10 = 0.0;
    double mrr = 0.0;
    std::vector<std::size_t> ranks;  // one per test pair, 1-based
};

/// For each test pair (i, j), the rank of j among all rows of F2 ordered by
/// descending F1_i · F2_k, ties to the lower index.
RankingReport rank_alignment(const Matrix& f1, const Matrix& f2, const std::vector<std::pair<EntityId, EntityId>>& test);

nlohmann::json to_json(const RankingReport& r, bool with_ranks = false);

/// "strategy,precision,coverage,hits1,hits10,mrr,rng_seed"
std::string csv_header();
std::string csv_row(const std::string& strategy, const QualityReport& q, const RankingReport& r,
                    std::uint64_t rng_seed);

}  // namespace psqe
