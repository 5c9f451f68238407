#include "psqe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace psqe {

using nlohmann::json;

double seed_precision(const SeedSet& seeds, const AlignmentMap& truth) {
    if (seeds.empty()) return 0.0;
    std::size_t hit = 0;
    for (const auto& p : seeds) hit += truth.contains(p.e1, p.e2);
    return static_cast<double>(hit) / static_cast<double>(seeds.size());
}

double degree_quartile(const MultiModalKG& kg) {
    if (kg.n_entities == 0) return 0.0;
    std::vector<double> deg(kg.n_entities);
    for (std::size_t e = 0; e < kg.n_entities; ++e) deg[e] = static_cast<double>(kg.adjacency[e].size());
    std::sort(deg.begin(), deg.end());
    const double pos = 0.25 * static_cast<double>(deg.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, deg.size() - 1);
    return deg[lo] + (pos - static_cast<double>(lo)) * (deg[hi] - deg[lo]);
}

namespace {

struct SideCount {
    std::size_t aggregated = 0;
    std::size_t scattered = 0;
    std::size_t edges = 0;
};

SideCount count_side(const MultiModalKG& kg, const std::vector<std::size_t>& entities) {
    SideCount c;
    const double q = degree_quartile(kg);
    std::vector<bool> seed(kg.n_entities, false);
    for (std::size_t e : entities) {
        seed[e] = true;
        if (static_cast<double>(kg.adjacency[e].size()) < q) {
            ++c.scattered;
        } else {
            ++c.aggregated;
        }
    }
    for (std::size_t u = 0; u < kg.n_entities; ++u) {
        for (std::uint32_t v : kg.adjacency[u]) {
            if (u < v && (seed[u] || seed[v])) ++c.edges;
        }
    }
    return c;
}

}  // namespace

QualityReport graph_coverage(const SeedSet& seeds, const MultiModalKG& kg1, const MultiModalKG& kg2) {
    QualityReport q;
    q.seeds = seeds.size();
    const SideCount a = count_side(kg1, seeds.first_indices());
    const SideCount b = count_side(kg2, seeds.second_indices());
    q.aggregated = a.aggregated + b.aggregated;
    q.scattered = a.scattered + b.scattered;
    q.edges = a.edges + b.edges;
    q.total_edges = kg1.edge_count() + kg2.edge_count();
    q.entities = kg1.n_entities == kg2.n_entities
                     ? static_cast<double>(kg1.n_entities)
                     : 0.5 * static_cast<double>(kg1.n_entities + kg2.n_entities);
    if (q.entities > 0.0) {
        q.coverage_raw += static_cast<double>(q.aggregated) / (2.0 * q.entities);
        q.coverage_raw += static_cast<double>(q.scattered) / q.entities;
    }
    if (q.total_edges > 0) q.coverage_raw += static_cast<double>(q.edges) / (2.0 * static_cast<double>(q.total_edges));
    q.coverage = std::clamp(q.coverage_raw, 0.0, 1.5);
    return q;
}

QualityReport quality_report(const SeedSet& seeds, const AlignmentMap& truth, const MultiModalKG& kg1,
                             const MultiModalKG& kg2) {
    QualityReport q = graph_coverage(seeds, kg1, kg2);
    for (const auto& p : seeds) q.correct += truth.contains(p.e1, p.e2);
    q.precision = seed_precision(seeds, truth);
    return q;
}

json to_json(const QualityReport& q) {
    return {{"seeds", q.seeds},           {"correct", q.correct},         {"precision", q.precision},
            {"aggregated", q.aggregated}, {"scattered", q.scattered},     {"edges", q.edges},
            {"total_edges", q.total_edges}, {"entities", q.entities},     {"coverage_raw", q.coverage_raw},
            {"coverage", q.coverage}};
}

RankingReport rank_alignment(const Matrix& f1, const Matrix& f2,
                             const std::vector<std::pair<EntityId, EntityId>>& test) {
    RankingReport r;
    if (test.empty()) return r;
    for (const auto& [a, b] : test) {
        const auto q = f1.row(a.index());
        const std::size_t j = b.index();
        const double target = dot(q, f2.row(j));
        std::size_t rank = 1;
        for (std::size_t k = 0; k < f2.rows(); ++k) {
            const double s = dot(q, f2.row(k));
            if (s > target || (s == target && k < j)) ++rank;
        }
        r.ranks.push_back(rank);
        r.hits1 += rank <= 1;
        r.hits10 += rank <= 10;
        r.mrr += 1.0 / static_cast<double>(rank);
    }
    const double n = static_cast<double>(test.size());
    r.hits1 /= n;
    r.hits10 /= n;
    r.mrr /= n;
    return r;
}

json to_json(const RankingReport& r, bool with_ranks) {
    json j = {{"hits1", r.hits1}, {"hits10", r.hits10}, {"mrr", r.mrr}, {"queries", r.ranks.size()}};
    if (with_ranks) j["ranks"] = r.ranks;
    return j;
}

std::string csv_header() { return "strategy,precision,coverage,hits1,hits10,mrr,rng_seed"; }

std::string csv_row(const std::string& strategy, const QualityReport& q, const RankingReport& r,
                    std::uint64_t rng_seed) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%.6f,%.6f,%.6f,%llu", strategy.c_str(), q.precision,
                  q.coverage, r.hits1, r.hits10, r.mrr, static_cast<unsigned long long>(rng_seed));
    return buf;
}

}  // namespace psqe
