#include "psqe/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include "psqe/errors.hpp"
#include "psqe/rng.hpp"

namespace psqe {

using nlohmann::json;

void validate(const SynthConfig& cfg) {
    auto fail = [](const std::string& msg) { throw ConfigError("synth: " + msg); };
    if (cfg.n_pairs < 2) fail("n_pairs must be at least 2");
    if (cfg.dim_visual == 0 || cfg.dim_attribute == 0 || cfg.dim_relation == 0) {
        fail("modality dimensions must be positive");
    }
    if (cfg.cluster_count == 0 || cfg.cluster_count > cfg.n_pairs) {
        fail("cluster_count must be in [1, n_pairs]");
    }
    for (double s : {cfg.spread_visual, cfg.spread_attribute, cfg.spread_relation, cfg.noise_visual,
                     cfg.noise_attribute, cfg.noise_relation, cfg.noise_visual_sparse.value_or(0.0),
                     cfg.cluster_separation}) {
        if (!(s >= 0.0) || !std::isfinite(s)) fail("spreads, noise levels and separation must be >= 0");
    }
    if (!(cfg.mean_degree >= 0.0)) fail("mean_degree must be >= 0");
    if (cfg.mean_degree >= static_cast<double>(cfg.n_pairs)) {
        fail("infeasible degree profile: mean degree " + std::to_string(cfg.mean_degree) +
             " >= entity count " + std::to_string(cfg.n_pairs));
    }
    if (cfg.mean_degree > static_cast<double>(cfg.n_pairs - 1) * 0.5) {
        fail("infeasible degree profile: mean degree " + std::to_string(cfg.mean_degree) +
             " exceeds half the possible neighbors");
    }
    if (cfg.degree_profile == DegreeProfile::power_law && !(cfg.power_law_exponent > 1.0)) {
        fail("power_law_exponent must be > 1");
    }
    if (cfg.dense_fraction < 0.0 || cfg.dense_fraction > 1.0) fail("dense_fraction must be in [0, 1]");
    if (cfg.dense_edge_share < 0.0 || cfg.dense_edge_share > 1.0) fail("dense_edge_share must be in [0, 1]");
    if (cfg.edge_drop < 0.0 || cfg.edge_drop >= 1.0) fail("edge_drop must be in [0, 1)");

    const auto n_dense = static_cast<std::size_t>(std::llround(cfg.dense_fraction * cfg.n_pairs));
    const auto total = static_cast<std::size_t>(std::llround(cfg.n_pairs * cfg.mean_degree / 2.0));
    const auto dense_edges = static_cast<std::size_t>(std::llround(total * cfg.dense_edge_share));
    if (dense_edges > 0 && dense_edges * 2 > n_dense * (n_dense > 0 ? n_dense - 1 : 0) / 2) {
        fail("infeasible degree profile: dense region too small for " + std::to_string(dense_edges) +
             " edges");
    }
}

SynthConfig synth_config_from_json(const json& j) {
    static const std::set<std::string> known = {
        "n_pairs", "dim_visual", "dim_attribute", "dim_relation", "spread_visual",
        "spread_attribute", "spread_relation", "noise_visual", "noise_attribute",
        "noise_relation", "noise_visual_sparse", "cluster_count", "cluster_separation",
        "degree_profile", "power_law_exponent", "mean_degree", "dense_fraction",
        "dense_edge_share", "edge_drop", "rng_seed"};
    if (!j.is_object()) throw ConfigError("synth config must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) throw ConfigError("synth: unknown key \"" + key + "\"");
    }
    SynthConfig c;
    try {
        c.n_pairs = j.value("n_pairs", c.n_pairs);
        c.dim_visual = j.value("dim_visual", c.dim_visual);
        c.dim_attribute = j.value("dim_attribute", c.dim_attribute);
        c.dim_relation = j.value("dim_relation", c.dim_relation);
        c.spread_visual = j.value("spread_visual", c.spread_visual);
        c.spread_attribute = j.value("spread_attribute", c.spread_attribute);
        c.spread_relation = j.value("spread_relation", c.spread_relation);
        c.noise_visual = j.value("noise_visual", c.noise_visual);
        c.noise_attribute = j.value("noise_attribute", c.noise_attribute);
        c.noise_relation = j.value("noise_relation", c.noise_relation);
        if (j.contains("noise_visual_sparse") && !j["noise_visual_sparse"].is_null()) {
            c.noise_visual_sparse = j["noise_visual_sparse"].get<double>();
        }
        c.cluster_count = j.value("cluster_count", c.cluster_count);
        c.cluster_separation = j.value("cluster_separation", c.cluster_separation);
        const std::string profile = j.value("degree_profile", std::string("uniform"));
        if (profile == "uniform") {
            c.degree_profile = DegreeProfile::uniform;
        } else if (profile == "power_law") {
            c.degree_profile = DegreeProfile::power_law;
        } else {
            throw ConfigError("synth: degree_profile must be \"uniform\" or \"power_law\"");
        }
        c.power_law_exponent = j.value("power_law_exponent", c.power_law_exponent);
        c.mean_degree = j.value("mean_degree", c.mean_degree);
        c.dense_fraction = j.value("dense_fraction", c.dense_fraction);
        c.dense_edge_share = j.value("dense_edge_share", c.dense_edge_share);
        c.edge_drop = j.value("edge_drop", c.edge_drop);
        c.rng_seed = j.value("rng_seed", c.rng_seed);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("synth: ") + e.what());
    }
    return c;
}

json to_json(const SynthConfig& c) {
    json j = {{"n_pairs", c.n_pairs},
              {"dim_visual", c.dim_visual},
              {"dim_attribute", c.dim_attribute},
              {"dim_relation", c.dim_relation},
              {"spread_visual", c.spread_visual},
              {"spread_attribute", c.spread_attribute},
              {"spread_relation", c.spread_relation},
              {"noise_visual", c.noise_visual},
              {"noise_attribute", c.noise_attribute},
              {"noise_relation", c.noise_relation},
              {"cluster_count", c.cluster_count},
              {"cluster_separation", c.cluster_separation},
              {"degree_profile", c.degree_profile == DegreeProfile::uniform ? "uniform" : "power_law"},
              {"power_law_exponent", c.power_law_exponent},
              {"mean_degree", c.mean_degree},
              {"dense_fraction", c.dense_fraction},
              {"dense_edge_share", c.dense_edge_share},
              {"edge_drop", c.edge_drop},
              {"rng_seed", c.rng_seed}};
    j["noise_visual_sparse"] = c.noise_visual_sparse ? json(*c.noise_visual_sparse) : json(nullptr);
    return j;
}

namespace {

using Edge = std::pair<std::size_t, std::size_t>;

struct EdgeSet {
    std::set<Edge> edges;
    bool add(std::size_t u, std::size_t v) {
        if (u == v) return false;
        return edges.insert(std::minmax(u, v)).second;
    }
};

void add_uniform_edges(EdgeSet& es, std::size_t count, std::size_t lo, std::size_t hi, Rng& rng) {
    std::uniform_int_distribution<std::size_t> pick(lo, hi - 1);
    std::size_t added = 0;
    while (added < count) {
        if (es.add(pick(rng), pick(rng))) ++added;
    }
}

void add_power_law_edges(EdgeSet& es, std::size_t count, std::size_t n, double exponent, Rng& rng) {
    // Chung-Lu style: endpoint probability proportional to rank^(-1/(exponent-1)),
    // with ranks assigned by a random permutation so hubs are not tied to index.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<double> weights(n);
    for (std::size_t r = 0; r < n; ++r) {
        weights[order[r]] = std::pow(static_cast<double>(r + 1), -1.0 / (exponent - 1.0));
    }
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    std::uniform_int_distribution<std::size_t> uniform(0, n - 1);
    std::size_t added = 0;
    std::size_t misses = 0;
    while (added < count) {
        // Very heavy tails can saturate hub neighborhoods; fall back to a uniform
        // second endpoint after repeated collisions.
        const std::size_t u = pick(rng);
        const std::size_t v = misses > 64 ? uniform(rng) : pick(rng);
        if (es.add(u, v)) {
            ++added;
            misses = 0;
        } else {
            ++misses;
        }
    }
}

Matrix observe(const Matrix& latent, const std::vector<double>& noise_per_row, Rng& rng) {
    Matrix out = latent;
    const double scale = 1.0 / std::sqrt(static_cast<double>(latent.cols()));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t r = 0; r < out.rows(); ++r) {
        const double s = noise_per_row[r] * scale;
        for (double& x : out.row(r)) {
            const double z = gauss(rng);
            if (s > 0.0) x += s * z;
        }
    }
    return out;
}

Matrix plant_latents(std::size_t n, std::size_t dim, std::size_t k, double separation, double spread,
                     const std::vector<std::uint32_t>& cluster, Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix centres(k, dim);
    for (std::size_t c = 0; c < k; ++c) {
        auto row = centres.row(c);
        for (double& x : row) x = gauss(rng);
        normalize(row);
        for (double& x : row) x *= separation;
    }
    Matrix latent(n, dim);
    const double s = spread / std::sqrt(static_cast<double>(dim));
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = centres.row(cluster[i]);
        auto row = latent.row(i);
        for (std::size_t d = 0; d < dim; ++d) row[d] = c[d] + s * gauss(rng);
    }
    return latent;
}

// Rounds to float precision so files written by save_kg reload bit-exactly.
void round_to_float(Matrix& m) {
    for (double& x : m.data()) x = static_cast<double>(static_cast<float>(x));
}

MultiModalKG assemble(const std::vector<std::size_t>& pos_of_latent,
                      const std::vector<Edge>& edges, double drop, Rng& rng, Matrix visual,
                      Matrix attribute, Matrix relation) {
    const std::size_t n = pos_of_latent.size();
    std::bernoulli_distribution dropped(drop);
    std::vector<Edge> kept;
    kept.reserve(edges.size());
    for (const auto& [u, v] : edges) {
        const bool d = drop > 0.0 && dropped(rng);
        if (!d) kept.emplace_back(pos_of_latent[u], pos_of_latent[v]);
    }
    MultiModalKG kg;
    kg.n_entities = n;
    kg.adjacency = make_adjacency(n, kept);
    auto permute = [&](const Matrix& m) {
        Matrix out(m.rows(), m.cols());
        for (std::size_t l = 0; l < n; ++l) {
            const auto src = m.row(l);
            std::copy(src.begin(), src.end(), out.row(pos_of_latent[l]).begin());
        }
        round_to_float(out);
        return out;
    };
    kg.visual = permute(visual);
    kg.attribute = permute(attribute);
    kg.relation = permute(relation);
    kg.labels.resize(n);
    for (std::size_t l = 0; l < n; ++l) kg.labels[pos_of_latent[l]] = "latent_" + std::to_string(l);
    return kg;
}

}  // namespace

SynthResult synth_generate(const SynthConfig& cfg) {
    validate(cfg);
    const std::size_t n = cfg.n_pairs;
    const std::size_t k = cfg.cluster_count;
    const auto n_dense = static_cast<std::size_t>(std::llround(cfg.dense_fraction * n));

    // Latent entity l: cluster by contiguous block, dense region = leading block.
    std::vector<std::uint32_t> cluster(n);
    for (std::size_t l = 0; l < n; ++l) cluster[l] = static_cast<std::uint32_t>(l * k / n);

    Rng structure_rng(derive_seed(cfg.rng_seed, stream::synth_structure));
    const auto total = static_cast<std::size_t>(std::llround(n * cfg.mean_degree / 2.0));
    const auto dense_edges = static_cast<std::size_t>(std::llround(total * cfg.dense_edge_share));
    EdgeSet es;
    if (dense_edges > 0) add_uniform_edges(es, dense_edges, 0, n_dense, structure_rng);
    if (cfg.degree_profile == DegreeProfile::uniform) {
        add_uniform_edges(es, total - dense_edges, 0, n, structure_rng);
    } else {
        add_power_law_edges(es, total - dense_edges, n, cfg.power_law_exponent, structure_rng);
    }
    const std::vector<Edge> edges(es.edges.begin(), es.edges.end());

    Rng feature_rng(derive_seed(cfg.rng_seed, stream::synth_features));
    const Matrix lat_v = plant_latents(n, cfg.dim_visual, k, cfg.cluster_separation,
                                       cfg.spread_visual, cluster, feature_rng);
    const Matrix lat_a = plant_latents(n, cfg.dim_attribute, k, cfg.cluster_separation,
                                       cfg.spread_attribute, cluster, feature_rng);
    const Matrix lat_r = plant_latents(n, cfg.dim_relation, k, cfg.cluster_separation,
                                       cfg.spread_relation, cluster, feature_rng);

    std::vector<double> nv(n, cfg.noise_visual);
    for (std::size_t l = n_dense; l < n; ++l) nv[l] = cfg.noise_visual_sparse.value_or(cfg.noise_visual);
    const std::vector<double> na(n, cfg.noise_attribute);
    const std::vector<double> nr(n, cfg.noise_relation);

    Rng perm_rng(derive_seed(cfg.rng_seed, stream::synth_permutation));
    std::vector<std::size_t> pos1(n), pos2(n);
    std::iota(pos1.begin(), pos1.end(), std::size_t{0});
    std::iota(pos2.begin(), pos2.end(), std::size_t{0});
    std::shuffle(pos1.begin(), pos1.end(), perm_rng);
    std::shuffle(pos2.begin(), pos2.end(), perm_rng);

    SynthResult out;
    {
        Matrix v = observe(lat_v, nv, feature_rng);
        Matrix a = observe(lat_a, na, feature_rng);
        Matrix r = observe(lat_r, nr, feature_rng);
        out.kg1 = assemble(pos1, edges, cfg.edge_drop, structure_rng, std::move(v), std::move(a),
                           std::move(r));
    }
    {
        Matrix v = observe(lat_v, nv, feature_rng);
        Matrix a = observe(lat_a, na, feature_rng);
        Matrix r = observe(lat_r, nr, feature_rng);
        out.kg2 = assemble(pos2, edges, cfg.edge_drop, structure_rng, std::move(v), std::move(a),
                           std::move(r));
    }

    std::vector<std::pair<EntityId, EntityId>> pairs(n);
    out.cluster1.resize(n);
    out.cluster2.resize(n);
    out.dense1.resize(n);
    out.dense2.resize(n);
    for (std::size_t l = 0; l < n; ++l) {
        pairs[pos1[l]] = {EntityId(pos1[l]), EntityId(pos2[l])};
        out.cluster1[pos1[l]] = cluster[l];
        out.cluster2[pos2[l]] = cluster[l];
        out.dense1[pos1[l]] = l < n_dense;
        out.dense2[pos2[l]] = l < n_dense;
    }
    out.truth = AlignmentMap(std::move(pairs));
    return out;
}

}  // namespace psqe
