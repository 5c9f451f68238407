#include "psqe/expansion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <unordered_set>

#include "psqe/enhancer.hpp"
#include "psqe/errors.hpp"

namespace psqe {

using nlohmann::json;

void validate(const ExpansionConfig& cfg) {
    if (!(cfg.eta > -1.0 && cfg.eta <= 1.0)) throw ConfigError("expansion: eta must lie in (-1, 1]");
}

json to_json(const ExpansionConfig& cfg) {
    json j = {{"eta", cfg.eta}};
    j["max_new"] = cfg.max_new ? json(*cfg.max_new) : json(nullptr);
    return j;
}

ExpansionConfig expansion_config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("expansion config must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (key != "eta" && key != "max_new") throw ConfigError("expansion: unknown key \"" + key + "\"");
    }
    ExpansionConfig cfg;
    try {
        cfg.eta = j.value("eta", cfg.eta);
        if (j.contains("max_new") && !j["max_new"].is_null()) cfg.max_new = j["max_new"].get<std::size_t>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("expansion: ") + e.what());
    }
    validate(cfg);
    return cfg;
}

std::vector<NeighborCandidate> neighbor_candidates(const SeedSet& seeds, const MultiModalKG& kg1,
                                                   const MultiModalKG& kg2) {
    std::vector<NeighborCandidate> out;
    std::unordered_set<std::uint64_t> seen;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
        const auto& n1 = kg1.adjacency.at(seeds[s].e1.index());
        const auto& n2 = kg2.adjacency.at(seeds[s].e2.index());
        for (std::uint32_t a : n1) {
            for (std::uint32_t b : n2) {
                const std::uint64_t key = (std::uint64_t{a} << 32) | b;
                if (seen.insert(key).second) out.push_back({EntityId{a}, EntityId{b}, s});
            }
        }
    }
    return out;
}

Matrix concat_features(const Matrix& orig, const Matrix& enh) {
    const Matrix* blocks[] = {&orig, &enh};
    return normalized_rows(hconcat(blocks));
}

double neighbor_score(std::span<const double> orig1, std::span<const double> orig2,
                      std::span<const double> enh1, std::span<const double> enh2) {
    const double n1 = std::sqrt(dot(orig1, orig1) + dot(enh1, enh1));
    const double n2 = std::sqrt(dot(orig2, orig2) + dot(enh2, enh2));
    if (n1 == 0.0 || n2 == 0.0) return 0.0;
    return (dot(orig1, orig2) + dot(enh1, enh2)) / (n1 * n2);
}

const char* to_string(AuditReason r) {
    switch (r) {
        case AuditReason::admitted: return "admitted";
        case AuditReason::below_threshold: return "below_threshold";
        case AuditReason::e1_used: return "e1_used";
        case AuditReason::e2_used: return "e2_used";
        case AuditReason::cap_reached: return "cap_reached";
    }
    return "?";
}

ExpansionResult expand(const SeedSet& seeds, const ExpansionConfig& cfg, const MultiModalKG& kg1,
                       const MultiModalKG& kg2, const Matrix& orig1, const Matrix& orig2,
                       const Matrix& enh1, const Matrix& enh2) {
    validate(cfg);
    if (orig1.rows() != kg1.n_entities || enh1.rows() != kg1.n_entities ||
        orig2.rows() != kg2.n_entities || enh2.rows() != kg2.n_entities) {
        throw DataError("expand: feature rows do not match the graphs' entity counts");
    }
    const auto candidates = neighbor_candidates(seeds, kg1, kg2);
    std::vector<AuditEntry> scored;
    scored.reserve(candidates.size());
    for (const auto& c : candidates) {
        const double s = neighbor_score(orig1.row(c.e1.index()), orig2.row(c.e2.index()),
                                        enh1.row(c.e1.index()), enh2.row(c.e2.index()));
        scored.push_back({seeds[c.source], c, s, AuditReason::below_threshold});
    }
    std::sort(scored.begin(), scored.end(), [](const AuditEntry& a, const AuditEntry& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.candidate.e1 != b.candidate.e1) return a.candidate.e1 < b.candidate.e1;
        return a.candidate.e2 < b.candidate.e2;
    });

    ExpansionResult out;
    out.seeds = seeds;
    std::size_t added = 0;
    for (auto& entry : scored) {
        if (entry.score < cfg.eta) {
            entry.reason = AuditReason::below_threshold;
        } else if (out.seeds.uses1(entry.candidate.e1)) {
            entry.reason = AuditReason::e1_used;
        } else if (out.seeds.uses2(entry.candidate.e2)) {
            entry.reason = AuditReason::e2_used;
        } else if (cfg.max_new && added >= *cfg.max_new) {
            entry.reason = AuditReason::cap_reached;
        } else {
            out.seeds.try_add({entry.candidate.e1, entry.candidate.e2, entry.score, Stage::s3});
            entry.reason = AuditReason::admitted;
            ++added;
        }
    }
    out.audit = std::move(scored);
    return out;
}

SeedSet recheck(const SeedSet& seeds, const Matrix& orig1, const Matrix& orig2) {
    return mic_correct(seeds, orig1, orig2);
}

void write_audit(const std::filesystem::path& path, std::span<const AuditEntry> audit) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write " + path.string());
    os << "source_e1,source_e2,new_e1,new_e2,score,admitted,reason\n";
    char buf[160];
    for (const auto& a : audit) {
        std::snprintf(buf, sizeof buf, "%u,%u,%u,%u,%.17g,%s,%s\n", a.source.e1.value, a.source.e2.value,
                      a.candidate.e1.value, a.candidate.e2.value, a.score,
                      a.reason == AuditReason::admitted ? "true" : "false", to_string(a.reason));
        os << buf;
    }
}

}  // namespace psqe
