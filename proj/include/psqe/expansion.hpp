#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "psqe/kg.hpp"
#include "psqe/matrix.hpp"
#include "psqe/seeds.hpp"

namespace psqe {

struct ExpansionConfig {
    double eta = 0.8;
    std::optional<std::size_t> max_new;
};

void validate(const ExpansionConfig& cfg);
nlohmann::json to_json(const ExpansionConfig& cfg);
ExpansionConfig expansion_config_from_json(const nlohmann::json& j);

struct NeighborCandidate {
    EntityId e1;
    EntityId e2;
    /// Index into the seed list of the first pair that proposed this candidate.
    std::size_t source = 0;
};

/// Cross products N(e1) x N(e2) over every seed pair, duplicates dropped (the
/// first proposing seed wins). Order follows the seed list, then neighbor order.
std::vector<NeighborCandidate> neighbor_candidates(const SeedSet& seeds, const MultiModalKG& kg1,
                                                   const MultiModalKG& kg2);

/// Row-wise L2-normalized concatenation [orig | enh].
Matrix concat_features(const Matrix& orig, const Matrix& enh);

/// Cosine between the concatenations [orig1_i | enh1_i] and [orig2_j | enh2_j].
double neighbor_score(std::span<const double> orig1, std::span<const double> orig2,
                      std::span<const double> enh1, std::span<const double> enh2);

enum class AuditReason { admitted, below_threshold, e1_used, e2_used, cap_reached };

const char* to_string(AuditReason r);

struct AuditEntry {
    SeedPair source;
    NeighborCandidate candidate;
    double score = 0.0;
    AuditReason reason = AuditReason::admitted;
};

struct ExpansionResult {
    SeedSet seeds;  // input pairs followed by the additions
    std::vector<AuditEntry> audit;
};

/// Scores every neighbor candidate on the concatenated features and admits those
/// with score >= eta whose endpoints are still free, in descending score order
/// (ties to lower e1, then lower e2). Added pairs carry stage S3.
ExpansionResult expand(const SeedSet& seeds, const ExpansionConfig& cfg, const MultiModalKG& kg1,
                       const MultiModalKG& kg2, const Matrix& orig1, const Matrix& orig2,
                       const Matrix& enh1, const Matrix& enh2);

/// MIC on the original fused features.
SeedSet recheck(const SeedSet& seeds, const Matrix& orig1, const Matrix& orig2);

void write_audit(const std::filesystem::path& path, std::span<const AuditEntry> audit);

}  // namespace psqe
