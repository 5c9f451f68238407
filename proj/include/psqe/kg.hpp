#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "psqe/matrix.hpp"

namespace psqe {

/// Index of an entity, local to one graph.
struct EntityId {
    std::uint32_t value = 0;

    constexpr EntityId() = default;
    constexpr explicit EntityId(std::size_t v) : value(static_cast<std::uint32_t>(v)) {}
    constexpr std::size_t index() const noexcept { return value; }

    auto operator<=>(const EntityId&) const = default;
};

enum class Modality { visual = 0, attribute = 1, relation = 2 };
inline constexpr Modality kModalities[] = {Modality::visual, Modality::attribute,
                                           Modality::relation};

const char* to_string(Modality m);

using Adjacency = std::vector<std::vector<std::uint32_t>>;

/// One multimodal knowledge graph: undirected entity adjacency plus one
/// feature matrix per modality (rows == n_entities).
struct MultiModalKG {
    std::size_t n_entities = 0;
    Adjacency adjacency;
    Matrix visual;
    Matrix attribute;
    Matrix relation;
    std::vector<std::string> labels;

    const Matrix& features(Modality m) const;
    Matrix& features(Modality m);

    std::size_t degree(std::size_t e) const { return adjacency[e].size(); }
    std::size_t edge_count() const;

    bool operator==(const MultiModalKG&) const = default;
};

/// Builds sorted, deduplicated undirected neighbor lists.
/// Throws DataError on self-loops or out-of-range endpoints.
Adjacency make_adjacency(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges);

/// Ground-truth one-to-one correspondence between two graphs.
class AlignmentMap {
public:
    AlignmentMap() = default;
    explicit AlignmentMap(std::vector<std::pair<EntityId, EntityId>> pairs);

    const std::vector<std::pair<EntityId, EntityId>>& pairs() const noexcept { return pairs_; }
    std::size_t size() const noexcept { return pairs_.size(); }
    bool contains(EntityId e1, EntityId e2) const;
    std::optional<EntityId> target_of(EntityId e1) const;

    bool operator==(const AlignmentMap& o) const { return pairs_ == o.pairs_; }

private:
    std::vector<std::pair<EntityId, EntityId>> pairs_;
    std::unordered_map<std::uint32_t, std::uint32_t> forward_;
};

// --- binary matrix container -------------------------------------------------
// 16-byte header: "PSQE", u32 version, u32 rows, u32 cols (little-endian),
// followed by row-major little-endian float32 payload.

inline constexpr std::uint32_t kMatrixFormatVersion = 1;

Matrix read_matrix(const std::filesystem::path& path);
void write_matrix(const std::filesystem::path& path, const Matrix& m);

AlignmentMap read_alignment(const std::filesystem::path& path);
void write_alignment(const std::filesystem::path& path, const AlignmentMap& truth);

// --- manifest IO ---------------------------------------------------------------

struct LoadOptions {
    /// Seeds the normal draws that replace missing (all-NaN) visual rows.
    std::uint64_t fill_seed = 42;
};

/// Loads and validates a graph from its JSON manifest. Paths inside the
/// manifest are resolved relative to the manifest's directory.
MultiModalKG load_kg(const std::filesystem::path& manifest_path, const LoadOptions& opts = {});

/// Writes `<dir>/<stem>.json` plus adjacency, label and matrix files; returns the manifest path.
std::filesystem::path save_kg(const MultiModalKG& kg, const std::filesystem::path& dir,
                              const std::string& stem = "kg");

/// Replaces every all-NaN row of `visual` with draws from N(mean, std) of the
/// remaining entries. Returns the indices of replaced rows.
std::vector<std::size_t> fill_missing_visual(Matrix& visual, std::uint64_t seed);

// --- validation ----------------------------------------------------------------

struct Violation {
    enum class Kind {
        shape,
        non_finite,
        asymmetric_edge,
        self_loop,
        out_of_range,
        unsorted_neighbors,
        label_count
    };
    Kind kind;
    std::optional<std::size_t> entity;
    std::string detail;
};

const char* to_string(Violation::Kind k);

/// Empty iff every MultiModalKG invariant holds.
std::vector<Violation> validate_kg(const MultiModalKG& kg);

}  // namespace psqe
