#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "psqe/kg.hpp"
#include "psqe/similarity.hpp"

namespace psqe {

/// Pipeline step that produced a seed pair.
enum class Stage { uvp, s1, s2, s3 };

const char* to_string(Stage s);
Stage stage_from_string(const std::string& s);

struct SeedPair {
    EntityId e1;
    EntityId e2;
    double score = 0.0;
    Stage stage = Stage::uvp;

    bool operator==(const SeedPair&) const = default;
};

/// Ordered list of cross-graph pairs; no entity appears twice on either side.
class SeedSet {
public:
    SeedSet() = default;

    /// Appends `p` unless it would reuse an entity; returns whether it was added.
    bool try_add(const SeedPair& p);

    bool uses1(EntityId e) const { return used1_.contains(e.value); }
    bool uses2(EntityId e) const { return used2_.contains(e.value); }

    const std::vector<SeedPair>& pairs() const noexcept { return pairs_; }
    std::size_t size() const noexcept { return pairs_.size(); }
    bool empty() const noexcept { return pairs_.empty(); }
    auto begin() const { return pairs_.begin(); }
    auto end() const { return pairs_.end(); }
    const SeedPair& operator[](std::size_t k) const { return pairs_[k]; }

    std::vector<std::size_t> first_indices() const;
    std::vector<std::size_t> second_indices() const;

    /// Checks the one-to-one invariant and used-set consistency from scratch.
    bool is_one_to_one() const;

    bool operator==(const SeedSet& o) const { return pairs_ == o.pairs_; }

private:
    std::vector<SeedPair> pairs_;
    std::unordered_set<std::uint32_t> used1_;
    std::unordered_set<std::uint32_t> used2_;
};

/// Copy of `s` extended by `extra`; pairs that would break one-to-one are
/// skipped in input order.
SeedSet add_pairs(const SeedSet& s, std::span<const SeedPair> extra);

/// Greedy one-to-one selection: candidates (i in rows, j in cols) are visited in
/// descending sim(i, j), ties broken by lower i then lower j; a pair is taken
/// when neither endpoint is used by `taken` or an earlier pick. Stops after k picks.
std::vector<SeedPair> greedy_one_to_one(const SimMatrix& sim, std::span<const std::size_t> rows,
                                        std::span<const std::size_t> cols, std::size_t k,
                                        const SeedSet& taken, Stage stage);

/// UVP pivots: greedy one-to-one over the whole matrix, never choosing entities
/// already in `exclude`. The result holds only the new picks.
SeedSet uvp_seeds(const SimMatrix& sim, std::size_t k, const SeedSet& exclude = {});

/// Text form, one pair per line: "e1 e2 score stage".
void write_seeds(const std::filesystem::path& path, const SeedSet& s);
SeedSet read_seeds(const std::filesystem::path& path);
std::string format_seeds(const SeedSet& s);

}  // namespace psqe
