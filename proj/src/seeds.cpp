#include "psqe/seeds.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "psqe/errors.hpp"

namespace psqe {

const char* to_string(Stage s) {
    switch (s) {
        case Stage::uvp: return "UVP";
        case Stage::s1: return "S1";
        case Stage::s2: return "S2";
        case Stage::s3: return "S3";
    }
    return "?";
}

Stage stage_from_string(const std::string& s) {
    if (s == "UVP") return Stage::uvp;
    if (s == "S1") return Stage::s1;
    if (s == "S2") return Stage::s2;
    if (s == "S3") return Stage::s3;
    throw DataError("unknown seed stage '" + s + "'");
}

bool SeedSet::try_add(const SeedPair& p) {
    if (uses1(p.e1) || uses2(p.e2)) return false;
    used1_.insert(p.e1.value);
    used2_.insert(p.e2.value);
    pairs_.push_back(p);
    return true;
}

std::vector<std::size_t> SeedSet::first_indices() const {
    std::vector<std::size_t> out;
    out.reserve(pairs_.size());
    for (const auto& p : pairs_) out.push_back(p.e1.index());
    return out;
}

std::vector<std::size_t> SeedSet::second_indices() const {
    std::vector<std::size_t> out;
    out.reserve(pairs_.size());
    for (const auto& p : pairs_) out.push_back(p.e2.index());
    return out;
}

bool SeedSet::is_one_to_one() const {
    std::unordered_set<std::uint32_t> a, b;
    for (const auto& p : pairs_) {
        if (!a.insert(p.e1.value).second || !b.insert(p.e2.value).second) return false;
    }
    return a == used1_ && b == used2_;
}

SeedSet add_pairs(const SeedSet& s, std::span<const SeedPair> extra) {
    SeedSet out = s;
    for (const auto& p : extra) out.try_add(p);
    return out;
}

std::vector<SeedPair> greedy_one_to_one(const SimMatrix& sim, std::span<const std::size_t> rows,
                                        std::span<const std::size_t> cols, std::size_t k,
                                        const SeedSet& taken, Stage stage) {
    std::vector<SeedPair> picks;
    if (k == 0) return picks;

    std::vector<std::size_t> free_rows, free_cols;
    for (std::size_t i : rows) {
        if (!taken.uses1(EntityId(i))) free_rows.push_back(i);
    }
    for (std::size_t j : cols) {
        if (!taken.uses2(EntityId(j))) free_cols.push_back(j);
    }
    std::sort(free_rows.begin(), free_rows.end());
    std::sort(free_cols.begin(), free_cols.end());
    if (free_rows.empty() || free_cols.empty()) return picks;

    struct Candidate {
        double score;
        std::uint32_t i, j;
    };
    std::vector<Candidate> cand;
    cand.reserve(free_rows.size() * free_cols.size());
    for (std::size_t i : free_rows) {
        const auto row = sim.row(i);
        for (std::size_t j : free_cols) {
            cand.push_back({row[j], static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});
        }
    }
    std::sort(cand.begin(), cand.end(), [](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });

    const std::size_t limit = std::min({k, free_rows.size(), free_cols.size()});
    std::unordered_set<std::uint32_t> used_i, used_j;
    for (const auto& c : cand) {
        if (picks.size() == limit) break;
        if (used_i.contains(c.i) || used_j.contains(c.j)) continue;
        used_i.insert(c.i);
        used_j.insert(c.j);
        picks.push_back({EntityId(c.i), EntityId(c.j), c.score, stage});
    }
    return picks;
}

SeedSet uvp_seeds(const SimMatrix& sim, std::size_t k, const SeedSet& exclude) {
    std::vector<std::size_t> rows(sim.rows()), cols(sim.cols());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    std::iota(cols.begin(), cols.end(), std::size_t{0});
    SeedSet out;
    for (const auto& p : greedy_one_to_one(sim, rows, cols, k, exclude, Stage::uvp)) out.try_add(p);
    return out;
}

std::string format_seeds(const SeedSet& s) {
    std::string out;
    char buf[96];
    for (const auto& p : s) {
        std::snprintf(buf, sizeof buf, "%u %u %.17g %s\n", p.e1.value, p.e2.value, p.score,
                      to_string(p.stage));
        out += buf;
    }
    return out;
}

void write_seeds(const std::filesystem::path& path, const SeedSet& s) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write " + path.string());
    os << format_seeds(s);
}

SeedSet read_seeds(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    SeedSet s;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::size_t a = 0, b = 0;
        double score = 0.0;
        std::string stage = "UVP";
        if (!(ls >> a >> b)) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed seed line");
        }
        ls >> score >> stage;
        if (!s.try_add({EntityId(a), EntityId(b), score, stage_from_string(stage)})) {
            throw DataError(path.string() + ":" + std::to_string(lineno) +
                            ": seed pair reuses an entity (one-to-one violated)");
        }
    }
    return s;
}

}  // namespace psqe
