#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "psqe/kg.hpp"
#include "psqe/matrix.hpp"

namespace testing {

inline psqe::Matrix rows(std::vector<std::vector<double>> r) {
    psqe::Matrix m(r.size(), r.empty() ? 0 : r[0].size());
    for (std::size_t i = 0; i < r.size(); ++i) {
        for (std::size_t j = 0; j < r[i].size(); ++j) m(i, j) = r[i][j];
    }
    return m;
}

inline psqe::Matrix gaussian(std::size_t n, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    psqe::Matrix m(n, d);
    for (double& v : m.data()) v = g(rng);
    return m;
}

inline psqe::MultiModalKG make_kg(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                                  psqe::Matrix visual, psqe::Matrix attribute, psqe::Matrix relation) {
    psqe::MultiModalKG kg;
    kg.n_entities = n;
    kg.adjacency = psqe::make_adjacency(n, edges);
    kg.visual = std::move(visual);
    kg.attribute = std::move(attribute);
    kg.relation = std::move(relation);
    return kg;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("psqe_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing
