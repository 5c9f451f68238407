#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "psqe/matrix.hpp"
#include "psqe/seeds.hpp"

namespace psqe {

/// Hard clustering over the stacked entity set [E1; E2].
struct ClusterAssignment {
    std::size_t k = 0;
    std::vector<std::uint32_t> labels;
    Matrix centroids;
    /// Leading `n_first` points belong to G1, the rest to G2.
    std::size_t n_first = 0;
    /// Within-cluster sum of squares after each Lloyd update.
    std::vector<double> inertia_trace;
    std::size_t iterations = 0;

    std::vector<std::size_t> sizes() const;
};

/// Lloyd's algorithm with k-means++ seeding. Nearest-centre ties go to the lower
/// cluster id; a cluster left empty is reseeded with the point farthest from its
/// centroid. Stops when no label changes or after max_iter updates.
ClusterAssignment kmeans(const Matrix& points, std::size_t k, std::size_t max_iter,
                         std::uint64_t seed);

/// Mean silhouette coefficient (Euclidean). Singletons and zero-distance
/// points contribute 0.
double silhouette_score(const Matrix& points, std::span<const std::uint32_t> labels, std::size_t k);

/// k in [k_min, k_max] (within [2, 5]) maximizing the mean silhouette; ties go
/// to the smaller k. Throws ConfigError for a bad range, DataError for fewer
/// than k_max points.
std::size_t select_k(const Matrix& points, std::size_t k_min, std::size_t k_max,
                     std::uint64_t seed, std::size_t max_iter = 100);

/// floor(size_j * n / sum(sizes)), remainder handed out one each in descending
/// size order (ties to the lower index).
std::vector<std::size_t> apportion(std::span<const std::size_t> sizes, std::size_t n);

struct ClusterQuota {
    std::vector<std::size_t> per_cluster;
    /// Cross-graph pairs available in each cluster: min(|C_j ∩ E1|, |C_j ∩ E2|).
    std::vector<std::size_t> capacity;
    std::size_t requested = 0;

    std::size_t total() const;
};

/// apportion() over cluster sizes, clamped to per-cluster capacity; any
/// clamped excess is re-offered to clusters with spare capacity in the same
/// descending-size order, so the total is min(n, total capacity).
ClusterQuota cluster_quota(const ClusterAssignment& assignment, std::size_t n);

/// Within each cluster, greedy one-to-one picks of up to m_j cross-graph pairs
/// whose endpoints both lie in the cluster and are unused. Returns existing
/// followed by the picks (stage S1), cluster by cluster.
SeedSet stage1_sample(const SimMatrix& sim, const ClusterAssignment& assignment,
                      const ClusterQuota& quota, const SeedSet& existing);

/// Stacks G1 rows on top of G2 rows.
Matrix stack_rows(const Matrix& top, const Matrix& bottom);

/// Audit dump, one "entity_index cluster_id" line per stacked entity.
void write_assignment(const std::filesystem::path& path, const ClusterAssignment& a);

}  // namespace psqe
