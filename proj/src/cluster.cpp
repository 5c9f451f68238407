#include "psqe/cluster.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>

#include "psqe/errors.hpp"
#include "psqe/rng.hpp"

namespace psqe {

std::vector<std::size_t> ClusterAssignment::sizes() const {
    std::vector<std::size_t> s(k, 0);
    for (auto l : labels) ++s[l];
    return s;
}

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        const double t = a[d] - b[d];
        s += t * t;
    }
    return s;
}

Matrix plus_plus_init(const Matrix& points, std::size_t k, Rng& rng) {
    const std::size_t n = points.rows();
    Matrix centres(k, points.cols());
    std::uniform_int_distribution<std::size_t> first(0, n - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    auto copy_point = [&](std::size_t c, std::size_t p) {
        const auto src = points.row(p);
        std::copy(src.begin(), src.end(), centres.row(c).begin());
    };
    copy_point(0, first(rng));
    std::vector<double> best(n);
    for (std::size_t p = 0; p < n; ++p) best[p] = sq_dist(points.row(p), centres.row(0));

    for (std::size_t c = 1; c < k; ++c) {
        const double total = std::accumulate(best.begin(), best.end(), 0.0);
        std::size_t chosen = 0;
        if (total > 0.0) {
            const double target = unit(rng) * total;
            double acc = 0.0;
            chosen = n - 1;
            for (std::size_t p = 0; p < n; ++p) {
                acc += best[p];
                if (acc > target && best[p] > 0.0) {
                    chosen = p;
                    break;
                }
            }
        } else {
            chosen = first(rng);
        }
        copy_point(c, chosen);
        for (std::size_t p = 0; p < n; ++p) {
            best[p] = std::min(best[p], sq_dist(points.row(p), centres.row(c)));
        }
    }
    return centres;
}

void update_centroids(const Matrix& points, const std::vector<std::uint32_t>& labels,
                      Matrix& centres) {
    const std::size_t k = centres.rows();
    std::vector<std::size_t> count(k, 0);
    Matrix sum(k, points.cols(), 0.0);
    for (std::size_t p = 0; p < points.rows(); ++p) {
        auto dst = sum.row(labels[p]);
        const auto src = points.row(p);
        for (std::size_t d = 0; d < src.size(); ++d) dst[d] += src[d];
        ++count[labels[p]];
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (count[c] == 0) continue;
        auto dst = centres.row(c);
        const auto src = sum.row(c);
        for (std::size_t d = 0; d < dst.size(); ++d) dst[d] = src[d] / static_cast<double>(count[c]);
    }
}

double inertia(const Matrix& points, const std::vector<std::uint32_t>& labels, const Matrix& centres) {
    double s = 0.0;
    for (std::size_t p = 0; p < points.rows(); ++p) s += sq_dist(points.row(p), centres.row(labels[p]));
    return s;
}

// Moves the point farthest from its own centroid (taken from a cluster with
// more than one member) into each empty cluster.
void repair_empty(const Matrix& points, std::vector<std::uint32_t>& labels, const Matrix& centres) {
    const std::size_t k = centres.rows();
    std::vector<std::size_t> count(k, 0);
    for (auto l : labels) ++count[l];
    for (std::size_t c = 0; c < k; ++c) {
        if (count[c] != 0) continue;
        std::size_t far = points.rows();
        double far_d = -1.0;
        for (std::size_t p = 0; p < points.rows(); ++p) {
            if (count[labels[p]] < 2) continue;
            const double d = sq_dist(points.row(p), centres.row(labels[p]));
            if (d > far_d) {
                far_d = d;
                far = p;
            }
        }
        if (far == points.rows()) break;
        --count[labels[far]];
        labels[far] = static_cast<std::uint32_t>(c);
        ++count[c];
    }
}

}  // namespace

ClusterAssignment kmeans(const Matrix& points, std::size_t k, std::size_t max_iter, std::uint64_t seed) {
    const std::size_t n = points.rows();
    if (k == 0) throw ConfigError("kmeans: k must be at least 1");
    if (k > n) {
        throw DataError("kmeans: k=" + std::to_string(k) + " exceeds the number of points (" +
                        std::to_string(n) + ")");
    }
    Rng rng(seed);
    ClusterAssignment out;
    out.k = k;
    out.centroids = plus_plus_init(points, k, rng);
    out.labels.assign(n, 0);

    for (std::size_t it = 0; it < std::max<std::size_t>(max_iter, 1); ++it) {
        bool changed = false;
        for (std::size_t p = 0; p < n; ++p) {
            const auto x = points.row(p);
            std::uint32_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double d = sq_dist(x, out.centroids.row(c));
                if (d < best_d) {
                    best_d = d;
                    best = static_cast<std::uint32_t>(c);
                }
            }
            if (it == 0 || best != out.labels[p]) changed = true;
            out.labels[p] = best;
        }
        if (!changed) break;
        repair_empty(points, out.labels, out.centroids);
        update_centroids(points, out.labels, out.centroids);
        out.inertia_trace.push_back(inertia(points, out.labels, out.centroids));
        out.iterations = it + 1;
    }
    return out;
}

double silhouette_score(const Matrix& points, std::span<const std::uint32_t> labels, std::size_t k) {
    const std::size_t n = points.rows();
    if (n == 0 || k < 2) return 0.0;
    std::vector<std::size_t> count(k, 0);
    for (auto l : labels) ++count[l];

    std::vector<double> per_cluster(k);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(per_cluster.begin(), per_cluster.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            per_cluster[labels[j]] += std::sqrt(sq_dist(points.row(i), points.row(j)));
        }
        const std::size_t own = labels[i];
        if (count[own] < 2) continue;
        const double a = per_cluster[own] / static_cast<double>(count[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            if (c == own || count[c] == 0) continue;
            b = std::min(b, per_cluster[c] / static_cast<double>(count[c]));
        }
        if (!std::isfinite(b)) continue;
        const double denom = std::max(a, b);
        if (denom > 0.0) total += (b - a) / denom;
    }
    return total / static_cast<double>(n);
}

std::size_t select_k(const Matrix& points, std::size_t k_min, std::size_t k_max, std::uint64_t seed,
                     std::size_t max_iter) {
    if (k_min < 2 || k_max > 5 || k_min > k_max) {
        throw ConfigError("select_k: cluster range must lie within [2, 5]");
    }
    if (points.rows() < k_max) {
        throw DataError("select_k: need at least " + std::to_string(k_max) + " points, got " +
                        std::to_string(points.rows()));
    }
    // Silhouette is quadratic; large inputs are scored on a fixed-seed subsample.
    constexpr std::size_t kMaxScored = 3000;
    std::vector<std::size_t> subset;
    if (points.rows() > kMaxScored) {
        subset.resize(points.rows());
        std::iota(subset.begin(), subset.end(), std::size_t{0});
        Rng rng(derive_seed(seed, 99));
        std::shuffle(subset.begin(), subset.end(), rng);
        subset.resize(kMaxScored);
        std::sort(subset.begin(), subset.end());
    }
    std::size_t best_k = k_min;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = k_min; k <= k_max; ++k) {
        const ClusterAssignment a = kmeans(points, k, max_iter, seed);
        double s = 0.0;
        if (subset.empty()) {
            s = silhouette_score(points, a.labels, k);
        } else {
            std::vector<std::uint32_t> sub_labels;
            sub_labels.reserve(subset.size());
            for (std::size_t p : subset) sub_labels.push_back(a.labels[p]);
            s = silhouette_score(gather_rows(points, subset), sub_labels, k);
        }
        if (s > best) {
            best = s;
            best_k = k;
        }
    }
    return best_k;
}

std::vector<std::size_t> apportion(std::span<const std::size_t> sizes, std::size_t n) {
    const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
    std::vector<std::size_t> m(sizes.size(), 0);
    if (total == 0) return m;
    std::size_t assigned = 0;
    for (std::size_t j = 0; j < sizes.size(); ++j) {
        // sizes[j] * n may exceed 64 bits only for absurd inputs.
        m[j] = static_cast<std::size_t>((static_cast<unsigned __int128>(sizes[j]) * n) / total);
        assigned += m[j];
    }
    std::vector<std::size_t> order(sizes.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sizes[a] > sizes[b]; });
    for (std::size_t r = 0; assigned < n && r < order.size(); ++r, ++assigned) ++m[order[r]];
    return m;
}

std::size_t ClusterQuota::total() const {
    return std::accumulate(per_cluster.begin(), per_cluster.end(), std::size_t{0});
}

ClusterQuota cluster_quota(const ClusterAssignment& assignment, std::size_t n) {
    const std::size_t k = assignment.k;
    std::vector<std::size_t> first(k, 0), second(k, 0);
    for (std::size_t p = 0; p < assignment.labels.size(); ++p) {
        (p < assignment.n_first ? first : second)[assignment.labels[p]]++;
    }
    const std::vector<std::size_t> sizes = assignment.sizes();

    ClusterQuota q;
    q.requested = n;
    q.per_cluster = apportion(sizes, n);
    q.capacity.resize(k);
    std::size_t excess = 0;
    for (std::size_t j = 0; j < k; ++j) {
        q.capacity[j] = std::min(first[j], second[j]);
        if (q.per_cluster[j] > q.capacity[j]) {
            excess += q.per_cluster[j] - q.capacity[j];
            q.per_cluster[j] = q.capacity[j];
        }
    }
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sizes[a] > sizes[b]; });
    while (excess > 0) {
        bool placed = false;
        for (std::size_t j : order) {
            if (excess == 0) break;
            if (q.per_cluster[j] < q.capacity[j]) {
                ++q.per_cluster[j];
                --excess;
                placed = true;
            }
        }
        if (!placed) break;
    }
    return q;
}

SeedSet stage1_sample(const SimMatrix& sim, const ClusterAssignment& assignment,
                      const ClusterQuota& quota, const SeedSet& existing) {
    if (assignment.n_first != sim.rows() || assignment.labels.size() != sim.rows() + sim.cols()) {
        throw DataError("stage1_sample: cluster assignment does not match the similarity matrix shape");
    }
    std::vector<std::vector<std::size_t>> rows(assignment.k), cols(assignment.k);
    for (std::size_t p = 0; p < assignment.labels.size(); ++p) {
        if (p < assignment.n_first) {
            rows[assignment.labels[p]].push_back(p);
        } else {
            cols[assignment.labels[p]].push_back(p - assignment.n_first);
        }
    }
    SeedSet out = existing;
    for (std::size_t j = 0; j < assignment.k; ++j) {
        const std::size_t m = j < quota.per_cluster.size() ? quota.per_cluster[j] : 0;
        for (const auto& p : greedy_one_to_one(sim, rows[j], cols[j], m, out, Stage::s1)) {
            out.try_add(p);
        }
    }
    return out;
}

Matrix stack_rows(const Matrix& top, const Matrix& bottom) {
    if (top.cols() != bottom.cols()) throw DataError("stack_rows: column mismatch");
    Matrix out(top.rows() + bottom.rows(), top.cols());
    auto dst = out.data();
    std::copy(top.data().begin(), top.data().end(), dst.begin());
    std::copy(bottom.data().begin(), bottom.data().end(), dst.begin() + static_cast<std::ptrdiff_t>(top.data().size()));
    return out;
}

void write_assignment(const std::filesystem::path& path, const ClusterAssignment& a) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write " + path.string());
    for (std::size_t p = 0; p < a.labels.size(); ++p) os << p << ' ' << a.labels[p] << '\n';
}

}  // namespace psqe
