// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "psqe/cluster.hpp"
#include "psqe/enhancer.hpp"
#include "psqe/pipeline.hpp"
#include "psqe/seeds.hpp"
#include "psqe/similarity.hpp"
#include "psqe/theory.hpp"

using namespace psqe;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and limits.
constexpr double kBoundMargin = -1e-9;
constexpr double kTightness = 1e-9;
constexpr double kGradRelErr = 1e-4;
constexpr double kRepulsionTol = 1e-12;
constexpr std::size_t kRuns = 10;
constexpr std::size_t kMajority = 8;

struct Outcome {
    bool pass = true;
    std::string detail;
};

int failures = 0;

void report(const char* name, const Outcome& o, double seconds, double limit = 0.0) {
    bool pass = o.pass;
    std::string detail = o.detail;
    if (limit > 0.0 && seconds >= limit) {
        pass = false;
        detail += "; over the time limit of " + std::to_string(static_cast<int>(limit)) + " s";
    }
    failures += !pass;
    std::printf("%s %-22s %s (%.1f s)\n", pass ? "PASS" : "FAIL", name, detail.c_str(), seconds);
    std::fflush(stdout);
}

template <typename F>
void timed(const char* name, double limit, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = f();
    } catch (const std::exception& e) {
        o = {false, std::string("threw: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(name, o, s, limit);
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

PipelineConfig preset(const std::string& name) {
    return load_pipeline_config(fs::path(PSQE_PRESET_DIR) / (name + ".json"));
}

PipelineConfig with_run(PipelineConfig cfg, std::size_t r) {
    cfg.rng_seed += r;
    if (cfg.input.synth) cfg.input.synth->rng_seed += r;
    cfg.output_dir.reset();
    return cfg;
}

// Every seed set produced by the runs below, for the one-to-one audit.
std::vector<std::pair<std::string, SeedSet>> produced;

void collect(const std::string& tag, const RunRecord& r) {
    produced.emplace_back(tag + "/s0", r.s0);
    produced.emplace_back(tag + "/s1", r.s1);
    produced.emplace_back(tag + "/s2", r.s2);
    produced.emplace_back(tag + "/s3", r.s3);
}

std::vector<double> random_vector(std::size_t d, double scale, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    std::vector<double> v(d);
    for (double& x : v) x = g(rng);
    const double n = norm(v);
    for (double& x : v) x *= scale / n;
    return v;
}

Outcome icl_bound() {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::size_t> size(2, 64), dim(4, 64);
    std::size_t violations = 0;
    double min_margin = INFINITY;
    for (std::size_t b = 0; b < 1000; ++b) {
        const std::size_t n = size(rng), d = dim(rng);
        const Matrix h1 = theory::random_unit_rows(n, d, rng());
        const Matrix h2 = theory::random_unit_rows(n, d, rng());
        const double m = theory::icl_lower_bound(h1, h2).margin;
        min_margin = std::min(min_margin, m);
        violations += !(m >= kBoundMargin);
    }
    // Equal negative dots: orthonormal bases (all zero), repeated rows (all one)
    // and regular simplices (all -1/(n-1)).
    double gap = 0.0;
    for (std::size_t n = 2; n <= 16; ++n) {
        Matrix eye(n, n);
        for (std::size_t i = 0; i < n; ++i) eye(i, i) = 1.0;
        Matrix same(n, 5);
        for (std::size_t i = 0; i < n; ++i) same(i, 0) = 1.0;
        Matrix simplex(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) simplex(i, j) = (i == j) - 1.0 / static_cast<double>(n);
        }
        simplex = normalized_rows(simplex);
        for (const Matrix* m : {&eye, &same, &simplex}) {
            gap = std::max(gap, std::abs(theory::icl_lower_bound(*m, *m).margin));
        }
    }
    return {violations == 0 && gap <= kTightness,
            "1000 batches, violations " + std::to_string(violations) + ", min margin " + fmt("%.3g", min_margin) +
                ", tightness gap " + fmt("%.3g", gap)};
}

Outcome gradient_oracle() {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<std::size_t> dim(3, 16), count(1, 10);
    std::uniform_real_distribution<double> scale(0.5, 2.0);
    double worst = 0.0;
    std::size_t instances = 0;
    for (std::size_t t = 0; t < 100; ++t) {
        const std::size_t d = dim(rng);
        const std::vector<double> pos = random_vector(d, 1.0, rng);
        const Matrix neg = theory::random_unit_rows(count(rng), d, rng());
        for (bool normalized : {false, true}) {
            const std::vector<double> anchor = random_vector(d, normalized ? scale(rng) : 1.0, rng);
            const auto analytic = theory::analytic_icl_gradient(anchor, pos, neg, normalized);
            const auto numeric = theory::finite_difference(
                [&](std::span<const double> x) { return theory::anchor_loss(x, pos, neg, normalized); }, anchor);
            worst = std::max(worst, theory::relative_error(analytic, numeric));
            ++instances;
        }
    }
    // Full enhancer gradient on two-entity graphs.
    double worst_enh = 0.0;
    std::size_t tensors = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto kg = [&](std::uint64_t s) {
            MultiModalKG g;
            g.n_entities = 2;
            g.adjacency = make_adjacency(2, {{0, 1}});
            g.visual = theory::random_unit_rows(2, 3, s);
            g.attribute = theory::random_unit_rows(2, 2, s + 1);
            g.relation = theory::random_unit_rows(2, 2, s + 2);
            return g;
        };
        const MultiModalKG kg1 = kg(100 + 3 * seed), kg2 = kg(500 + 3 * seed);
        EnhancerParams p = init_params(3, 2, 2, 3, seed);
        for (double& a : p.attention) a *= 3.0;
        const std::vector<SeedPair> batch = {{EntityId(0), EntityId(1), 0, Stage::s1},
                                             {EntityId(1), EntityId(0), 0, Stage::s1}};
        for (const ModalityMask mask : {ModalityMask::all(), ModalityMask::without(Modality::relation)}) {
            const LossGrad lg = loss_and_grad(kg1, kg2, p, batch, 0.5, mask);
            EnhancerParams probe = p, grad = lg.grad;
            std::vector<std::span<double>> params, grads;
            for_each_tensor(probe, [&](std::span<double> t) { params.push_back(t); });
            for_each_tensor(grad, [&](std::span<double> t) { grads.push_back(t); });
            for (std::size_t t = 0; t < params.size(); ++t) {
                const std::vector<double> x(params[t].begin(), params[t].end());
                const auto numeric = theory::finite_difference(
                    [&](std::span<const double> v) {
                        std::copy(v.begin(), v.end(), params[t].begin());
                        const double l = loss_and_grad(kg1, kg2, probe, batch, 0.5, mask).loss;
                        std::copy(x.begin(), x.end(), params[t].begin());
                        return l;
                    },
                    x);
                worst_enh = std::max(worst_enh, theory::relative_error(grads[t], numeric));
                ++tensors;
            }
        }
    }
    return {worst <= kGradRelErr && worst_enh <= kGradRelErr,
            std::to_string(instances) + " anchor instances, max rel err " + fmt("%.3g", worst) + "; " +
                std::to_string(tensors) + " enhancer tensors, max rel err " + fmt("%.3g", worst_enh)};
}

Outcome repulsion_identity() {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<std::size_t> dim(4, 32), count(1, 20);
    double worst = 0.0;
    for (std::size_t t = 0; t < 100; ++t) {
        const std::size_t d = dim(rng), c = std::min(count(rng), d - 1);
        const std::vector<double> h = random_vector(d, 1.0, rng);
        const std::vector<double> pos = random_vector(d, 1.0, rng);
        Matrix neg(c, d);
        for (std::size_t j = 0; j < c; ++j) {
            std::vector<double> v = random_vector(d, 1.0, rng);
            const double proj = dot(v, h);
            for (std::size_t k = 0; k < d; ++k) v[k] -= proj * h[k];
            normalize(v);
            std::copy(v.begin(), v.end(), neg.row(j).begin());
        }
        const double got = theory::gradient_diagnostics(h, pos, neg).repulsion_magnitude;
        const double want = static_cast<double>(c) / (std::exp(dot(h, pos)) + static_cast<double>(c));
        worst = std::max(worst, std::abs(got - want));
    }
    return {worst <= kRepulsionTol, "100 trials, max abs err " + fmt("%.3g", worst)};
}

Outcome mic_postcondition() {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<std::size_t> size(1, 40), dim(2, 12);
    std::size_t bad = 0, removed = 0, confusables = 0;
    for (std::size_t t = 0; t < 1000; ++t) {
        const std::size_t k = size(rng), d = dim(rng), n = k + 5;
        const Matrix f1 = theory::random_unit_rows(n, d, rng());
        Matrix f2 = theory::random_unit_rows(n, d, rng());
        std::vector<std::size_t> p1(n), p2(n);
        std::iota(p1.begin(), p1.end(), 0);
        std::iota(p2.begin(), p2.end(), 0);
        std::shuffle(p1.begin(), p1.end(), rng);
        std::shuffle(p2.begin(), p2.end(), rng);
        SeedSet seeds;
        for (std::size_t i = 0; i < k; ++i) seeds.try_add({EntityId(p1[i]), EntityId(p2[i]), 0, Stage::s2});
        // Most pairs get a near-copy partner; some rows are made confusable with another seed's partner,
        // and some get an exact tie.
        for (std::size_t i = 0; i < k; ++i) {
            const auto src = f1.row(p1[i]);
            const std::uint64_t kind = rng() % 4;
            std::size_t target = p2[i];
            if (kind == 0 && k > 1) {
                target = p2[(i + 1) % k];
                ++confusables;
            }
            std::vector<double> v(src.begin(), src.end());
            if (kind != 3) {
                const auto jitter = random_vector(d, 0.05, rng);
                for (std::size_t c = 0; c < d; ++c) v[c] += jitter[c];
                normalize(v);
            }
            std::copy(v.begin(), v.end(), f2.row(target).begin());
            if (kind == 3 && k > 1) std::copy(v.begin(), v.end(), f2.row(p2[(i + 1) % k]).begin());
        }
        const SeedSet kept = mic_correct(seeds, f1, f2);
        removed += seeds.size() - kept.size();
        std::set<std::pair<std::uint32_t, std::uint32_t>> survivors;
        for (const auto& p : kept) survivors.insert({p.e1.value, p.e2.value});
        // Recompute M over the survivors, and check the removed rows really failed over the input set.
        for (const auto& a : kept) {
            for (const auto& b : kept) {
                if (a == b) continue;
                if (!(dot(f1.row(a.e1.value), f2.row(b.e2.value)) < dot(f1.row(a.e1.value), f2.row(a.e2.value)))) ++bad;
            }
        }
        for (const auto& a : seeds) {
            const double diag = dot(f1.row(a.e1.value), f2.row(a.e2.value));
            bool strict = true;
            for (const auto& b : seeds) {
                if (!(a == b) && dot(f1.row(a.e1.value), f2.row(b.e2.value)) >= diag) strict = false;
            }
            if (strict != survivors.contains({a.e1.value, a.e2.value})) ++bad;
        }
    }
    return {bad == 0 && removed > 0, "1000 sets, " + std::to_string(confusables) + " confusables, " +
                                         std::to_string(removed) + " removed, " + std::to_string(bad) +
                                         " post-condition breaks"};
}

std::vector<std::size_t> apportion_oracle(const std::vector<std::size_t>& sizes, std::size_t n) {
    const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
    std::vector<std::size_t> m(sizes.size());
    std::size_t used = 0;
    for (std::size_t j = 0; j < sizes.size(); ++j) {
        m[j] = sizes[j] * n / total;
        used += m[j];
    }
    std::vector<std::size_t> order(sizes.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sizes[a] > sizes[b]; });
    for (std::size_t r = 0; used < n; ++r, ++used) ++m[order[r % order.size()]];
    return m;
}

Outcome quota_apportionment() {
    std::mt19937_64 rng(6);
    std::size_t mismatches = 0, sum_breaks = 0, quota_checks = 0;
    for (std::size_t t = 0; t < 200; ++t) {
        const std::size_t k = 1 + rng() % 8;
        std::vector<std::size_t> sizes(k);
        // Even sizes split evenly across the graphs; repeats exercise the tie rule.
        for (auto& s : sizes) s = 2 * (1 + rng() % (t % 3 == 0 ? 3 : 200));
        const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
        const std::size_t n = rng() % (total + 1);
        const auto got = apportion(sizes, n);
        const auto want = apportion_oracle(sizes, n);
        mismatches += got != want;
        sum_breaks += std::accumulate(got.begin(), got.end(), std::size_t{0}) != n;

        ClusterAssignment a;
        a.k = k;
        a.n_first = total / 2;
        a.labels.resize(total);
        std::size_t i1 = 0, i2 = total / 2;
        for (std::size_t j = 0; j < k; ++j) {
            for (std::size_t c = 0; c < sizes[j] / 2; ++c) {
                a.labels[i1++] = static_cast<std::uint32_t>(j);
                a.labels[i2++] = static_cast<std::uint32_t>(j);
            }
        }
        const ClusterQuota q = cluster_quota(a, n);
        bool feasible = true;
        for (std::size_t j = 0; j < k; ++j) feasible = feasible && want[j] <= sizes[j] / 2;
        if (feasible) {
            ++quota_checks;
            mismatches += q.per_cluster != want;
            sum_breaks += q.total() != n;
        }
    }
    return {mismatches == 0 && sum_breaks == 0, "200 vectors (" + std::to_string(quota_checks) +
                                                     " also through cluster quotas), " + std::to_string(mismatches) +
                                                     " mismatches, " + std::to_string(sum_breaks) + " sum breaks"};
}

Outcome zero_noise() {
    const PipelineConfig cfg = with_run(preset("zero_noise"), 0);
    const RunRecord r = run_pipeline(cfg);
    collect("zero_noise", r);
    const bool pass = r.q3.precision == 1.0 && r.s3.size() >= r.s1.size() && r.ranking.hits1 == 1.0;
    return {pass, "precision " + fmt("%.6f", r.q3.precision) + ", |S1| " + std::to_string(r.s1.size()) + ", |S3| " +
                      std::to_string(r.s3.size()) + ", Hits@1 " + fmt("%.6f", r.ranking.hits1)};
}

Outcome type_ordering() {
    std::size_t prec = 0, hits = 0, cov = 0;
    for (std::size_t r = 0; r < kRuns; ++r) {
        const auto rows = type_comparison(with_run(preset("imbalanced"), r));
        const TypeRow& t1 = rows.at(0);
        const TypeRow& t2 = rows.at(1);
        const TypeRow& t3 = rows.at(2);
        prec += t2.quality.precision > t1.quality.precision;
        hits += t3.ranking.hits1 >= t2.ranking.hits1;
        cov += t3.quality.coverage > t2.quality.coverage;
    }
    return {prec >= kMajority && hits >= kMajority && cov == kRuns,
            "precision II>I " + std::to_string(prec) + "/10, Hits@1 III>=II " + std::to_string(hits) +
                "/10, coverage III>II " + std::to_string(cov) + "/10"};
}

Outcome ablation_direction() {
    std::size_t visual_worst = 0, visual_below_full = 0, mic = 0;
    for (std::size_t r = 0; r < kRuns; ++r) {
        const PipelineConfig base = with_run(preset("imbalanced"), r);
        const Dataset data = load_dataset(base.input);
        auto run = [&](const std::string& tag, const std::function<void(PipelineConfig&)>& edit) {
            PipelineConfig cfg = base;
            edit(cfg);
            RunRecord rec = run_pipeline(cfg, data);
            collect("imbalanced/" + std::to_string(r) + "/" + tag, rec);
            return rec;
        };
        const RunRecord full = run("full", [](PipelineConfig&) {});
        const RunRecord no_v = run("drop_visual", [](PipelineConfig& c) { c.ablation.drop_modality = Modality::visual; });
        const RunRecord no_a = run("drop_attr", [](PipelineConfig& c) { c.ablation.drop_modality = Modality::attribute; });
        const RunRecord no_r = run("drop_rel", [](PipelineConfig& c) { c.ablation.drop_modality = Modality::relation; });
        const RunRecord no_m = run("skip_mic", [](PipelineConfig& c) { c.ablation.skip_mic = true; });
        visual_worst += no_v.ranking.hits1 < no_a.ranking.hits1 && no_v.ranking.hits1 < no_r.ranking.hits1;
        visual_below_full += no_v.ranking.hits1 < full.ranking.hits1;
        mic += no_m.q3.precision < full.q3.precision;
    }
    return {visual_worst >= kMajority && visual_below_full >= kMajority && mic >= kMajority,
            "drop visual below attr and rel " + std::to_string(visual_worst) + "/10, below full " +
                std::to_string(visual_below_full) + "/10, skip MIC lowers precision " + std::to_string(mic) + "/10"};
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / "psqe_acceptance_det";
    fs::remove_all(root);
    PipelineConfig cfg = preset("imbalanced");
    cfg.rng_seed = 42;
    cfg.output_dir.reset();
    const RunRecord a = run_pipeline(cfg);
    const RunRecord b = run_pipeline(cfg);
    collect("determinism/a", a);
    collect("determinism/b", b);
    write_outputs(root / "a", a);
    write_outputs(root / "b", b);
    std::size_t differ = 0;
    for (const char* f : {"seeds_s0.txt", "seeds_s1.txt", "seeds_s2.txt", "seeds_s3.txt", "loss.csv", "expansion.csv"}) {
        differ += slurp(root / "a" / f) != slurp(root / "b" / f);
    }
    differ += to_json(a, false).dump() != to_json(b, false).dump();
    fs::remove_all(root);
    return {differ == 0, std::to_string(differ) + " of 7 artifacts differ"};
}

Outcome one_to_one() {
    // Visual-only UVP seeds on each preset join the pipeline outputs.
    for (const char* name : {"zero_noise", "imbalanced"}) {
        const PipelineConfig cfg = preset(name);
        const Dataset d = load_dataset(cfg.input);
        produced.emplace_back(std::string(name) + "/uvp_visual",
                              uvp_seeds(cosine_sim_matrix(d.kg1.visual, d.kg2.visual), cfg.n_init_seeds));
    }
    std::size_t bad = 0;
    std::string first_bad;
    for (const auto& [tag, s] : produced) {
        std::set<std::uint32_t> left, right;
        for (const auto& p : s) {
            left.insert(p.e1.value);
            right.insert(p.e2.value);
        }
        if (left.size() != s.size() || right.size() != s.size() || !s.is_one_to_one()) {
            if (bad++ == 0) first_bad = tag;
        }
    }
    return {bad == 0 && !produced.empty(), std::to_string(produced.size()) + " seed sets, " + std::to_string(bad) +
                                               " with a repeated entity" +
                                               (first_bad.empty() ? "" : " (first: " + first_bad + ")")};
}

}  // namespace

int main() {
    timed("icl_lower_bound", 10, icl_bound);
    timed("gradient_oracle", 30, gradient_oracle);
    timed("repulsion_identity", 0, repulsion_identity);
    timed("mic_postcondition", 0, mic_postcondition);
    timed("quota_apportionment", 0, quota_apportionment);
    timed("zero_noise_pipeline", 120, zero_noise);
    timed("type_ordering", 600, type_ordering);
    timed("ablation_direction", 0, ablation_direction);
    timed("determinism", 0, determinism);
    timed("one_to_one", 0, one_to_one);
    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
