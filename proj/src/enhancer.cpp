#include "psqe/enhancer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "psqe/contrastive.hpp"
#include "psqe/errors.hpp"
#include "psqe/rng.hpp"

namespace psqe {

namespace fs = std::filesystem;
using nlohmann::json;

const Matrix& EnhancerParams::weight(Modality m) const {
    switch (m) {
        case Modality::visual: return w_visual;
        case Modality::attribute: return w_attribute;
        case Modality::relation: return w_relation;
    }
    return w_visual;
}

Matrix& EnhancerParams::weight(Modality m) {
    return const_cast<Matrix&>(std::as_const(*this).weight(m));
}

const Matrix& EnhancedFeatures::block(Modality m) const {
    switch (m) {
        case Modality::visual: return visual;
        case Modality::attribute: return attribute;
        case Modality::relation: return relation;
    }
    return visual;
}

EnhancerParams init_params(std::size_t dim_visual, std::size_t dim_attribute,
                           std::size_t dim_relation, std::size_t hidden_dim, std::uint64_t seed) {
    Rng rng(seed);
    auto glorot = [&](std::span<double> values, std::size_t fan_in, std::size_t fan_out) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> u(-limit, limit);
        for (double& v : values) v = u(rng);
    };
    EnhancerParams p;
    p.w_visual = Matrix(hidden_dim, dim_visual);
    p.w_attribute = Matrix(hidden_dim, dim_attribute);
    p.w_relation = Matrix(hidden_dim, dim_relation);
    p.attention.assign(2 * hidden_dim, 0.0);
    glorot(p.w_visual.data(), dim_visual, hidden_dim);
    glorot(p.w_attribute.data(), dim_attribute, hidden_dim);
    glorot(p.w_relation.data(), dim_relation, hidden_dim);
    glorot(p.attention, 2 * hidden_dim, 1);
    return p;
}

EnhancerParams zeros_like(const EnhancerParams& p) {
    EnhancerParams z;
    z.w_visual = Matrix(p.w_visual.rows(), p.w_visual.cols(), 0.0);
    z.w_attribute = Matrix(p.w_attribute.rows(), p.w_attribute.cols(), 0.0);
    z.w_relation = Matrix(p.w_relation.rows(), p.w_relation.cols(), 0.0);
    z.attention.assign(p.attention.size(), 0.0);
    return z;
}

void save_params(const fs::path& dir, const EnhancerParams& p) {
    fs::create_directories(dir);
    write_matrix(dir / "w_visual.bin", p.w_visual);
    write_matrix(dir / "w_attribute.bin", p.w_attribute);
    write_matrix(dir / "w_relation.bin", p.w_relation);
    write_matrix(dir / "attention.bin", Matrix(1, p.attention.size(), p.attention));
    const json manifest = {{"hidden_dim", p.hidden_dim()},
                           {"w_visual", "w_visual.bin"},
                           {"w_attribute", "w_attribute.bin"},
                           {"w_relation", "w_relation.bin"},
                           {"attention", "attention.bin"}};
    std::ofstream os(dir / "params.json");
    if (!os) throw DataError("cannot write " + (dir / "params.json").string());
    os << manifest.dump(2) << '\n';
}

EnhancerParams load_params(const fs::path& dir) {
    std::ifstream in(dir / "params.json");
    if (!in) throw DataError("cannot open " + (dir / "params.json").string());
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw DataError((dir / "params.json").string() + ": " + e.what());
    }
    auto file = [&](const char* key) { return dir / manifest.at(key).get<std::string>(); };
    EnhancerParams p;
    p.w_visual = read_matrix(file("w_visual"));
    p.w_attribute = read_matrix(file("w_attribute"));
    p.w_relation = read_matrix(file("w_relation"));
    const Matrix a = read_matrix(file("attention"));
    p.attention.assign(a.data().begin(), a.data().end());
    const std::size_t h = p.w_visual.rows();
    if (p.w_attribute.rows() != h || p.w_relation.rows() != h || p.attention.size() != 2 * h) {
        throw DataError(dir.string() + ": enhancer tensors disagree on the hidden dimension");
    }
    return p;
}

void validate(const TrainConfig& cfg) {
    if (cfg.batch_size == 0) throw ConfigError("train: batch_size must be positive");
    if (cfg.hidden_dim == 0) throw ConfigError("train: hidden_dim must be positive");
    if (!(cfg.lr > 0.0)) throw ConfigError("train: lr must be positive");
    if (!(cfg.tau > 0.0)) throw ConfigError("train: tau must be positive");
}

json to_json(const TrainConfig& c) {
    return {{"epochs", c.epochs},         {"lr", c.lr},   {"batch_size", c.batch_size},
            {"hidden_dim", c.hidden_dim}, {"tau", c.tau}, {"rng_seed", c.rng_seed},
            {"optimizer", c.optimizer == Optimizer::sgd ? "sgd" : "adam"}};
}

TrainConfig train_config_from_json(const json& j) {
    static const std::set<std::string> known = {"epochs", "lr",  "batch_size", "hidden_dim",
                                                "tau",    "rng_seed", "optimizer"};
    if (!j.is_object()) throw ConfigError("train config must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) throw ConfigError("train: unknown key \"" + key + "\"");
    }
    TrainConfig c;
    try {
        c.epochs = j.value("epochs", c.epochs);
        c.lr = j.value("lr", c.lr);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
        c.tau = j.value("tau", c.tau);
        c.rng_seed = j.value("rng_seed", c.rng_seed);
        const std::string opt = j.value("optimizer", std::string("sgd"));
        if (opt == "sgd") {
            c.optimizer = Optimizer::sgd;
        } else if (opt == "adam") {
            c.optimizer = Optimizer::adam;
        } else {
            throw ConfigError("train: optimizer must be \"sgd\" or \"adam\"");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("train: ") + e.what());
    }
    validate(c);
    return c;
}

namespace {

double leaky(double x) { return x > 0.0 ? x : kLeakySlope * x; }
double leaky_slope(double x) { return x > 0.0 ? 1.0 : kLeakySlope; }

/// Linear map followed by row normalization, for a list of entities.
struct LinearBranch {
    Matrix z;  // rows follow `entities`
    std::vector<double> z_norm;
    Matrix h;
};

LinearBranch linear_forward(const Matrix& x, const Matrix& w, std::span<const std::size_t> entities) {
    LinearBranch out;
    out.z = multiply_transposed(gather_rows(x, entities), w);
    out.h = out.z;
    out.z_norm.resize(entities.size());
    for (std::size_t k = 0; k < entities.size(); ++k) out.z_norm[k] = normalize(out.h.row(k));
    return out;
}

// dL/dz = (I - h h^T) dL/dh / ||z||
void normalize_backward(std::span<const double> h, std::span<const double> dh, double z_norm,
                        std::span<double> dz) {
    const double proj = dot(h, dh);
    const double inv = z_norm > 0.0 ? 1.0 / z_norm : 0.0;
    for (std::size_t d = 0; d < dz.size(); ++d) dz[d] = (dh[d] - proj * h[d]) * inv;
}

/// Single-head GAT over N(i) ∪ {i}: logits LeakyReLU(a_self·z_i + a_nb·z_j),
/// softmax-weighted sum of z_j, then row normalization.
struct GatBranch {
    Matrix z;  // all entities
    std::vector<double> self_score, nb_score;
    std::vector<std::vector<double>> alpha;  // per listed entity, over [i, N(i)...]
    Matrix u;                                // rows follow `entities`
    std::vector<double> u_norm;
    Matrix h;
};

GatBranch gat_forward(const MultiModalKG& kg, const Matrix& w, std::span<const double> attention,
                      std::span<const std::size_t> entities) {
    const std::size_t hd = w.rows();
    const auto a_self = attention.subspan(0, hd);
    const auto a_nb = attention.subspan(hd, hd);
    GatBranch g;
    g.z = multiply_transposed(kg.visual, w);
    g.self_score.resize(kg.n_entities);
    g.nb_score.resize(kg.n_entities);
    for (std::size_t e = 0; e < kg.n_entities; ++e) {
        g.self_score[e] = dot(a_self, g.z.row(e));
        g.nb_score[e] = dot(a_nb, g.z.row(e));
    }
    g.alpha.resize(entities.size());
    g.u = Matrix(entities.size(), hd, 0.0);
    g.u_norm.resize(entities.size());
    std::vector<std::size_t> support;
    for (std::size_t k = 0; k < entities.size(); ++k) {
        const std::size_t i = entities[k];
        support.assign(1, i);
        support.insert(support.end(), kg.adjacency[i].begin(), kg.adjacency[i].end());
        auto& al = g.alpha[k];
        al.resize(support.size());
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < support.size(); ++s) {
            al[s] = leaky(g.self_score[i] + g.nb_score[support[s]]);
            m = std::max(m, al[s]);
        }
        double z = 0.0;
        for (double& v : al) {
            v = std::exp(v - m);
            z += v;
        }
        auto u = g.u.row(k);
        for (std::size_t s = 0; s < support.size(); ++s) {
            al[s] /= z;
            const auto zj = g.z.row(support[s]);
            for (std::size_t d = 0; d < hd; ++d) u[d] += al[s] * zj[d];
        }
    }
    g.h = g.u;
    for (std::size_t k = 0; k < entities.size(); ++k) g.u_norm[k] = normalize(g.h.row(k));
    return g;
}

// Accumulates dL/dW_visual and dL/dattention given dL/dH for the listed entities.
void gat_backward(const MultiModalKG& kg, const GatBranch& g, std::span<const double> attention,
                  std::span<const std::size_t> entities, const Matrix& dh, Matrix& dw,
                  std::span<double> dattention) {
    const std::size_t hd = g.z.cols();
    const auto a_self = attention.subspan(0, hd);
    const auto a_nb = attention.subspan(hd, hd);
    auto da_self = dattention.subspan(0, hd);
    auto da_nb = dattention.subspan(hd, hd);

    Matrix dz(kg.n_entities, hd, 0.0);
    std::vector<bool> touched(kg.n_entities, false);
    std::vector<double> du(hd), dalpha;
    std::vector<std::size_t> support;
    for (std::size_t k = 0; k < entities.size(); ++k) {
        const std::size_t i = entities[k];
        normalize_backward(g.h.row(k), dh.row(k), g.u_norm[k], du);
        support.assign(1, i);
        support.insert(support.end(), kg.adjacency[i].begin(), kg.adjacency[i].end());
        const auto& al = g.alpha[k];
        dalpha.resize(support.size());
        double weighted = 0.0;
        for (std::size_t s = 0; s < support.size(); ++s) {
            dalpha[s] = dot(du, g.z.row(support[s]));
            weighted += al[s] * dalpha[s];
        }
        const auto zi = g.z.row(i);
        auto dzi = dz.row(i);
        touched[i] = true;
        for (std::size_t s = 0; s < support.size(); ++s) {
            const std::size_t j = support[s];
            touched[j] = true;
            const auto zj = g.z.row(j);
            auto dzj = dz.row(j);
            const double logit = g.self_score[i] + g.nb_score[j];
            const double dx = al[s] * (dalpha[s] - weighted) * leaky_slope(logit);
            for (std::size_t d = 0; d < hd; ++d) {
                dzj[d] += al[s] * du[d] + dx * a_nb[d];
                dzi[d] += dx * a_self[d];
                da_self[d] += dx * zi[d];
                da_nb[d] += dx * zj[d];
            }
        }
    }
    for (std::size_t e = 0; e < kg.n_entities; ++e) {
        if (!touched[e]) continue;
        const auto dze = dz.row(e);
        const auto xe = kg.visual.row(e);
        for (std::size_t h = 0; h < hd; ++h) {
            if (dze[h] == 0.0) continue;
            auto dwh = dw.row(h);
            for (std::size_t d = 0; d < xe.size(); ++d) dwh[d] += dze[h] * xe[d];
        }
    }
}

void linear_backward(const Matrix& x, const LinearBranch& b, std::span<const std::size_t> entities,
                     const Matrix& dh, Matrix& dw) {
    std::vector<double> dz(b.z.cols());
    for (std::size_t k = 0; k < entities.size(); ++k) {
        normalize_backward(b.h.row(k), dh.row(k), b.z_norm[k], dz);
        const auto xe = x.row(entities[k]);
        for (std::size_t h = 0; h < dz.size(); ++h) {
            auto dwh = dw.row(h);
            for (std::size_t d = 0; d < xe.size(); ++d) dwh[d] += dz[h] * xe[d];
        }
    }
}

void check_shapes(const MultiModalKG& kg, const EnhancerParams& p) {
    for (Modality m : kModalities) {
        if (kg.features(m).cols() != p.weight(m).cols()) {
            throw DataError(std::string("enhancer ") + to_string(m) + " map expects " +
                            std::to_string(p.weight(m).cols()) + " input features, graph has " +
                            std::to_string(kg.features(m).cols()));
        }
    }
    if (p.attention.size() != 2 * p.hidden_dim()) {
        throw DataError("attention vector length must be twice the hidden dimension");
    }
}

}  // namespace

EnhancedFeatures forward(const MultiModalKG& kg, const EnhancerParams& params, const ModalityMask& mask) {
    check_shapes(kg, params);
    if (mask.count() == 0) throw ConfigError("forward: at least one modality must be active");
    std::vector<std::size_t> all(kg.n_entities);
    std::iota(all.begin(), all.end(), std::size_t{0});

    EnhancedFeatures out;
    if (mask[Modality::visual]) out.visual = gat_forward(kg, params.w_visual, params.attention, all).h;
    if (mask[Modality::attribute]) out.attribute = linear_forward(kg.attribute, params.w_attribute, all).h;
    if (mask[Modality::relation]) out.relation = linear_forward(kg.relation, params.w_relation, all).h;

    std::vector<const Matrix*> blocks;
    for (Modality m : kModalities) {
        if (mask[m]) blocks.push_back(&out.block(m));
    }
    out.joint = normalized_rows(hconcat(blocks));
    return out;
}

LossGrad loss_and_grad(const MultiModalKG& kg1, const MultiModalKG& kg2, const EnhancerParams& params,
                       std::span<const SeedPair> batch, double tau, const ModalityMask& mask) {
    check_shapes(kg1, params);
    check_shapes(kg2, params);
    if (batch.empty()) throw DataError("loss_and_grad: empty batch");
    std::vector<std::size_t> ent1, ent2;
    for (const auto& p : batch) {
        ent1.push_back(p.e1.index());
        ent2.push_back(p.e2.index());
    }

    LossGrad out;
    out.grad = zeros_like(params);
    for (Modality m : kModalities) {
        if (!mask[m]) continue;
        if (m == Modality::visual) {
            const GatBranch g1 = gat_forward(kg1, params.w_visual, params.attention, ent1);
            const GatBranch g2 = gat_forward(kg2, params.w_visual, params.attention, ent2);
            const IclLossGrad icl = icl_loss_grad(g1.h, g2.h, tau);
            out.loss += icl.loss;
            gat_backward(kg1, g1, params.attention, ent1, icl.d_first, out.grad.w_visual, out.grad.attention);
            gat_backward(kg2, g2, params.attention, ent2, icl.d_second, out.grad.w_visual, out.grad.attention);
        } else {
            const Matrix& w = params.weight(m);
            const LinearBranch b1 = linear_forward(kg1.features(m), w, ent1);
            const LinearBranch b2 = linear_forward(kg2.features(m), w, ent2);
            const IclLossGrad icl = icl_loss_grad(b1.h, b2.h, tau);
            out.loss += icl.loss;
            linear_backward(kg1.features(m), b1, ent1, icl.d_first, out.grad.weight(m));
            linear_backward(kg2.features(m), b2, ent2, icl.d_second, out.grad.weight(m));
        }
    }
    return out;
}

TrainResult train(const MultiModalKG& kg1, const MultiModalKG& kg2, const SeedSet& seeds,
                  const TrainConfig& cfg, const ModalityMask& mask) {
    validate(cfg);
    if (seeds.empty()) throw DataError("train: no seed pairs to train on");
    TrainResult out;
    out.params = init_params(kg1.visual.cols(), kg1.attribute.cols(), kg1.relation.cols(),
                             cfg.hidden_dim, derive_seed(cfg.rng_seed, stream::init_params));
    Rng rng(derive_seed(cfg.rng_seed, stream::shuffle));

    // Adam state (unused for plain gradient descent).
    EnhancerParams first_moment = zeros_like(out.params);
    EnhancerParams second_moment = zeros_like(out.params);
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::size_t step = 0;

    std::vector<SeedPair> order(seeds.begin(), seeds.end());
    std::vector<SeedPair> batch;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            batch.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(stop));
            const LossGrad lg = loss_and_grad(kg1, kg2, out.params, batch, cfg.tau, mask);
            epoch_loss += lg.loss * static_cast<double>(batch.size());
            ++step;

            std::vector<std::span<double>> p, g, m1, m2;
            for_each_tensor(out.params, [&](std::span<double> t) { p.push_back(t); });
            for_each_tensor(lg.grad, [&](std::span<const double> t) {
                g.push_back({const_cast<double*>(t.data()), t.size()});
            });
            if (cfg.optimizer == Optimizer::sgd) {
                for (std::size_t t = 0; t < p.size(); ++t) {
                    for (std::size_t k = 0; k < p[t].size(); ++k) p[t][k] -= cfg.lr * g[t][k];
                }
            } else {
                for_each_tensor(first_moment, [&](std::span<double> t) { m1.push_back(t); });
                for_each_tensor(second_moment, [&](std::span<double> t) { m2.push_back(t); });
                const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
                const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
                for (std::size_t t = 0; t < p.size(); ++t) {
                    for (std::size_t k = 0; k < p[t].size(); ++k) {
                        m1[t][k] = beta1 * m1[t][k] + (1.0 - beta1) * g[t][k];
                        m2[t][k] = beta2 * m2[t][k] + (1.0 - beta2) * g[t][k] * g[t][k];
                        p[t][k] -= cfg.lr * (m1[t][k] / c1) / (std::sqrt(m2[t][k] / c2) + eps);
                    }
                }
            }
        }
        out.loss_trace.push_back(epoch_loss / static_cast<double>(order.size()));
    }
    return out;
}

void write_loss_trace(const fs::path& path, std::span<const double> trace) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write " + path.string());
    os << "epoch,loss\n";
    char buf[64];
    for (std::size_t e = 0; e < trace.size(); ++e) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", e, trace[e]);
        os << buf;
    }
}

SeedSet global_sample(const EnhancedFeatures& enh1, const EnhancedFeatures& enh2, std::size_t n,
                      const SeedSet& existing) {
    if (n == 0) return existing;
    const SimMatrix sim = multiply_transposed(enh1.joint, enh2.joint);
    std::vector<std::size_t> rows(sim.rows()), cols(sim.cols());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    std::iota(cols.begin(), cols.end(), std::size_t{0});
    SeedSet out = existing;
    for (const auto& p : greedy_one_to_one(sim, rows, cols, n, existing, Stage::s2)) out.try_add(p);
    return out;
}

MicResult mic_correct_detailed(const SeedSet& seeds, const Matrix& feat1, const Matrix& feat2) {
    MicResult out;
    if (seeds.empty()) return out;
    const Matrix h1 = gather_rows(feat1, seeds.first_indices());
    const Matrix h2 = gather_rows(feat2, seeds.second_indices());
    const Matrix m = multiply_transposed(h1, h2);
    for (std::size_t k = 0; k < seeds.size(); ++k) {
        const auto row = m.row(k);
        std::size_t rival = k;
        for (std::size_t l = 0; l < row.size(); ++l) {
            if (l != k && row[l] >= row[k] && (rival == k || row[l] > row[rival])) rival = l;
        }
        if (rival == k) {
            out.kept.try_add(seeds[k]);
        } else {
            out.removed.push_back({seeds[k], rival});
        }
    }
    return out;
}

SeedSet mic_correct(const SeedSet& seeds, const Matrix& feat1, const Matrix& feat2) {
    return mic_correct_detailed(seeds, feat1, feat2).kept;
}

}  // namespace psqe
