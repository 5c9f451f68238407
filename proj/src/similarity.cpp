#include "psqe/similarity.hpp"

#include <string>

#include "psqe/errors.hpp"

namespace psqe {

double ModalityWeights::operator[](Modality m) const {
    switch (m) {
        case Modality::visual: return visual;
        case Modality::attribute: return attribute;
        case Modality::relation: return relation;
    }
    return 0.0;
}

double& ModalityWeights::operator[](Modality m) {
    switch (m) {
        case Modality::attribute: return attribute;
        case Modality::relation: return relation;
        case Modality::visual: break;
    }
    return visual;
}

ModalityWeights ModalityWeights::normalized() const {
    if (!(visual >= 0.0) || !(attribute >= 0.0) || !(relation >= 0.0)) {
        throw ConfigError("modality weights must be non-negative");
    }
    const double total = visual + attribute + relation;
    if (!(total > 0.0)) throw ConfigError("at least one modality weight must be positive");
    return {visual / total, attribute / total, relation / total};
}

ModalityWeights ModalityWeights::without(Modality m) const {
    ModalityWeights w = *this;
    w[m] = 0.0;
    return w;
}

nlohmann::json to_json(const ModalityWeights& w) {
    return {{"visual", w.visual}, {"attribute", w.attribute}, {"relation", w.relation}};
}

ModalityWeights weights_from_json(const nlohmann::json& j) {
    ModalityWeights w;
    try {
        w.visual = j.value("visual", w.visual);
        w.attribute = j.value("attribute", w.attribute);
        w.relation = j.value("relation", w.relation);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("weights: ") + e.what());
    }
    w.normalized();
    return w;
}

namespace {

std::vector<double> row_norms(const Matrix& m, const char* side) {
    std::vector<double> out(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        out[r] = norm(m.row(r));
        if (!(out[r] > 0.0)) {
            throw DataError(std::string("zero-norm row ") + std::to_string(r) + " in " + side +
                            " matrix; cosine similarity is undefined");
        }
    }
    return out;
}

}  // namespace

SimMatrix cosine_sim_matrix(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw DataError("cosine_sim_matrix: feature dimensions differ (" + std::to_string(a.cols()) +
                        " vs " + std::to_string(b.cols()) + ")");
    }
    const auto na = row_norms(a, "first");
    const auto nb = row_norms(b, "second");
    SimMatrix s = multiply_transposed(a, b);
    for (std::size_t i = 0; i < s.rows(); ++i) {
        auto row = s.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) row[j] /= na[i] * nb[j];
    }
    return s;
}

SimMatrix fused_sim(const MultiModalKG& kg1, const MultiModalKG& kg2, const ModalityWeights& w) {
    const ModalityWeights nw = w.normalized();
    SimMatrix out(kg1.n_entities, kg2.n_entities, 0.0);
    for (Modality m : kModalities) {
        if (nw[m] == 0.0) continue;
        const SimMatrix s = cosine_sim_matrix(kg1.features(m), kg2.features(m));
        auto dst = out.data();
        const auto src = s.data();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += nw[m] * src[k];
    }
    return out;
}

Matrix fused_features(const MultiModalKG& kg, const ModalityWeights& w) {
    const ModalityWeights nw = w.normalized();
    std::size_t width = 0;
    for (Modality m : kModalities) {
        if (nw[m] > 0.0) width += kg.features(m).cols();
    }
    Matrix out(kg.n_entities, width);
    std::size_t offset = 0;
    for (Modality m : kModalities) {
        if (nw[m] == 0.0) continue;
        const Matrix& f = kg.features(m);
        const double scale = std::sqrt(nw[m]);
        for (std::size_t r = 0; r < kg.n_entities; ++r) {
            const auto src = f.row(r);
            const double n = norm(src);
            if (!(n > 0.0)) {
                throw DataError(std::string("zero-norm ") + to_string(m) + " features for entity " +
                                std::to_string(r));
            }
            auto dst = out.row(r).subspan(offset, f.cols());
            for (std::size_t d = 0; d < src.size(); ++d) dst[d] = scale * src[d] / n;
        }
        offset += f.cols();
    }
    return out;
}

}  // namespace psqe
