#include "psqe/kg.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "psqe/errors.hpp"

namespace psqe {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(Modality m) {
    switch (m) {
        case Modality::visual: return "visual";
        case Modality::attribute: return "attribute";
        case Modality::relation: return "relation";
    }
    return "?";
}

const Matrix& MultiModalKG::features(Modality m) const {
    switch (m) {
        case Modality::visual: return visual;
        case Modality::attribute: return attribute;
        case Modality::relation: return relation;
    }
    return visual;
}

Matrix& MultiModalKG::features(Modality m) {
    return const_cast<Matrix&>(std::as_const(*this).features(m));
}

std::size_t MultiModalKG::edge_count() const {
    std::size_t twice = 0;
    for (const auto& nb : adjacency) twice += nb.size();
    return twice / 2;
}

Adjacency make_adjacency(std::size_t n,
                         const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
    Adjacency adj(n);
    for (const auto& [u, v] : edges) {
        if (u >= n || v >= n) {
            throw DataError("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                            ") references entity " + std::to_string(std::max(u, v)) +
                            " outside [0, " + std::to_string(n) + ")");
        }
        if (u == v) throw DataError("self-loop on entity " + std::to_string(u));
        adj[u].push_back(static_cast<std::uint32_t>(v));
        adj[v].push_back(static_cast<std::uint32_t>(u));
    }
    for (auto& nb : adj) {
        std::sort(nb.begin(), nb.end());
        nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    }
    return adj;
}

AlignmentMap::AlignmentMap(std::vector<std::pair<EntityId, EntityId>> pairs)
    : pairs_(std::move(pairs)) {
    std::unordered_map<std::uint32_t, std::uint32_t> backward;
    for (const auto& [a, b] : pairs_) {
        if (!forward_.emplace(a.value, b.value).second) {
            throw DataError("alignment lists G1 entity " + std::to_string(a.value) + " twice");
        }
        if (!backward.emplace(b.value, a.value).second) {
            throw DataError("alignment lists G2 entity " + std::to_string(b.value) + " twice");
        }
    }
}

bool AlignmentMap::contains(EntityId e1, EntityId e2) const {
    const auto it = forward_.find(e1.value);
    return it != forward_.end() && it->second == e2.value;
}

std::optional<EntityId> AlignmentMap::target_of(EntityId e1) const {
    const auto it = forward_.find(e1.value);
    if (it == forward_.end()) return std::nullopt;
    return EntityId(it->second);
}

// --- binary matrices -----------------------------------------------------------

namespace {

constexpr std::array<char, 4> kMagic = {'P', 'S', 'Q', 'E'};

void put_u32(std::ostream& os, std::uint32_t v) {
    const std::array<char, 4> b = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                                   static_cast<char>((v >> 16) & 0xFF),
                                   static_cast<char>((v >> 24) & 0xFF)};
    os.write(b.data(), 4);
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

Matrix read_matrix(const fs::path& path) {
    const std::string bytes = read_file(path);
    if (bytes.size() < 16) throw DataError(path.string() + ": truncated matrix header");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (std::memcmp(p, kMagic.data(), 4) != 0) throw DataError(path.string() + ": bad magic");
    const std::uint32_t version = get_u32(p + 4);
    if (version != kMatrixFormatVersion) {
        throw DataError(path.string() + ": unsupported matrix version " + std::to_string(version));
    }
    const std::size_t rows = get_u32(p + 8);
    const std::size_t cols = get_u32(p + 12);
    if (bytes.size() != 16 + rows * cols * 4) {
        throw DataError(path.string() + ": payload size " + std::to_string(bytes.size() - 16) +
                        " does not match header " + std::to_string(rows) + "x" +
                        std::to_string(cols));
    }
    Matrix m(rows, cols);
    auto out = m.data();
    for (std::size_t i = 0; i < rows * cols; ++i) {
        out[i] = static_cast<double>(std::bit_cast<float>(get_u32(p + 16 + 4 * i)));
    }
    return m;
}

void write_matrix(const fs::path& path, const Matrix& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write " + path.string());
    os.write(kMagic.data(), 4);
    put_u32(os, kMatrixFormatVersion);
    put_u32(os, static_cast<std::uint32_t>(m.rows()));
    put_u32(os, static_cast<std::uint32_t>(m.cols()));
    for (double x : m.data()) put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
}

AlignmentMap read_alignment(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<std::pair<EntityId, EntityId>> pairs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::size_t a = 0, b = 0;
        if (!(ls >> a >> b)) throw DataError(path.string() + ": malformed line '" + line + "'");
        pairs.emplace_back(EntityId(a), EntityId(b));
    }
    return AlignmentMap(std::move(pairs));
}

void write_alignment(const fs::path& path, const AlignmentMap& truth) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write " + path.string());
    for (const auto& [a, b] : truth.pairs()) os << a.value << ' ' << b.value << '\n';
}

// --- missing visuals -----------------------------------------------------------

std::vector<std::size_t> fill_missing_visual(Matrix& visual, std::uint64_t seed) {
    std::vector<std::size_t> missing;
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t r = 0; r < visual.rows(); ++r) {
        const auto row = visual.row(r);
        if (!row.empty() && std::all_of(row.begin(), row.end(), [](double x) { return std::isnan(x); })) {
            missing.push_back(r);
            continue;
        }
        for (double x : row) sum += x;
        count += row.size();
    }
    if (missing.empty()) return missing;
    if (count == 0) throw DataError("every visual row is missing; cannot estimate a fill distribution");

    const double mean = sum / static_cast<double>(count);
    double sq = 0.0;
    for (std::size_t r = 0, m = 0; r < visual.rows(); ++r) {
        if (m < missing.size() && missing[m] == r) {
            ++m;
            continue;
        }
        for (double x : visual.row(r)) sq += (x - mean) * (x - mean);
    }
    const double stddev = std::sqrt(sq / static_cast<double>(count));

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(mean, stddev);
    for (std::size_t r : missing) {
        for (double& x : visual.row(r)) x = stddev > 0.0 ? dist(rng) : mean;
    }
    return missing;
}

// --- manifest ------------------------------------------------------------------

namespace {

Adjacency read_adjacency(const fs::path& path, std::size_t n) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        long long u = 0, v = 0;
        if (!(ls >> u >> v) || u < 0 || v < 0) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed edge '" + line + "'");
        }
        edges.emplace_back(static_cast<std::size_t>(u), static_cast<std::size_t>(v));
    }
    try {
        return make_adjacency(n, edges);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void check_finite_rows(const Matrix& m, const char* name) {
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (double x : m.row(r)) {
            if (!std::isfinite(x)) {
                throw DataError(std::string(name) + " matrix has a non-finite value at entity " +
                                std::to_string(r));
            }
        }
    }
}

}  // namespace

MultiModalKG load_kg(const fs::path& manifest_path, const LoadOptions& opts) {
    json manifest;
    try {
        manifest = json::parse(read_file(manifest_path));
    } catch (const json::exception& e) {
        throw DataError(manifest_path.string() + ": invalid manifest JSON: " + e.what());
    }
    const fs::path base = manifest_path.parent_path();
    auto path_of = [&](const char* key) -> fs::path {
        if (!manifest.contains(key) || !manifest[key].is_string()) {
            throw DataError(manifest_path.string() + ": manifest lacks \"" + key + "\"");
        }
        return base / manifest[key].get<std::string>();
    };
    if (!manifest.contains("n_entities") || !manifest["n_entities"].is_number_unsigned()) {
        throw DataError(manifest_path.string() + ": manifest lacks a non-negative \"n_entities\"");
    }

    MultiModalKG kg;
    kg.n_entities = manifest["n_entities"].get<std::size_t>();
    kg.adjacency = read_adjacency(path_of("adjacency"), kg.n_entities);

    for (Modality m : kModalities) {
        const fs::path p = path_of(to_string(m));
        Matrix mat = read_matrix(p);
        if (mat.rows() != kg.n_entities) {
            throw DataError("dimension mismatch: " + std::string(to_string(m)) + " matrix " +
                            p.string() + " has " + std::to_string(mat.rows()) +
                            " rows but the manifest declares " + std::to_string(kg.n_entities) +
                            " entities (first unmatched entity " +
                            std::to_string(std::min(mat.rows(), kg.n_entities)) + ")");
        }
        if (manifest.contains("dims") && manifest["dims"].contains(to_string(m))) {
            const auto want = manifest["dims"][to_string(m)].get<std::size_t>();
            if (want != mat.cols()) {
                throw DataError("dimension mismatch: " + std::string(to_string(m)) + " matrix has " +
                                std::to_string(mat.cols()) + " columns, manifest declares " +
                                std::to_string(want));
            }
        }
        if (m == Modality::visual) fill_missing_visual(mat, opts.fill_seed);
        check_finite_rows(mat, to_string(m));
        kg.features(m) = std::move(mat);
    }

    if (manifest.contains("labels") && manifest["labels"].is_string()) {
        std::ifstream in(path_of("labels"));
        if (!in) throw DataError("cannot open " + path_of("labels").string());
        std::string line;
        while (std::getline(in, line)) kg.labels.push_back(line);
        if (kg.labels.size() != kg.n_entities) {
            throw DataError("label file lists " + std::to_string(kg.labels.size()) +
                            " labels for " + std::to_string(kg.n_entities) + " entities");
        }
    }

    if (const auto violations = validate_kg(kg); !violations.empty()) {
        const auto& v = violations.front();
        throw DataError(manifest_path.string() + ": " + v.detail);
    }
    return kg;
}

fs::path save_kg(const MultiModalKG& kg, const fs::path& dir, const std::string& stem) {
    fs::create_directories(dir);
    json manifest;
    manifest["n_entities"] = kg.n_entities;
    manifest["adjacency"] = stem + "_edges.txt";
    {
        std::ofstream os(dir / (stem + "_edges.txt"));
        if (!os) throw DataError("cannot write " + (dir / (stem + "_edges.txt")).string());
        for (std::size_t u = 0; u < kg.adjacency.size(); ++u) {
            for (std::uint32_t v : kg.adjacency[u]) {
                if (u < v) os << u << ' ' << v << '\n';
            }
        }
    }
    for (Modality m : kModalities) {
        const std::string file = stem + "_" + to_string(m) + ".bin";
        write_matrix(dir / file, kg.features(m));
        manifest[to_string(m)] = file;
        manifest["dims"][to_string(m)] = kg.features(m).cols();
    }
    if (!kg.labels.empty()) {
        manifest["labels"] = stem + "_labels.txt";
        std::ofstream os(dir / (stem + "_labels.txt"));
        for (const auto& l : kg.labels) os << l << '\n';
    }
    const fs::path out = dir / (stem + ".json");
    std::ofstream os(out);
    if (!os) throw DataError("cannot write " + out.string());
    os << manifest.dump(2) << '\n';
    return out;
}

// --- validation ----------------------------------------------------------------

const char* to_string(Violation::Kind k) {
    switch (k) {
        case Violation::Kind::shape: return "shape";
        case Violation::Kind::non_finite: return "non_finite";
        case Violation::Kind::asymmetric_edge: return "asymmetric_edge";
        case Violation::Kind::self_loop: return "self_loop";
        case Violation::Kind::out_of_range: return "out_of_range";
        case Violation::Kind::unsorted_neighbors: return "unsorted_neighbors";
        case Violation::Kind::label_count: return "label_count";
    }
    return "?";
}

std::vector<Violation> validate_kg(const MultiModalKG& kg) {
    using K = Violation::Kind;
    std::vector<Violation> out;
    const std::size_t n = kg.n_entities;

    if (kg.adjacency.size() != n) {
        out.push_back({K::shape, std::nullopt,
                       "adjacency has " + std::to_string(kg.adjacency.size()) + " lists for " +
                           std::to_string(n) + " entities"});
    }
    for (std::size_t u = 0; u < kg.adjacency.size(); ++u) {
        const auto& nb = kg.adjacency[u];
        if (!std::is_sorted(nb.begin(), nb.end()) ||
            std::adjacent_find(nb.begin(), nb.end()) != nb.end()) {
            out.push_back({K::unsorted_neighbors, u,
                           "neighbors of entity " + std::to_string(u) + " are not sorted and unique"});
        }
        for (std::uint32_t v : nb) {
            if (v >= kg.adjacency.size()) {
                out.push_back({K::out_of_range, u,
                               "entity " + std::to_string(u) + " lists neighbor " +
                                   std::to_string(v) + " outside the graph"});
            } else if (v == u) {
                out.push_back({K::self_loop, u, "self-loop on entity " + std::to_string(u)});
            } else if (!std::binary_search(kg.adjacency[v].begin(), kg.adjacency[v].end(),
                                           static_cast<std::uint32_t>(u))) {
                out.push_back({K::asymmetric_edge, u,
                               "edge (" + std::to_string(u) + ", " + std::to_string(v) +
                                   ") has no reverse (" + std::to_string(v) + ", " +
                                   std::to_string(u) + ")"});
            }
        }
    }
    for (Modality m : kModalities) {
        const Matrix& f = kg.features(m);
        if (f.rows() != n) {
            out.push_back({K::shape, std::nullopt,
                           std::string(to_string(m)) + " matrix has " + std::to_string(f.rows()) +
                               " rows for " + std::to_string(n) + " entities"});
        }
        if (f.cols() == 0) {
            out.push_back({K::shape, std::nullopt, std::string(to_string(m)) + " matrix has no columns"});
        }
        for (std::size_t r = 0; r < f.rows(); ++r) {
            const auto row = f.row(r);
            if (std::any_of(row.begin(), row.end(), [](double x) { return !std::isfinite(x); })) {
                out.push_back({K::non_finite, r,
                               std::string(to_string(m)) + " features of entity " +
                                   std::to_string(r) + " contain NaN/Inf"});
            }
        }
    }
    if (!kg.labels.empty() && kg.labels.size() != n) {
        out.push_back({K::label_count, std::nullopt,
                       std::to_string(kg.labels.size()) + " labels for " + std::to_string(n) +
                           " entities"});
    }
    return out;
}

}  // namespace psqe
