#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "helpers.hpp"
#include "psqe/errors.hpp"
#include "psqe/kg.hpp"
#include "psqe/synth.hpp"

using namespace psqe;
namespace fs = std::filesystem;

namespace {

fs::path write_manifest(const fs::path& dir, std::size_t n, const std::string& edges, const Matrix& visual,
                        const Matrix& attribute, const Matrix& relation) {
    std::ofstream(dir / "edges.txt") << edges;
    write_matrix(dir / "v.bin", visual);
    write_matrix(dir / "a.bin", attribute);
    write_matrix(dir / "r.bin", relation);
    const nlohmann::json m = {{"n_entities", n},
                              {"adjacency", "edges.txt"},
                              {"visual", "v.bin"},
                              {"attribute", "a.bin"},
                              {"relation", "r.bin"}};
    std::ofstream(dir / "kg.json") << m.dump();
    return dir / "kg.json";
}

}  // namespace

TEST_CASE("adjacency is symmetric, sorted and deduplicated") {
    const Adjacency adj = make_adjacency(4, {{2, 0}, {0, 2}, {1, 0}, {3, 2}});
    CHECK(adj[0] == std::vector<std::uint32_t>{1, 2});
    CHECK(adj[2] == std::vector<std::uint32_t>{0, 3});
    CHECK(adj[3] == std::vector<std::uint32_t>{2});
    CHECK_THROWS_AS(make_adjacency(3, {{1, 1}}), DataError);
    CHECK_THROWS_AS(make_adjacency(3, {{0, 3}}), DataError);
}

TEST_CASE("three-entity manifest loads") {
    const auto dir = testing::temp_dir("kg_small");
    const auto path = write_manifest(dir, 3, "0 1\n1 2\n", testing::rows({{1, 0}, {0, 1}, {1, 1}}),
                                     testing::rows({{1}, {2}, {3}}), testing::rows({{1}, {1}, {2}}));
    const MultiModalKG kg = load_kg(path);
    CHECK(kg.n_entities == 3);
    CHECK(kg.edge_count() == 2);
    CHECK(kg.visual(2, 1) == 1.0);
    CHECK(validate_kg(kg).empty());
}

TEST_CASE("row count disagreeing with the manifest is a dimension mismatch") {
    const auto dir = testing::temp_dir("kg_mismatch");
    const auto path = write_manifest(dir, 3, "0 1\n1 2\n", testing::rows({{1, 0}, {0, 1}}),
                                     testing::rows({{1}, {2}, {3}}), testing::rows({{1}, {1}, {2}}));
    try {
        load_kg(path);
        FAIL("expected a DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("dimension mismatch") != std::string::npos);
    }
}

TEST_CASE("missing manifest names the path") {
    try {
        load_kg("/nonexistent/dir/kg.json");
        FAIL("expected a DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("/nonexistent/dir/kg.json") != std::string::npos);
    }
}

TEST_CASE("all-NaN visual rows are filled from the present entries") {
    constexpr std::size_t n = 200, d = 64;
    Matrix visual = testing::gaussian(n, d, 3);
    for (double& x : visual.data()) x = 0.5 + 2.0 * x;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (double& x : visual.row(17)) x = nan;

    // Oracle: mean and standard deviation of every present entry, by direct summation.
    double sum = 0.0, count = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        if (r == 17) continue;
        for (double x : visual.row(r)) sum += x, count += 1.0;
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        if (r == 17) continue;
        for (double x : visual.row(r)) sq += (x - mean) * (x - mean);
    }
    const double sigma = std::sqrt(sq / count);

    const auto replaced = fill_missing_visual(visual, 42);
    CHECK(replaced == std::vector<std::size_t>{17});
    CHECK(all_finite(visual));
    CHECK(visual.rows() == n);
    CHECK(visual.cols() == d);
    double row_mean = 0.0;
    for (double x : visual.row(17)) row_mean += x / d;
    CHECK(std::abs(row_mean - mean) <= 3.0 * sigma / std::sqrt(double(d)));
}

TEST_CASE("manifest with a missing visual row loads with the row filled") {
    const auto dir = testing::temp_dir("kg_fill");
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const auto path = write_manifest(dir, 3, "0 1\n", testing::rows({{1, 2}, {nan, nan}, {3, 4}}),
                                     testing::rows({{1}, {2}, {3}}), testing::rows({{1}, {1}, {2}}));
    const MultiModalKG kg = load_kg(path);
    CHECK(all_finite(kg.visual));
}

TEST_CASE("a partial NaN row is rejected with its entity") {
    const auto dir = testing::temp_dir("kg_nan");
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const auto path = write_manifest(dir, 3, "0 1\n", testing::rows({{1, 2}, {3, 4}, {5, 6}}),
                                     testing::rows({{1}, {nan}, {3}}), testing::rows({{1}, {1}, {2}}));
    try {
        load_kg(path);
        FAIL("expected a DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("entity 1") != std::string::npos);
    }
}

TEST_CASE("validate_kg reports each broken invariant") {
    MultiModalKG kg = testing::make_kg(3, {{0, 1}, {1, 2}}, testing::rows({{1, 0}, {0, 1}, {1, 1}}),
                                       testing::rows({{1}, {2}, {3}}), testing::rows({{1}, {1}, {2}}));
    CHECK(validate_kg(kg).empty());

    SUBCASE("one-directional edge") {
        kg.adjacency = {{}, {2}, {}};
        const auto v = validate_kg(kg);
        REQUIRE(v.size() == 1);
        CHECK(v[0].kind == Violation::Kind::asymmetric_edge);
    }
    SUBCASE("NaN feature") {
        kg.visual(0, 0) = std::numeric_limits<double>::quiet_NaN();
        const auto v = validate_kg(kg);
        REQUIRE(v.size() == 1);
        CHECK(v[0].kind == Violation::Kind::non_finite);
        CHECK(v[0].entity == std::optional<std::size_t>(0));
    }
}

TEST_CASE("save then load reproduces the graph bitwise") {
    SynthConfig cfg;
    cfg.n_pairs = 60;
    cfg.noise_visual = 0.2;
    const SynthResult r = synth_generate(cfg);
    const auto dir = testing::temp_dir("kg_roundtrip");
    const auto path = save_kg(r.kg1, dir, "g");
    const MultiModalKG back = load_kg(path);
    CHECK(back == r.kg1);

    write_alignment(dir / "truth.txt", r.truth);
    CHECK(read_alignment(dir / "truth.txt") == r.truth);
}

TEST_CASE("matrix container rejects a bad header") {
    const auto dir = testing::temp_dir("kg_header");
    std::ofstream(dir / "bad.bin", std::ios::binary) << "XXXX0000000000000000";
    CHECK_THROWS_AS(read_matrix(dir / "bad.bin"), DataError);
}

TEST_CASE("alignment map enforces one-to-one") {
    using P = std::pair<EntityId, EntityId>;
    CHECK_THROWS_AS(AlignmentMap({P{EntityId(0), EntityId(1)}, P{EntityId(0), EntityId(2)}}), DataError);
    const AlignmentMap m({P{EntityId(0), EntityId(1)}, P{EntityId(2), EntityId(0)}});
    CHECK(m.contains(EntityId(2), EntityId(0)));
    CHECK_FALSE(m.contains(EntityId(0), EntityId(0)));
    CHECK(m.target_of(EntityId(0)) == EntityId(1));
}
