#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "helpers.hpp"
#include "psqe/cli.hpp"

using namespace psqe;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli(args, out, err);
    return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
    const Result r = run({"run", "--bogus"});
    CHECK(r.code == 2);
    CHECK(r.err.find("Usage") != std::string::npos);
    CHECK(run({}).code == 2);
    CHECK(run({"seed", "--kg1", "a", "--kg2", "b", "--strategy", "magic", "--out", "x"}).code == 2);
}

TEST_CASE("missing manifest exits with 1 and names it") {
    const Result r = run({"seed", "--kg1", "/no/such/kg1.json", "--kg2", "/no/such/kg2.json", "--strategy",
                          "uvp-visual", "--out", "/tmp/x.txt"});
    CHECK(r.code == 1);
    CHECK(r.err.find("/no/such/kg1.json") != std::string::npos);
}

TEST_CASE("bad config exits with 2") {
    const auto dir = testing::temp_dir("cli_cfg");
    std::ofstream(dir / "c.json") << R"({"synth": {}, "n_init_seeds": 0})";
    CHECK(run({"run", "--config", (dir / "c.json").string()}).code == 2);
}

TEST_CASE("theory check") {
    const Result r = run({"theory-check", "--batches", "50"});
    CHECK(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["bound_violations"] == 0);
    CHECK(j.contains("max_fd_error"));
    CHECK(j.contains("tightness_gap"));
}

TEST_CASE("file workflow: synth, seed, train, expand, evaluate") {
    const auto dir = testing::temp_dir("cli_flow");
    std::ofstream(dir / "synth.json") << R"({"n_pairs": 80, "noise_visual": 0.3, "rng_seed": 3})";
    std::ofstream(dir / "train.json") << R"({"epochs": 5, "hidden_dim": 8, "batch_size": 32})";
    const std::string kg1 = (dir / "kg1.json").string(), kg2 = (dir / "kg2.json").string();

    REQUIRE(run({"synth", "--config", (dir / "synth.json").string(), "--out", dir.string()}).code == 0);
    for (const char* strategy : {"uvp-visual", "uvp-multimodal"}) {
        const Result r = run({"seed", "--kg1", kg1, "--kg2", kg2, "--strategy", strategy, "--n", "30", "--out",
                              (dir / "seeds.txt").string()});
        CHECK(r.code == 0);
    }
    REQUIRE(run({"train", "--kg1", kg1, "--kg2", kg2, "--seeds", (dir / "seeds.txt").string(), "--config",
                 (dir / "train.json").string(), "--out", (dir / "params").string(), "--loss",
                 (dir / "loss.csv").string()})
                .code == 0);
    CHECK(fs::exists(dir / "params" / "params.json"));
    REQUIRE(run({"expand", "--kg1", kg1, "--kg2", kg2, "--seeds", (dir / "seeds.txt").string(), "--params",
                 (dir / "params").string(), "--eta", "0.5", "--out", (dir / "expanded.txt").string(), "--audit",
                 (dir / "audit.csv").string()})
                .code == 0);
    const Result ev = run({"evaluate", "--kg1", kg1, "--kg2", kg2, "--seeds", (dir / "expanded.txt").string(),
                           "--truth", (dir / "truth.txt").string(), "--params", (dir / "params").string()});
    REQUIRE(ev.code == 0);
    const auto j = nlohmann::json::parse(ev.out);
    CHECK(j["quality"]["precision"].get<double>() > 0.5);
    CHECK(j.contains("ranking"));
}

TEST_CASE("run writes the record") {
    const auto dir = testing::temp_dir("cli_run");
    std::ofstream(dir / "c.json") << R"({"synth": {"n_pairs": 60}, "n_init_seeds": 20,
        "train": {"epochs": 3, "hidden_dim": 8, "batch_size": 32}})";
    const Result r = run({"run", "--config", (dir / "c.json").string(), "--out", (dir / "out").string()});
    CHECK(r.code == 0);
    for (const char* f : {"record.json", "seeds_s0.txt", "seeds_s1.txt", "seeds_s2.txt", "seeds_s3.txt", "loss.csv",
                          "expansion.csv"}) {
        CHECK(fs::exists(dir / "out" / f));
    }
}

TEST_CASE("compare-types writes CSV rows") {
    const auto dir = testing::temp_dir("cli_cmp");
    std::ofstream(dir / "c.json") << R"({"synth": {"n_pairs": 60}, "n_init_seeds": 20,
        "train": {"epochs": 2, "hidden_dim": 8, "batch_size": 32}})";
    const Result r = run({"compare-types", "--config", (dir / "c.json").string(), "--runs", "2"});
    REQUIRE(r.code == 0);
    std::istringstream lines(r.out);
    std::string line;
    int n = 0;
    while (std::getline(lines, line)) ++n;
    CHECK(n == 1 + 2 * 3);
}

TEST_CASE("synth reads the generator block of a pipeline config") {
    const auto dir = testing::temp_dir("cli_synth_block");
    std::ofstream(dir / "c.json") << R"({"synth": {"n_pairs": 40, "rng_seed": 2}, "n_init_seeds": 10})";
    REQUIRE(run({"synth", "--config", (dir / "c.json").string(), "--out", dir.string()}).code == 0);
    std::ifstream truth(dir / "truth.txt");
    std::size_t lines = 0;
    for (std::string line; std::getline(truth, line);) lines += !line.empty();
    CHECK(lines == 40);
}
