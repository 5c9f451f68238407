#include "psqe/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "psqe/errors.hpp"
#include "psqe/pipeline.hpp"
#include "psqe/theory.hpp"

namespace psqe {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

// Pipeline config from an optional file, with graph paths from the command line taking over the input block.
PipelineConfig pipeline_config(const std::string& config, const std::string& kg1, const std::string& kg2,
                               const std::string& truth) {
    json j = config.empty() ? json::object() : read_json(config);
    const fs::path base = config.empty() ? fs::path{} : fs::path(config).parent_path();
    if (!kg1.empty() || !kg2.empty()) {
        j.erase("synth");
        j["input"] = {{"kg1", fs::absolute(kg1).string()}, {"kg2", fs::absolute(kg2).string()}};
        if (!truth.empty()) j["input"]["truth"] = fs::absolute(truth).string();
    }
    return pipeline_config_from_json(j, base);
}

fs::path default_output_dir() {
    if (const char* env = std::getenv("PSQE_OUTPUT_DIR"); env && *env) return env;
    return "psqe_out";
}

}  // namespace

int cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Pseudo-seed quality enhancement for multimodal entity alignment", "psqe"};
    app.require_subcommand(1);

    std::string kg1, kg2, truth, config, out_path, seeds_path, params_dir, loss_path, audit_path, strategy;
    std::size_t n = 1000, batches = 1000, runs = 1;
    std::uint64_t seed = 42;
    std::optional<std::size_t> fixed_n, max_new;
    std::optional<std::uint64_t> rng_override;
    double eta = 0.8, test_fraction = 0.7;
    bool warm_start = false, no_recheck = false;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic graph pair with ground truth");
    synth->add_option("--config", config, "Generator settings (JSON)");
    synth->add_option("--out", out_path, "Output directory")->required();

    auto* seed_cmd = app.add_subcommand("seed", "Produce pseudo seeds");
    seed_cmd->add_option("--kg1", kg1, "First graph manifest")->required();
    seed_cmd->add_option("--kg2", kg2, "Second graph manifest")->required();
    seed_cmd->add_option("--strategy", strategy, "uvp-visual | uvp-multimodal | psqe")
        ->required()
        ->check(CLI::IsMember({"uvp-visual", "uvp-multimodal", "psqe"}));
    seed_cmd->add_option("--n", n, "Number of initial seeds");
    seed_cmd->add_option("--config", config, "Pipeline config (JSON)");
    seed_cmd->add_option("--out", out_path, "Seed file")->required();

    auto* train_cmd = app.add_subcommand("train", "Train the feature enhancer on a seed file");
    train_cmd->add_option("--kg1", kg1, "First graph manifest")->required();
    train_cmd->add_option("--kg2", kg2, "Second graph manifest")->required();
    train_cmd->add_option("--seeds", seeds_path, "Seed file")->required();
    train_cmd->add_option("--config", config, "Training settings (JSON)");
    train_cmd->add_option("--out", out_path, "Parameter directory")->required();
    train_cmd->add_option("--loss", loss_path, "Loss trace CSV");

    auto* expand_cmd = app.add_subcommand("expand", "Neighbor expansion of a seed file");
    expand_cmd->add_option("--kg1", kg1, "First graph manifest")->required();
    expand_cmd->add_option("--kg2", kg2, "Second graph manifest")->required();
    expand_cmd->add_option("--seeds", seeds_path, "Seed file")->required();
    expand_cmd->add_option("--params", params_dir, "Trained enhancer directory")->required();
    expand_cmd->add_option("--config", config, "Pipeline config (JSON) for modality weights");
    expand_cmd->add_option("--eta", eta, "Similarity threshold");
    expand_cmd->add_option("--max-new", max_new, "Cap on added pairs");
    expand_cmd->add_flag("--no-recheck", no_recheck, "Keep additions without correction");
    expand_cmd->add_option("--out", out_path, "Seed file")->required();
    expand_cmd->add_option("--audit", audit_path, "Audit CSV");

    auto* eval_cmd = app.add_subcommand("evaluate", "Seed quality and optional ranking metrics");
    eval_cmd->add_option("--kg1", kg1, "First graph manifest")->required();
    eval_cmd->add_option("--kg2", kg2, "Second graph manifest")->required();
    eval_cmd->add_option("--seeds", seeds_path, "Seed file")->required();
    eval_cmd->add_option("--truth", truth, "Ground-truth alignment")->required();
    eval_cmd->add_option("--params", params_dir, "Trained enhancer directory for ranking");
    eval_cmd->add_option("--test-fraction", test_fraction, "Share of truth used as queries");
    eval_cmd->add_option("--rng-seed", seed, "Test split seed");

    auto* theory_cmd = app.add_subcommand("theory-check", "Numerical checks of the contrastive loss bound and gradients");
    theory_cmd->add_option("--batches", batches, "Random batches");
    theory_cmd->add_option("--seed", seed, "RNG seed");

    auto* compare_cmd = app.add_subcommand("compare-types", "Compare visual UVP, multimodal UVP and the full pipeline");
    compare_cmd->add_option("--config", config, "Pipeline config (JSON)")->required();
    compare_cmd->add_option("--runs", runs, "Number of seeds, offset from the configured ones");
    compare_cmd->add_option("--out", out_path, "CSV file");

    auto* run_cmd = app.add_subcommand("run", "Full pipeline");
    run_cmd->add_option("--config", config, "Pipeline config (JSON)")->required();
    run_cmd->add_option("--out", out_path, "Output directory");
    run_cmd->add_option("--fixed-n", fixed_n, "Truncate the final seeds by score");
    run_cmd->add_option("--rng-seed", rng_override, "Override rng_seed");
    run_cmd->add_flag("--warm-start-uvp", warm_start, "Start Stage I from the UVP seeds");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 2;
    }

    try {
        if (synth->parsed()) {
            // Accepts a bare generator config or a pipeline config with a "synth" block.
            SynthConfig cfg;
            if (!config.empty()) {
                const auto j = read_json(config);
                cfg = synth_config_from_json(j.contains("synth") ? j.at("synth") : j);
            }
            validate(cfg);
            const SynthResult r = synth_generate(cfg);
            save_kg(r.kg1, out_path, "kg1");
            save_kg(r.kg2, out_path, "kg2");
            write_alignment(fs::path(out_path) / "truth.txt", r.truth);
            out << "wrote " << out_path << "\n";
        } else if (seed_cmd->parsed()) {
            PipelineConfig cfg = pipeline_config(config, kg1, kg2, "");
            cfg.n_init_seeds = n;
            SeedSet s;
            if (strategy == "psqe") {
                cfg.output_dir.reset();
                s = run_pipeline(cfg).s3;
            } else {
                const Dataset d = load_dataset(cfg.input);
                const SimMatrix sim = strategy == "uvp-visual" ? cosine_sim_matrix(d.kg1.visual, d.kg2.visual)
                                                               : fused_sim(d.kg1, d.kg2, cfg.weights);
                s = uvp_seeds(sim, n);
            }
            write_seeds(out_path, s);
            out << s.size() << " seeds written to " << out_path << "\n";
        } else if (train_cmd->parsed()) {
            const TrainConfig cfg = config.empty() ? TrainConfig{} : train_config_from_json(read_json(config));
            const MultiModalKG g1 = load_kg(kg1), g2 = load_kg(kg2);
            const TrainResult r = train(g1, g2, read_seeds(seeds_path), cfg);
            save_params(out_path, r.params);
            if (!loss_path.empty()) write_loss_trace(loss_path, r.loss_trace);
            out << "final loss " << (r.loss_trace.empty() ? 0.0 : r.loss_trace.back()) << "\n";
        } else if (expand_cmd->parsed()) {
            const PipelineConfig pc = pipeline_config(config, kg1, kg2, "");
            const MultiModalKG g1 = load_kg(kg1), g2 = load_kg(kg2);
            const EnhancerParams params = load_params(params_dir);
            const EnhancedFeatures f1 = forward(g1, params), f2 = forward(g2, params);
            const Matrix o1 = fused_features(g1, pc.weights), o2 = fused_features(g2, pc.weights);
            ExpansionConfig ec;
            ec.eta = eta;
            ec.max_new = max_new;
            const SeedSet seeds = read_seeds(seeds_path);
            const ExpansionResult ex = expand(seeds, ec, g1, g2, o1, o2, f1.joint, f2.joint);
            const SeedSet result = no_recheck ? ex.seeds : recheck(ex.seeds, o1, o2);
            write_seeds(out_path, result);
            if (!audit_path.empty()) write_audit(audit_path, ex.audit);
            out << seeds.size() << " -> " << result.size() << " seeds\n";
        } else if (eval_cmd->parsed()) {
            const MultiModalKG g1 = load_kg(kg1), g2 = load_kg(kg2);
            const AlignmentMap t = read_alignment(truth);
            const SeedSet s = read_seeds(seeds_path);
            json report = {{"quality", to_json(quality_report(s, t, g1, g2))}};
            if (!params_dir.empty()) {
                if (!(test_fraction > 0.0 && test_fraction <= 1.0)) {
                    throw ConfigError("--test-fraction must lie in (0, 1]");
                }
                const EnhancerParams params = load_params(params_dir);
                const EnhancedFeatures f1 = forward(g1, params), f2 = forward(g2, params);
                report["ranking"] = to_json(rank_alignment(f1.joint, f2.joint, test_split(t, test_fraction, seed)));
            }
            out << report.dump(2) << "\n";
        } else if (theory_cmd->parsed()) {
            const theory::CheckReport r = theory::run_check(batches, seed);
            const json report = {{"batches", r.batches},           {"bound_violations", r.bound_violations},
                                 {"min_margin", r.min_margin},     {"max_fd_error", r.max_fd_error},
                                 {"tightness_gap", r.tightness_gap}};
            out << report.dump(2) << "\n";
            return r.bound_violations == 0 ? 0 : 1;
        } else if (compare_cmd->parsed()) {
            const PipelineConfig base = load_pipeline_config(config);
            std::ofstream file;
            if (!out_path.empty()) {
                file.open(out_path, std::ios::binary);
                if (!file) throw DataError("cannot write " + out_path);
            }
            std::ostream& sink = out_path.empty() ? out : file;
            sink << csv_header() << "\n";
            for (std::size_t r = 0; r < runs; ++r) {
                PipelineConfig cfg = base;
                cfg.rng_seed = base.rng_seed + r;
                if (cfg.input.synth) cfg.input.synth->rng_seed = base.input.synth->rng_seed + r;
                for (const TypeRow& row : type_comparison(cfg)) {
                    sink << csv_row(row.strategy, row.quality, row.ranking, cfg.rng_seed) << "\n";
                }
            }
        } else if (run_cmd->parsed()) {
            PipelineConfig cfg = load_pipeline_config(config);
            if (!out_path.empty()) {
                cfg.output_dir = out_path;
            } else if (!cfg.output_dir) {
                cfg.output_dir = default_output_dir();
            }
            if (fixed_n) cfg.fixed_n = fixed_n;
            if (rng_override) cfg.rng_seed = *rng_override;
            if (warm_start) cfg.warm_start_uvp = true;
            validate(cfg);
            const RunRecord rec = run_pipeline(cfg);
            json summary = to_json(rec);
            summary.erase("config");
            out << summary.dump(2) << "\n";
            out << "outputs in " << cfg.output_dir->string() << "\n";
        }
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace psqe
