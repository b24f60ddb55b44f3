// Experiment CLI: simulate -> observe -> fit -> evaluate pipelines driven by
// a single JSON config. See README for the file formats.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "driftforge/errors.hpp"
#include "driftforge/experiment.hpp"
#include "driftforge/io.hpp"
#include "driftforge/log.hpp"

namespace fs = std::filesystem;
using namespace driftforge;

namespace {

void set_log_level(const std::string& name) {
    if (name == "quiet") log_level() = LogLevel::quiet;
    else if (name == "warn") log_level() = LogLevel::warn;
    else if (name == "info") log_level() = LogLevel::info;
    else if (name == "debug") log_level() = LogLevel::debug;
    else throw ConfigError("unknown log level '" + name + "'");
}

ExperimentConfig load_config(const std::string& path, const std::string& out_override,
                             std::optional<std::uint64_t> seed_override,
                             bool dump_particles) {
    ExperimentConfig cfg = ExperimentConfig::from_file(path);
    if (!out_override.empty()) cfg.output_dir = out_override;
    if (seed_override) cfg.override_seeds(*seed_override);
    if (dump_particles) cfg.dump_particles = true;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"drift-forge: nonparametric SDE drift estimation from sparse, noisy data"};
    app.require_subcommand(1);

    std::string config_path, out_dir, log_name = "warn";
    std::optional<std::uint64_t> seed_override;
    bool dump_particles = false;
    app.add_option("--log-level", log_name, "quiet|warn|info|debug");

    auto add_common = [&](CLI::App* sub, bool needs_config = true) {
        auto* opt = sub->add_option("--config", config_path, "experiment config (JSON)");
        if (needs_config) opt->required();
        sub->add_option("--out", out_dir, "output directory (overrides config)");
        sub->add_option("--seed", seed_override, "override all stage seeds");
        sub->add_flag("--dump-particles", dump_particles,
                      "write per-iteration particle diagnostics");
    };

    auto* sub_run = app.add_subcommand("run", "full pipeline: simulate, fit, evaluate");
    add_common(sub_run);

    auto* sub_sim = app.add_subcommand("simulate", "generate latent path and observations");
    add_common(sub_sim);

    std::string obs_csv, obs_meta;
    auto* sub_fit = app.add_subcommand("fit", "fit a drift from an observations file");
    add_common(sub_fit);
    sub_fit->add_option("--observations", obs_csv, "observations.csv")->required();
    sub_fit->add_option("--meta", obs_meta, "observations sidecar (default: <csv>.meta.json)");

    std::string drift_path;
    auto* sub_eval = app.add_subcommand("eval", "evaluate a fitted drift against the model");
    add_common(sub_eval);
    sub_eval->add_option("--drift", drift_path, "drift.json")->required();

    std::string table = "table1", row = "model1";
    int rep_stride = 5, rep_seeds = 10, rep_cs = 3;
    auto* sub_rep = app.add_subcommand("reproduce", "re-run a benchmark table cell");
    sub_rep->add_option("table", table, "table name (table1)");
    sub_rep->add_option("--row", row, "model1|model2|model3");
    sub_rep->add_option("--stride", rep_stride, "observation stride");
    sub_rep->add_option("--seeds", rep_seeds, "number of seeds");
    sub_rep->add_option("--center-stride", rep_cs, "kernel-center thinning");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        set_log_level(log_name);

        if (sub_run->parsed()) {
            ExperimentConfig cfg = load_config(config_path, out_dir, seed_override,
                                               dump_particles);
            ExperimentResult res = run_experiment(cfg);
            std::cout << "mse " << io::format_double(res.report.mse);
            if (res.report.kolmogorov)
                std::cout << "  kolmogorov " << io::format_double(*res.report.kolmogorov);
            std::cout << "\noutputs in " << cfg.output_dir << "\n";
        } else if (sub_sim->parsed()) {
            ExperimentConfig cfg = load_config(config_path, out_dir, seed_override, false);
            fs::create_directories(cfg.output_dir);
            const fs::path out(cfg.output_dir);
            io::write_text((out / "config.resolved.json").string(),
                           cfg.to_json().dump(2) + "\n");
            LatentPath latent = simulate(cfg.model(), cfg.grid(), cfg.x0, cfg.sim_seed);
            io::write_path_csv((out / "latent.csv").string(), latent);
            ObservationSet obs =
                observe(latent, cfg.stride, cfg.G, cfg.sigma_noise, cfg.obs_seed);
            io::write_observations_csv((out / "observations.csv").string(), obs, cfg.grid());
            io::write_observations_meta((out / "observations.meta.json").string(), obs,
                                        cfg.grid(), cfg.obs_seed);
            std::cout << obs.indices.size() << " observations written to " << cfg.output_dir
                      << "\n";
        } else if (sub_fit->parsed()) {
            ExperimentConfig cfg = load_config(config_path, out_dir, seed_override,
                                               dump_particles);
            if (obs_meta.empty()) obs_meta = obs_csv + ".meta.json";
            if (!fs::exists(obs_meta)) {
                // simulate writes observations.meta.json next to observations.csv
                fs::path alt = fs::path(obs_csv).parent_path() / "observations.meta.json";
                if (fs::exists(alt)) obs_meta = alt.string();
            }
            TimeGrid grid;
            ObservationSet obs = io::read_observations(obs_csv, obs_meta, grid);
            fs::create_directories(cfg.output_dir);
            io::write_text((fs::path(cfg.output_dir) / "config.resolved.json").string(),
                           cfg.to_json().dump(2) + "\n");
            ExperimentResult res = fit_and_evaluate(cfg, obs, grid, true, nullptr);
            std::cout << "mse " << io::format_double(res.report.mse) << "\noutputs in "
                      << cfg.output_dir << "\n";
        } else if (sub_eval->parsed()) {
            ExperimentConfig cfg = load_config(config_path, out_dir, seed_override, false);
            DriftFunction fitted = io::read_drift(drift_path);
            // multivariate grids need the trajectory bounding box; re-simulate
            // deterministically from the config seeds
            std::optional<LatentPath> latent;
            if (cfg.model().dim > 1)
                latent = simulate(cfg.model(), cfg.grid(), cfg.x0, cfg.sim_seed);
            EvalReport rep = evaluate_drift(cfg, fitted, latent ? &*latent : nullptr);
            fs::create_directories(cfg.output_dir);
            io::write_eval_report((fs::path(cfg.output_dir) / "eval.json").string(), rep);
            std::cout << "mse " << io::format_double(rep.mse);
            if (rep.kolmogorov)
                std::cout << "  kolmogorov " << io::format_double(*rep.kolmogorov);
            std::cout << "\n";
        } else if (sub_rep->parsed()) {
            if (table != "table1")
                throw ConfigError("reproduce: unknown table '" + table + "'");
            ReproduceRow res = reproduce_table1(row, rep_stride, rep_seeds, rep_cs);
            for (int s = 0; s < res.seeds; ++s)
                std::cout << "seed " << s << ": mse " << io::format_double(res.mse[s])
                          << "  kolmogorov " << io::format_double(res.kolmogorov[s]) << "\n";
            std::cout << res.row << " stride " << res.stride << " (" << res.seeds
                      << " seeds): median mse " << io::format_double(res.median_mse)
                      << "  median kolmogorov " << io::format_double(res.median_kolmogorov)
                      << "\n";
        }
    } catch (const ConfigError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return 2;
    } catch (const Error& err) {
        std::cerr << "numerical failure: " << err.what() << "\n";
        return 3;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 3;
    }
    return 0;
}
