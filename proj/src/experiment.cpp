#include "driftforge/experiment.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "driftforge/errors.hpp"
#include "driftforge/io.hpp"
#include "driftforge/log.hpp"
#include "driftforge/parallel.hpp"

namespace driftforge {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string mode_name(EmMode m) {
    return m == EmMode::penalized ? "penalized" : "bayes_t_prior";
}

EmMode mode_from(const std::string& s) {
    if (s == "penalized") return EmMode::penalized;
    if (s == "bayes_t_prior") return EmMode::bayes_t_prior;
    throw ConfigError("unknown em.mode '" + s + "'");
}

std::string proposal_name(ProposalKind p) {
    switch (p) {
        case ProposalKind::linear_sde: return "linear_sde";
        case ProposalKind::durham_gallant: return "durham_gallant";
        case ProposalKind::bootstrap: return "bootstrap";
    }
    return "linear_sde";
}

ProposalKind proposal_from(const std::string& s) {
    if (s == "linear_sde") return ProposalKind::linear_sde;
    if (s == "durham_gallant") return ProposalKind::durham_gallant;
    if (s == "bootstrap") return ProposalKind::bootstrap;
    throw ConfigError("unknown em.proposal '" + s + "'");
}

// Reject keys that the schema does not know about, recursively. model.params
// is free-form (rate constants differ per model).
void check_unknown_keys(const json& user, const json& schema, const std::string& prefix) {
    if (!user.is_object()) return;
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (path == "model.params") continue;
        if (!schema.is_object() || !schema.contains(it.key()))
            throw ConfigError("unknown configuration key '" + path + "'");
        if (it.value().is_object()) check_unknown_keys(it.value(), schema.at(it.key()), path);
    }
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults_for(const std::string& model_name,
                                                const Params& params) {
    ExperimentConfig cfg;
    cfg.model_name = model_name;
    cfg.model_params = params;
    DiffusionModel m = model_zoo(model_name, params);
    cfg.x0 = default_x0(model_name, params);
    cfg.G = Eigen::MatrixXd::Identity(m.dim, m.dim);
    double noise_var = 1e-4;  // sigma_noise = 0.01 for the 1-d models
    if (model_name == "michaelis_menten") noise_var = 1e-10;
    if (model_name == "sir") noise_var = 1e-100;  // clamped on use
    cfg.sigma_noise = noise_var * Eigen::MatrixXd::Identity(m.dim, m.dim);
    if (model_name == "michaelis_menten" || model_name == "sir") {
        cfg.t_final = 60.0;
        cfg.kolmogorov = false;
        cfg.em.mode = EmMode::bayes_t_prior;
    }
    cfg.em.seed = 2;
    return cfg;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    std::string name = "double_well";
    Params params;
    if (j.contains("model")) {
        const auto& jm = j.at("model");
        maybe(jm, "name", name);
        if (jm.contains("params"))
            for (auto it = jm.at("params").begin(); it != jm.at("params").end(); ++it)
                params[it.key()] = it.value().get<double>();
    }
    ExperimentConfig cfg = defaults_for(name, params);
    check_unknown_keys(j, cfg.to_json(), "");

    if (j.contains("grid")) {
        maybe(j.at("grid"), "delta", cfg.delta);
        maybe(j.at("grid"), "t_final", cfg.t_final);
    }
    if (j.contains("x0")) cfg.x0 = io::vector_from_json(j.at("x0"));
    if (j.contains("observation")) {
        const auto& jo = j.at("observation");
        maybe(jo, "stride", cfg.stride);
        if (jo.contains("G")) cfg.G = io::matrix_from_json(jo.at("G"));
        if (jo.contains("sigma_noise"))
            cfg.sigma_noise = io::matrix_from_json(jo.at("sigma_noise"));
        maybe(jo, "seed", cfg.obs_seed);
    }
    maybe(j, "sim_seed", cfg.sim_seed);
    if (j.contains("em")) {
        const auto& je = j.at("em");
        maybe(je, "lambda", cfg.em.lambda);
        maybe(je, "iters", cfg.em.iters);
        maybe(je, "particles", cfg.em.particles);
        maybe(je, "keep", cfg.em.keep);
        if (je.contains("mode")) cfg.em.mode = mode_from(je.at("mode").get<std::string>());
        maybe(je, "hyper_a", cfg.em.hyper_a);
        maybe(je, "hyper_b", cfg.em.hyper_b);
        maybe(je, "jitter", cfg.em.jitter);
        maybe(je, "center_stride", cfg.em.center_stride);
        maybe(je, "kernel_bandwidth", cfg.em.kernel_bandwidth);
        maybe(je, "kernel_amplitude", cfg.em.kernel_amplitude);
        maybe(je, "seed", cfg.em.seed);
        if (je.contains("proposal"))
            cfg.em.smc.proposal = proposal_from(je.at("proposal").get<std::string>());
        maybe(je, "ess_threshold_frac", cfg.em.smc.ess_threshold_frac);
        maybe(je, "early_stop", cfg.em.early_stop);
        maybe(je, "early_stop_tol", cfg.em.early_stop_tol);
        maybe(je, "early_stop_patience", cfg.em.early_stop_patience);
    }
    if (j.contains("eval")) {
        const auto& jv = j.at("eval");
        maybe(jv, "resolution", cfg.eval_resolution);
        maybe(jv, "lattice_resolution", cfg.lattice_resolution);
        maybe(jv, "stationary_t", cfg.stationary_t);
        maybe(jv, "kolmogorov", cfg.kolmogorov);
        maybe(jv, "seed", cfg.eval_seed);
    }
    maybe(j, "output_dir", cfg.output_dir);
    maybe(j, "dump_particles", cfg.dump_particles);

    if (cfg.delta <= 0.0 || cfg.t_final <= 0.0)
        throw ConfigError("grid.delta and grid.t_final must be positive");
    if (cfg.stride < 1) throw ConfigError("observation.stride must be >= 1");
    if (cfg.em.iters < 1) throw ConfigError("em.iters must be >= 1");
    if (cfg.em.particles < 2) throw ConfigError("em.particles must be >= 2");
    if (cfg.em.keep < 1) throw ConfigError("em.keep must be >= 1");
    if (cfg.em.lambda <= 0.0) throw ConfigError("em.lambda must be positive");
    if (cfg.em.hyper_a <= 0.0 || cfg.em.hyper_b <= 0.0)
        throw ConfigError("em.hyper_a and em.hyper_b must be positive");
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    return from_json(io::read_json_file(path));
}

json ExperimentConfig::to_json() const {
    json j;
    j["model"] = {{"name", model_name}, {"params", json::object()}};
    for (const auto& [k, v] : model_params) j["model"]["params"][k] = v;
    j["grid"] = {{"delta", delta}, {"t_final", t_final}};
    j["x0"] = io::vector_to_json(x0);
    j["observation"] = {{"stride", stride},
                        {"G", io::matrix_to_json(G)},
                        {"sigma_noise", io::matrix_to_json(sigma_noise)},
                        {"seed", obs_seed}};
    j["sim_seed"] = sim_seed;
    j["em"] = {{"lambda", em.lambda},
               {"iters", em.iters},
               {"particles", em.particles},
               {"keep", em.keep},
               {"mode", mode_name(em.mode)},
               {"hyper_a", em.hyper_a},
               {"hyper_b", em.hyper_b},
               {"jitter", em.jitter},
               {"center_stride", em.center_stride},
               {"kernel_bandwidth", em.kernel_bandwidth},
               {"kernel_amplitude", em.kernel_amplitude},
               {"seed", em.seed},
               {"proposal", proposal_name(em.smc.proposal)},
               {"ess_threshold_frac", em.smc.ess_threshold_frac},
               {"early_stop", em.early_stop},
               {"early_stop_tol", em.early_stop_tol},
               {"early_stop_patience", em.early_stop_patience}};
    j["eval"] = {{"resolution", eval_resolution},
                 {"lattice_resolution", lattice_resolution},
                 {"stationary_t", stationary_t},
                 {"kolmogorov", kolmogorov},
                 {"seed", eval_seed}};
    j["output_dir"] = output_dir;
    j["dump_particles"] = dump_particles;
    return j;
}

void ExperimentConfig::override_seeds(std::uint64_t n) {
    sim_seed = obs_seed = em.seed = eval_seed = n;
}

TimeGrid ExperimentConfig::grid() const {
    return {delta, static_cast<int>(std::llround(t_final / delta))};
}

DiffusionModel ExperimentConfig::model() const { return model_zoo(model_name, model_params); }

namespace {

std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>> trajectory_box(
    const LatentPath* latent) {
    if (!latent) return std::nullopt;
    return std::make_pair(Eigen::VectorXd(latent->states.rowwise().minCoeff()),
                          Eigen::VectorXd(latent->states.rowwise().maxCoeff()));
}

void write_drift_plot(const std::string& file, const Eigen::MatrixXd& grid,
                      const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& truth,
                      const DriftFunction& fitted) {
    std::ofstream out(file);
    const int d = static_cast<int>(grid.rows());
    for (int k = 0; k < d; ++k) out << "x" << k << ",";
    for (int k = 0; k < d; ++k) out << "b" << k << ",";
    for (int k = 0; k < d; ++k) out << "bhat" << k << (k + 1 < d ? "," : "\n");
    for (Eigen::Index i = 0; i < grid.cols(); ++i) {
        Eigen::VectorXd t = truth(grid.col(i)), f = fitted(grid.col(i));
        for (int k = 0; k < d; ++k) out << io::format_double(grid(k, i)) << ",";
        for (int k = 0; k < d; ++k) out << io::format_double(t[k]) << ",";
        for (int k = 0; k < d; ++k)
            out << io::format_double(f[k]) << (k + 1 < d ? "," : "\n");
    }
}

void write_cdf_plot(const std::string& file, const KolmogorovResult& kr) {
    std::ofstream out(file);
    out << "x,F,Fhat\n";
    std::vector<double> pooled = kr.samples_true;
    pooled.insert(pooled.end(), kr.samples_fitted.begin(), kr.samples_fitted.end());
    std::sort(pooled.begin(), pooled.end());
    EmpiricalCdf f1(kr.samples_true), f2(kr.samples_fitted);
    const std::size_t step = std::max<std::size_t>(1, pooled.size() / 4096);
    for (std::size_t i = 0; i < pooled.size(); i += step)
        out << io::format_double(pooled[i]) << "," << io::format_double(f1(pooled[i])) << ","
            << io::format_double(f2(pooled[i])) << "\n";
}

}  // namespace

EvalReport evaluate_drift(const ExperimentConfig& config, const DriftFunction& fitted,
                          const LatentPath* latent_for_box) {
    const DiffusionModel model = config.model();
    const bool one_d = model.dim == 1;
    EvalReport report;
    report.eval_grid = evaluation_grid(config.model_name,
                                       one_d ? config.eval_resolution : config.lattice_resolution,
                                       trajectory_box(latent_for_box));
    report.mse = drift_mse([&fitted](const Eigen::VectorXd& x) { return fitted(x); },
                           model.drift, report.eval_grid);
    report.stationary_seed = config.eval_seed;
    if (one_d && config.kolmogorov) {
        StationarySimConfig sc;
        sc.t_final = config.stationary_t;
        sc.delta = config.delta;
        sc.seed_true = config.eval_seed;
        sc.seed_fitted = config.eval_seed;
        sc.x0 = config.x0;
        KolmogorovResult kr = kolmogorov_metric(fitted, model, sc);
        report.kolmogorov = kr.value;
        report.kolmogorov_diverged = kr.diverged;
        report.n_stationary_samples = kr.n_samples;
    }
    return report;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    const DiffusionModel model = config.model();
    const TimeGrid grid = config.grid();
    fs::create_directories(config.output_dir);
    const fs::path out(config.output_dir);

    io::write_text((out / "config.resolved.json").string(), config.to_json().dump(2) + "\n");

    LatentPath latent = simulate(model, grid, config.x0, config.sim_seed);
    io::write_path_csv((out / "latent.csv").string(), latent);
    ObservationSet obs = observe(latent, config.stride, config.G, config.sigma_noise,
                                 config.obs_seed);
    io::write_observations_csv((out / "observations.csv").string(), obs, grid);
    io::write_observations_meta((out / "observations.meta.json").string(), obs, grid,
                                config.obs_seed);

    return fit_and_evaluate(config, obs, grid, true, &latent);
}

ExperimentResult fit_and_evaluate(const ExperimentConfig& config, const ObservationSet& obs,
                                  const TimeGrid& grid, bool write_outputs,
                                  const LatentPath* latent_for_box) {
    const DiffusionModel model = config.model();
    const fs::path out(config.output_dir);

    ExperimentResult result;
    auto [drift, trace] = run_em(obs, model, grid, config.x0, config.em);
    result.drift = std::move(drift);
    result.trace = std::move(trace);

    if (config.dump_particles) {
        // one extra filter pass under the final drift for diagnostics
        SMCConfig sc = config.em.smc;
        sc.particles = config.em.particles;
        ParticleEnsemble ens =
            smc_filter(DriftField::from(result.drift), model, obs, grid, config.x0, sc,
                       rng::derive_key(config.em.seed, rng::tag::propagate, 0xE0,
                                       static_cast<std::uint64_t>(config.em.iters) + 1));
        io::write_particles((out / "particles").string(), ens);
    }

    result.report = evaluate_drift(config, result.drift, latent_for_box);

    if (write_outputs) {
        fs::create_directories(out);
        io::write_drift((out / "drift.json").string(), result.drift);
        io::write_trace_csv((out / "trace.csv").string(), result.trace);
        io::write_eval_report((out / "eval.json").string(), result.report);
        write_drift_plot((out / "plot_drift.csv").string(), result.report.eval_grid,
                         model.drift, result.drift);
        if (model.dim == 1 && config.kolmogorov && !result.report.kolmogorov_diverged) {
            StationarySimConfig sc;
            sc.t_final = config.stationary_t;
            sc.delta = config.delta;
            sc.seed_true = config.eval_seed;
            sc.seed_fitted = config.eval_seed;
            sc.x0 = config.x0;
            write_cdf_plot((out / "plot_cdf.csv").string(),
                           kolmogorov_metric(result.drift, model, sc));
        }
    }
    return result;
}

ReproduceRow reproduce_table1(const std::string& row, int stride, int n_seeds,
                              int center_stride) {
    std::string model_name;
    if (row == "model1")
        model_name = "double_well";
    else if (row == "model2")
        model_name = "double_well_variant";
    else if (row == "model3")
        model_name = "gamma";
    else
        throw ConfigError("reproduce: unknown table1 row '" + row + "' "
                          "(expected model1, model2 or model3)");

    ReproduceRow result;
    result.row = row;
    result.stride = stride;
    result.seeds = n_seeds;
    result.mse.assign(n_seeds, 0.0);
    result.kolmogorov.assign(n_seeds, 0.0);

    parallel_for(n_seeds, [&](int s) {
        ExperimentConfig cfg = ExperimentConfig::defaults_for(model_name);
        cfg.stride = stride;
        cfg.em.mode = EmMode::bayes_t_prior;
        cfg.em.center_stride = center_stride;
        cfg.override_seeds(static_cast<std::uint64_t>(s));
        const TimeGrid grid = cfg.grid();
        const DiffusionModel model = cfg.model();
        LatentPath latent = simulate(model, grid, cfg.x0, cfg.sim_seed);
        ObservationSet obs = observe(latent, cfg.stride, cfg.G, cfg.sigma_noise, cfg.obs_seed);
        auto [drift, trace] = run_em(obs, model, grid, cfg.x0, cfg.em);
        (void)trace;
        EvalReport rep = evaluate_drift(cfg, drift, &latent);
        result.mse[s] = rep.mse;
        result.kolmogorov[s] = rep.kolmogorov.value_or(1.0);
    });

    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    result.median_mse = median(result.mse);
    result.median_kolmogorov = median(result.kolmogorov);
    return result;
}

}  // namespace driftforge
