#pragma once

#include <nlohmann/json_fwd.hpp>

#include <string>

#include "driftforge/em.hpp"
#include "driftforge/eval.hpp"
#include "driftforge/sde.hpp"

namespace driftforge {

// Single-file experiment description. Every field has a default; parsing is
// strict (unknown keys are configuration errors) and the resolved form with
// all defaults materialized is written next to the run outputs.
struct ExperimentConfig {
    std::string model_name = "double_well";
    Params model_params;

    double delta = 0.025;
    double t_final = 40.0;
    Eigen::VectorXd x0;           // default: model-specific starting point

    int stride = 5;
    Eigen::MatrixXd G;            // default: identity
    Eigen::MatrixXd sigma_noise;  // default: model-specific
    std::uint64_t sim_seed = 0;
    std::uint64_t obs_seed = 1;

    EMConfig em;                  // em.seed defaults to 2

    int eval_resolution = 200;    // 1-d grid points
    int lattice_resolution = 10;  // per-dimension lattice for multivariate models
    double stationary_t = 2000.0;
    bool kolmogorov = true;       // ignored (off) for multivariate models
    std::uint64_t eval_seed = 3;

    std::string output_dir = "out";
    bool dump_particles = false;

    static ExperimentConfig defaults_for(const std::string& model_name,
                                         const Params& params = {});
    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig from_file(const std::string& path);
    nlohmann::json to_json() const;

    // Set every stage seed (simulate / observe / smc / bayes / eval) to n.
    void override_seeds(std::uint64_t n);

    TimeGrid grid() const;
    DiffusionModel model() const;
};

struct ExperimentResult {
    DriftFunction drift;
    EMTrace trace;
    EvalReport report;
};

// simulate -> observe -> fit -> evaluate -> write artifacts. Returns the
// in-memory results; files land in config.output_dir.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Pieces used by the CLI subcommands.
ExperimentResult fit_and_evaluate(const ExperimentConfig& config, const ObservationSet& obs,
                                  const TimeGrid& grid, bool write_outputs,
                                  const LatentPath* latent_for_box);
EvalReport evaluate_drift(const ExperimentConfig& config, const DriftFunction& fitted,
                          const LatentPath* latent_for_box);

struct ReproduceRow {
    std::string row;    // model1 | model2 | model3
    int stride = 5;
    int seeds = 10;
    double median_mse = 0.0;
    double median_kolmogorov = 0.0;
    std::vector<double> mse;
    std::vector<double> kolmogorov;
};

// Re-run one benchmark-table cell across seeds (worker pool over seeds) and
// report per-seed and median metrics.
ReproduceRow reproduce_table1(const std::string& row, int stride, int n_seeds,
                              int center_stride = 3);

}  // namespace driftforge
