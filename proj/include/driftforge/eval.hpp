#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "driftforge/kernel.hpp"
#include "driftforge/sde.hpp"

namespace driftforge {

// Right-continuous empirical CDF over a fixed sample.
class EmpiricalCdf {
  public:
    explicit EmpiricalCdf(std::vector<double> samples);
    double operator()(double x) const;  // #{samples <= x} / n
    const std::vector<double>& sorted() const { return sorted_; }

  private:
    std::vector<double> sorted_;
};

// sup_x |F1(x) - F2(x)| evaluated over the pooled sample points.
double ks_distance(const EmpiricalCdf& f1, const EmpiricalCdf& f2);

// Mean squared pointwise error over an evaluation grid (columns are points).
double drift_mse(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& fitted,
                 const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& truth,
                 const Eigen::MatrixXd& grid);

// Standard evaluation grids: 200 uniform points on [-2.5, 2.5] for the 1-d
// models ([0.2, 4] for the gamma model); a per-dimension uniform lattice over
// the supplied bounding box for the multivariate models.
Eigen::MatrixXd evaluation_grid(const std::string& model_name, int resolution,
                                const std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>>&
                                    bounding_box = std::nullopt);

struct StationarySimConfig {
    double t_final = 2000.0;
    double delta = 0.025;
    double burn_fraction = 0.1;
    std::uint64_t seed_true = 0;
    std::uint64_t seed_fitted = 0;  // same seed pairs the noise (self-distance is 0)
    Eigen::VectorXd x0;
};

struct KolmogorovResult {
    double value = 0.0;
    bool diverged = false;
    int n_samples = 0;
    std::vector<double> samples_true;    // sorted post-burn-in samples
    std::vector<double> samples_fitted;
};

// Kolmogorov metric between the empirical stationary CDFs of the true SDE and
// the SDE with its drift replaced by `fitted` (same diffusion). A divergent
// fitted-SDE simulation reports value 1.0 with the flag set. 1-d models only.
KolmogorovResult kolmogorov_metric(const DriftFunction& fitted, const DiffusionModel& true_model,
                                   const StationarySimConfig& config);

struct EvalReport {
    double mse = 0.0;
    std::optional<double> kolmogorov;
    bool kolmogorov_diverged = false;
    int n_stationary_samples = 0;
    Eigen::MatrixXd eval_grid;
    std::uint64_t stationary_seed = 0;
};

}  // namespace driftforge
