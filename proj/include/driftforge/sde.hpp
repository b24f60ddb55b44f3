#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace driftforge {

using Params = std::map<std::string, double>;

// Uniform latent time grid s_n = n * delta, n = 0..n_steps.
struct TimeGrid {
    double delta = 0.025;
    int n_steps = 0;

    double time(int n) const { return n * delta; }
    double horizon() const { return n_steps * delta; }
    int size() const { return n_steps + 1; }
};

struct LatentPath {
    TimeGrid grid;
    Eigen::MatrixXd states;  // d x (n_steps + 1), column n = X(s_n)
};

// Sparse observations y_m = G x(s_{n_m}) + eps, eps ~ N(0, sigma_noise).
struct ObservationSet {
    std::vector<int> indices;     // strictly increasing, in 1..n_steps
    Eigen::MatrixXd values;       // d0 x M, column m = y_m
    Eigen::MatrixXd G;            // d0 x d
    Eigen::MatrixXd sigma_noise;  // d0 x d0, s.p.d.
};

struct DiffusionModel {
    int dim = 1;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> drift;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> diffusion;  // sigma(x)
    // optional post-step projection (e.g. reflection for positivity)
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> constrain;
    std::string name;

    Eigen::MatrixXd a(const Eigen::VectorXd& x) const {
        Eigen::MatrixXd s = diffusion(x);
        return s * s.transpose();
    }
};

// Euler-Maruyama: X(s_{n+1}) = X(s_n) + b(X(s_n)) d + sigma(X(s_n)) xi sqrt(d).
// Deterministic given the seed. Throws SimulationDivergedError (with the step
// index) if a state goes non-finite.
LatentPath simulate(const DiffusionModel& model, const TimeGrid& grid,
                    const Eigen::VectorXd& x0, std::uint64_t seed);

// Take every stride-th grid point starting at index `stride` (x0 is known and
// never observed) and add Gaussian noise. Variances below 1e-30 are clamped
// (and the clamp logged) to keep Gaussian log-densities representable.
ObservationSet observe(const LatentPath& path, int stride, const Eigen::MatrixXd& G,
                       const Eigen::MatrixXd& sigma_noise, std::uint64_t seed);

Eigen::MatrixXd clamp_noise_covariance(Eigen::MatrixXd sigma);

// Sum of transition Gaussian log-densities along the path; x0 is treated as
// known (point mass) and contributes nothing.
double path_log_density(const LatentPath& path, const DiffusionModel& model);

// Benchmark models. Names: double_well, double_well_variant, gamma,
// michaelis_menten, sir. Unspecified params take the documented defaults.
DiffusionModel model_zoo(const std::string& name, const Params& params = {});

// Conventional starting point for each benchmark model.
Eigen::VectorXd default_x0(const std::string& name, const Params& params = {});

// Unnormalized stationary densities of the 1-d models (closed forms).
double stationary_density(const std::string& name, const Params& params, double x);

}  // namespace driftforge
