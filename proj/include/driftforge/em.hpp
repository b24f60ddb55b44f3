#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "driftforge/kernel.hpp"
#include "driftforge/rng.hpp"
#include "driftforge/sde.hpp"
#include "driftforge/smc.hpp"

namespace driftforge {

enum class EmMode { penalized, bayes_t_prior };

struct EMConfig {
    double lambda = 1.0;      // ridge on the RKHS norm (penalized mode)
    int iters = 15;           // K
    int particles = 6;        // L (filter size)
    int keep = 3;             // L_keep (top-weight paths passed to the M-step)
    EmMode mode = EmMode::penalized;
    double hyper_a = 1.0;     // inverse-gamma shape (Bayes mode)
    double hyper_b = 0.1;     // inverse-gamma scale (Bayes mode)
    double jitter = 1e-10;    // base jitter, relative to trace(Kc)/J
    int center_stride = 1;    // keep every j-th grid slot as a kernel center
    double kernel_bandwidth = 2.0;
    double kernel_amplitude = 10.0;
    std::uint64_t seed = 0;
    SMCConfig smc{};          // proposal kind / ESS threshold; L is taken from `particles`
    bool early_stop = false;  // stop when drift_delta < tol for `patience` iters
    double early_stop_tol = 1e-4;
    int early_stop_patience = 3;
};

// Normal-equations data assembled from a particle ensemble (Gram matrices
// over retained centers, weighted increments). When a(x) = alpha(x) I at
// every retained state, the block system decouples coordinate-wise and only
// scalar weights are stored; otherwise the d x d blocks are kept.
struct MStepSystem {
    Kernel kernel;
    double delta = 0.0;
    double lambda = 1.0;
    double jitter = 1e-10;
    Eigen::MatrixXd centers;       // d x J (kept kernel centers)
    Eigen::MatrixXd eval_points;   // d x N (states the loss evaluates b at)
    Eigen::MatrixXd increments;    // d x N (theta, aligned with eval_points)
    Eigen::MatrixXd gram_eval;     // N x J  k0(eval_i, center_j)
    Eigen::MatrixXd gram_centers;  // J x J
    bool isotropic = true;
    Eigen::VectorXd w_scalar;              // N, w_l / alpha_i (isotropic case)
    std::vector<Eigen::MatrixXd> w_blocks; // N blocks w_l a^{-1} (general case)
    Eigen::VectorXd logdet_a;              // N, log det a(x_i)
};

struct EMTraceRecord {
    int iter;
    double risk;         // weighted residual quadratic / delta + lambda |b|^2_K
    double coef_norm;    // Frobenius norm of the coefficient matrix
    double drift_delta;  // RMS change of the drift on an evaluation subsample
    double min_ess;
    int resample_count;
};

struct EMTrace {
    std::vector<EMTraceRecord> records;
};

// Build the M-step system from the top-`keep` weight paths (ties broken by
// particle index), with weights renormalized over the retained set.
MStepSystem assemble_system(const ParticleEnsemble& ensemble,
                            const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& a_fn,
                            const Kernel& kernel, const EMConfig& config);

// Closed-form M-step: solve (delta K^T W K + lambda Kc + jitter I) beta = K^T W theta.
DriftFunction solve_m_step(const MStepSystem& system);

// Bayesian variant: ridge replaced by diag(1 / scales) (x) I_d.
DriftFunction solve_m_step_bayes(const MStepSystem& system, const Eigen::VectorXd& scales);

// Draw per-center shrinkage scales from IG(a + d/2, b + k0(u,u) |beta_j|^2 / 2).
Eigen::VectorXd update_scales(const DriftFunction& drift, double hyper_a, double hyper_b,
                              rng::Stream& stream);

// The surrogate risk the M-step minimizes (up to an additive constant):
// sum_i w_i (theta_i - b_i delta)^T a_i^{-1} (theta_i - b_i delta) / delta
// + lambda |b|^2_K.
double m_step_risk(const MStepSystem& system, const DriftFunction& drift);

// Full EM driver: SMC E-step under the current iterate, closed-form M-step
// (penalized or Bayesian with per-iteration scale draws). Deterministic
// given config.seed.
std::pair<DriftFunction, EMTrace> run_em(const ObservationSet& obs, const DiffusionModel& model,
                                         const TimeGrid& grid, const Eigen::VectorXd& x0,
                                         const EMConfig& config,
                                         const DriftFunction& init = {});

}  // namespace driftforge
