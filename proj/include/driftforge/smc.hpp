#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "driftforge/kernel.hpp"
#include "driftforge/rng.hpp"
#include "driftforge/sde.hpp"

namespace driftforge {

// One-step Gaussian proposal N(x | x_prev + mu*delta, S*delta).
struct ProposalMoments {
    Eigen::VectorXd mu;
    Eigen::MatrixXd S;
};

// Linear-SDE bridge moments at a horizon t: mean mu02 and covariance S02 of
// the first-order approximation of X(s+t) - X(s) around x_prev.
struct BridgeMoments {
    Eigen::VectorXd mu02;
    Eigen::MatrixXd S02;
    double horizon = 0.0;
};

struct ResampleEvent {
    int obs_index;  // ordinal m of the observation (0-based)
    double ess;
    bool resampled;
};

struct ParticleEnsemble {
    TimeGrid grid;
    std::vector<Eigen::MatrixXd> paths;  // L matrices, d x (n_steps+1)
    Eigen::VectorXd log_weights;         // final unnormalized log-weights
    Eigen::VectorXd weights;             // normalized, sums to 1
    std::vector<ResampleEvent> resample_log;
};

enum class ProposalKind { linear_sde, durham_gallant, bootstrap };

struct SMCConfig {
    int particles = 6;                // L
    double ess_threshold_frac = 0.5;  // resample when ESS <= frac * L
    ProposalKind proposal = ProposalKind::linear_sde;
    double cond_limit = 1e8;          // closed-form vs ODE switch
    double cov_floor = 1e-12;         // proposal covariance eigenvalue floor
};

// Moments of the linear SDE dZ = (b + Db Z) dt + sigma dW, Z(0) = 0, at the
// given horizon, where b, Db, sigma are frozen at x_prev. Closed forms
// (matrix exponential + Kronecker-sum solve) when Db is well conditioned,
// otherwise fixed-step RK4 on the moment ODEs with step min(max_ode_step,
// horizon/8).
BridgeMoments linear_bridge_moments(const DriftField& drift, const Eigen::MatrixXd& a,
                                    const Eigen::VectorXd& x_prev, double horizon,
                                    double max_ode_step = 0.025, double cond_limit = 1e8);

// Same, with the drift jet (b, Db) already evaluated.
BridgeMoments linear_bridge_moments_jet(const Eigen::VectorXd& b, const Eigen::MatrixXd& db,
                                        const Eigen::MatrixXd& a, double horizon,
                                        double max_ode_step = 0.025, double cond_limit = 1e8);

// RK4 integration of the moment ODEs (reference branch / fallback).
BridgeMoments bridge_moments_ode(const Eigen::VectorXd& b, const Eigen::MatrixXd& db,
                                 const Eigen::MatrixXd& a, double horizon, double step);

// One-step proposal conditioning on the next observation: mean/covariance of
// q(x_i | x_{i-1}, y_next) from the Gaussian bridge plug-in. S is symmetrized
// and eigenvalue-floored before use.
ProposalMoments proposal_moments(const DriftField& drift, const Eigen::MatrixXd& a,
                                 const Eigen::VectorXd& x_prev, const Eigen::VectorXd& y_next,
                                 const Eigen::MatrixXd& G, const Eigen::MatrixXd& sigma_noise,
                                 double delta, double gap_horizon,
                                 double max_ode_step = 0.025, double cond_limit = 1e8,
                                 double cov_floor = 1e-12);

// Modified diffusion bridge of Durham-Gallant (noise-free target pinning).
ProposalMoments durham_gallant_moments(const Eigen::MatrixXd& a, const Eigen::VectorXd& x_prev,
                                       const Eigen::VectorXd& x_target, double s_i,
                                       double s_prev, double s_target);

// Effective sample size from unnormalized log-weights (max-shift stabilized).
double ess(const Eigen::VectorXd& log_weights);

// Systematic resampling; returns the selected ancestor indices.
std::vector<int> systematic_resample(const Eigen::VectorXd& weights, rng::Stream& stream);

// Gaussian conditioning: V|Z=z ~ N(Gz + g, Q), Z ~ N(f, P); returns the
// posterior mean and covariance of Z given V = v.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> gaussian_condition(
    const Eigen::MatrixXd& G, const Eigen::MatrixXd& Q, const Eigen::MatrixXd& P,
    const Eigen::VectorXd& f, const Eigen::VectorXd& g, const Eigen::VectorXd& v);

// Particle filter over latent paths given sparse observations. `drift` is
// the current drift iterate (it defines both the latent transition density
// and the proposal); `model` supplies the diffusion coefficient only. All
// particles start at the known x0. Particle propagation within a block is
// parallel; per-(particle, block) RNG streams make the result independent of
// scheduling and identical to the serial reference.
ParticleEnsemble smc_filter(const DriftField& drift, const DiffusionModel& model,
                            const ObservationSet& obs, const TimeGrid& grid,
                            const Eigen::VectorXd& x0, const SMCConfig& config,
                            std::uint64_t seed);

}  // namespace driftforge
