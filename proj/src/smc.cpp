#include "driftforge/smc.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "driftforge/errors.hpp"
#include "driftforge/linalg.hpp"
#include "driftforge/parallel.hpp"

namespace driftforge {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Eigen::MatrixXd unvec(const Eigen::VectorXd& v, Eigen::Index d) {
    return Eigen::Map<const Eigen::MatrixXd>(v.data(), d, d);
}

Eigen::VectorXd vec(const Eigen::MatrixXd& m) {
    return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

}  // namespace

BridgeMoments bridge_moments_ode(const Eigen::VectorXd& b, const Eigen::MatrixXd& db,
                                 const Eigen::MatrixXd& a, double horizon, double step) {
    const Eigen::Index d = b.size();
    BridgeMoments out{Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, d), horizon};
    if (horizon <= 0.0) return out;
    int n_steps = std::max(1, static_cast<int>(std::ceil(horizon / step)));
    const double h = horizon / n_steps;
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(d, d);
    auto fmu = [&](const Eigen::VectorXd& m) -> Eigen::VectorXd { return b + db * m; };
    auto fs = [&](const Eigen::MatrixXd& v) -> Eigen::MatrixXd {
        return db * v + v * db.transpose() + a;
    };
    for (int i = 0; i < n_steps; ++i) {
        Eigen::VectorXd k1 = fmu(mu);
        Eigen::VectorXd k2 = fmu(mu + 0.5 * h * k1);
        Eigen::VectorXd k3 = fmu(mu + 0.5 * h * k2);
        Eigen::VectorXd k4 = fmu(mu + h * k3);
        Eigen::MatrixXd m1 = fs(s);
        Eigen::MatrixXd m2 = fs(s + 0.5 * h * m1);
        Eigen::MatrixXd m3 = fs(s + 0.5 * h * m2);
        Eigen::MatrixXd m4 = fs(s + h * m3);
        mu += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        s += h / 6.0 * (m1 + 2.0 * m2 + 2.0 * m3 + m4);
    }
    out.mu02 = mu;
    out.S02 = 0.5 * (s + s.transpose());
    return out;
}

BridgeMoments linear_bridge_moments_jet(const Eigen::VectorXd& b, const Eigen::MatrixXd& db,
                                        const Eigen::MatrixXd& a, double horizon,
                                        double max_ode_step, double cond_limit) {
    const Eigen::Index d = b.size();
    if (!db.allFinite() || !b.allFinite())
        throw InvalidInputError("linear_bridge_moments: non-finite drift jet");
    BridgeMoments out{Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, d), horizon};
    if (horizon <= 0.0) return out;

    auto phi_mu = phi1_matrix(db, horizon, cond_limit);
    // Kronecker-sum route only for d <= 4 (d^2 x d^2 system); ODE beyond.
    std::optional<Eigen::MatrixXd> phi_s;
    if (d <= 4) phi_s = phi1_matrix(kron_sum(db, db), horizon, cond_limit);
    if (!phi_mu || !phi_s) {
        double step = std::min(max_ode_step, horizon / 8.0);
        return bridge_moments_ode(b, db, a, horizon, step);
    }
    out.mu02 = (*phi_mu) * b;
    out.S02 = unvec((*phi_s) * vec(a), d);
    out.S02 = 0.5 * (out.S02 + out.S02.transpose()).eval();
    return out;
}

BridgeMoments linear_bridge_moments(const DriftField& drift, const Eigen::MatrixXd& a,
                                    const Eigen::VectorXd& x_prev, double horizon,
                                    double max_ode_step, double cond_limit) {
    if (horizon < 0.0) throw InvalidInputError("linear_bridge_moments: negative horizon");
    return linear_bridge_moments_jet(drift.eval(x_prev), drift.jacobian(x_prev), a, horizon,
                                     max_ode_step, cond_limit);
}

namespace {

ProposalMoments proposal_from_bridge(const Eigen::VectorXd& b, const BridgeMoments& bm,
                                     const Eigen::MatrixXd& a, const Eigen::VectorXd& x_prev,
                                     const Eigen::VectorXd& y_next, const Eigen::MatrixXd& G,
                                     const Eigen::MatrixXd& sigma_noise, double delta,
                                     double cov_floor) {
    const Eigen::Index d = x_prev.size();
    Eigen::MatrixXd psi = sigma_noise + G * bm.S02 * G.transpose() +
                          delta * G * a * G.transpose();
    Eigen::LDLT<Eigen::MatrixXd> fac(psi);
    if (fac.info() != Eigen::Success || !fac.isPositive())
        throw NumericalSingularityError("proposal_moments: psi matrix is singular");
    // S = a [I - G^T psi^{-1} G delta a]
    Eigen::MatrixXd ga = G * a;  // d0 x d
    Eigen::MatrixXd s = a - a * G.transpose() * fac.solve(ga) * delta;
    s = floor_spd(s, cov_floor);
    Eigen::VectorXd innov = y_next - G * (x_prev + bm.mu02 + b * delta);
    Eigen::VectorXd mu = b + a * G.transpose() * fac.solve(innov);
    (void)d;
    return {std::move(mu), std::move(s)};
}

}  // namespace

ProposalMoments proposal_moments(const DriftField& drift, const Eigen::MatrixXd& a,
                                 const Eigen::VectorXd& x_prev, const Eigen::VectorXd& y_next,
                                 const Eigen::MatrixXd& G, const Eigen::MatrixXd& sigma_noise,
                                 double delta, double gap_horizon, double max_ode_step,
                                 double cond_limit, double cov_floor) {
    if (gap_horizon < 0.0) throw InvalidInputError("proposal_moments: negative gap horizon");
    Eigen::VectorXd b = drift.eval(x_prev);
    BridgeMoments bm = linear_bridge_moments_jet(b, drift.jacobian(x_prev), a, gap_horizon,
                                                 max_ode_step, cond_limit);
    return proposal_from_bridge(b, bm, a, x_prev, y_next, G, sigma_noise, delta, cov_floor);
}

ProposalMoments durham_gallant_moments(const Eigen::MatrixXd& a, const Eigen::VectorXd& x_prev,
                                       const Eigen::VectorXd& x_target, double s_i,
                                       double s_prev, double s_target) {
    const double span = s_target - s_prev;
    if (span <= 0.0) throw InvalidInputError("durham_gallant_moments: zero time gap");
    if (!(s_prev < s_i && s_i <= s_target))
        throw InvalidInputError("durham_gallant_moments: require s_prev < s_i <= s_target");
    ProposalMoments pm;
    pm.mu = (x_target - x_prev) / span;
    pm.S = ((s_target - s_i) / span) * a;
    return pm;
}

double ess(const Eigen::VectorXd& log_weights) {
    const double m = log_weights.maxCoeff();
    if (!std::isfinite(m)) return 0.0;
    double sum = 0.0, sum2 = 0.0;
    for (Eigen::Index l = 0; l < log_weights.size(); ++l) {
        double w = std::exp(log_weights[l] - m);
        sum += w;
        sum2 += w * w;
    }
    return sum * sum / sum2;
}

std::vector<int> systematic_resample(const Eigen::VectorXd& weights, rng::Stream& stream) {
    const int n = static_cast<int>(weights.size());
    std::vector<int> idx(n);
    const double u0 = stream.uniform() / n;
    double acc = weights[0];
    int j = 0;
    for (int i = 0; i < n; ++i) {
        const double u = u0 + static_cast<double>(i) / n;
        while (u > acc && j + 1 < n) acc += weights[++j];
        idx[i] = j;
    }
    return idx;
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> gaussian_condition(
    const Eigen::MatrixXd& G, const Eigen::MatrixXd& Q, const Eigen::MatrixXd& P,
    const Eigen::VectorXd& f, const Eigen::VectorXd& g, const Eigen::VectorXd& v) {
    Eigen::MatrixXd m = Q + G * P * G.transpose();
    Eigen::LDLT<Eigen::MatrixXd> fac(m);
    if (fac.info() != Eigen::Success || !fac.isPositive())
        throw NumericalSingularityError("gaussian_condition: Q + G P G^T is singular");
    Eigen::MatrixXd gp = G * P;                           // d0 x d1
    Eigen::MatrixXd k = fac.solve(gp).transpose();        // d1 x d0
    Eigen::VectorXd mean = f + k * (v - g - G * f);
    Eigen::MatrixXd cov = P - k * gp;
    return {std::move(mean), Eigen::MatrixXd(0.5 * (cov + cov.transpose()))};
}

ParticleEnsemble smc_filter(const DriftField& drift, const DiffusionModel& model,
                            const ObservationSet& obs, const TimeGrid& grid,
                            const Eigen::VectorXd& x0, const SMCConfig& config,
                            std::uint64_t seed) {
    if (config.particles < 2) throw InvalidInputError("smc_filter: need at least 2 particles");
    if (obs.indices.empty()) throw InvalidInputError("smc_filter: no observations");
    const int L = config.particles;
    const int d = model.dim;
    const int d0 = static_cast<int>(obs.G.rows());
    const double delta = grid.delta;
    if (config.proposal == ProposalKind::durham_gallant && d0 != d)
        throw InvalidInputError("smc_filter: Durham-Gallant proposal needs full observations");

    ParticleEnsemble ens;
    ens.grid = grid;
    ens.paths.assign(L, Eigen::MatrixXd(d, grid.size()));
    for (auto& p : ens.paths) p.col(0) = x0;
    ens.log_weights = Eigen::VectorXd::Zero(L);

    Eigen::VectorXd block_delta(L);  // log rho + log f - log q per particle
    const int m_total = static_cast<int>(obs.indices.size());
    rng::Stream resample_stream(rng::derive_key(seed, rng::tag::resample));

    for (int m = 0; m < m_total; ++m) {
        const int n_lo = m == 0 ? 0 : obs.indices[m - 1];
        const int n_hi = obs.indices[m];
        const Eigen::VectorXd y = obs.values.col(m);

        parallel_for(L, [&](int l) {
            rng::Stream stream(rng::derive_key(seed, rng::tag::propagate, l, m));
            Eigen::MatrixXd& path = ens.paths[l];
            double lf = 0.0, lq = 0.0;
            Eigen::VectorXd xi(d);
            for (int i = n_lo + 1; i <= n_hi; ++i) {
                const Eigen::VectorXd x_prev = path.col(i - 1);
                const Eigen::VectorXd b = drift.eval(x_prev);
                const Eigen::MatrixXd a = model.a(x_prev);
                ProposalMoments pm;
                switch (config.proposal) {
                    case ProposalKind::bootstrap:
                        pm = {b, a};
                        break;
                    case ProposalKind::durham_gallant:
                        pm = durham_gallant_moments(a, x_prev, y, grid.time(i),
                                                    grid.time(i - 1), grid.time(n_hi));
                        break;
                    case ProposalKind::linear_sde: {
                        BridgeMoments bm = linear_bridge_moments_jet(
                            b, drift.jacobian(x_prev), a, (n_hi - i) * delta, delta,
                            config.cond_limit);
                        pm = proposal_from_bridge(b, bm, a, x_prev, y, obs.G,
                                                  obs.sigma_noise, delta, config.cov_floor);
                        break;
                    }
                }
                Eigen::MatrixXd qcov = pm.S * delta;
                Eigen::LLT<Eigen::MatrixXd> qchol(qcov);
                if (qchol.info() != Eigen::Success) {
                    qcov = floor_spd(qcov, config.cov_floor * delta);
                    qchol.compute(qcov);
                    if (qchol.info() != Eigen::Success)
                        throw NumericalSingularityError(
                            "smc_filter: proposal covariance not positive definite");
                }
                for (int c = 0; c < d; ++c) xi[c] = stream.normal();
                const Eigen::VectorXd q_mean = x_prev + pm.mu * delta;
                const Eigen::VectorXd x_new =
                    q_mean + Eigen::MatrixXd(qchol.matrixL()) * xi;
                lq += mvn_logpdf_chol(x_new, q_mean, qchol);
                lf += mvn_logpdf(x_new, x_prev + b * delta, a * delta);
                path.col(i) = x_new;
            }
            const double lrho = mvn_logpdf(y, obs.G * path.col(n_hi), obs.sigma_noise);
            block_delta[l] = lrho + lf - lq;
        });

        for (int l = 0; l < L; ++l) {
            double v = ens.log_weights[l] + block_delta[l];
            ens.log_weights[l] = std::isnan(v) ? kNegInf : v;
        }
        const double block_ess = ess(ens.log_weights);
        if (block_ess <= 0.0) {
            std::ostringstream msg;
            msg << "smc_filter: all particle weights vanished at observation " << m;
            throw DegenerateEnsembleError(msg.str(), m);
        }
        const bool do_resample = block_ess <= config.ess_threshold_frac * L;
        ens.resample_log.push_back({m, block_ess, do_resample});
        if (do_resample) {
            const double shift = ens.log_weights.maxCoeff();
            Eigen::VectorXd w = (ens.log_weights.array() - shift).exp();
            w /= w.sum();
            std::vector<int> idx = systematic_resample(w, resample_stream);
            std::vector<Eigen::MatrixXd> next(L);
            for (int l = 0; l < L; ++l) next[l] = ens.paths[idx[l]];
            ens.paths = std::move(next);
            ens.log_weights.setConstant(-std::log(static_cast<double>(L)));
        }
    }

    const double shift = ens.log_weights.maxCoeff();
    ens.weights = (ens.log_weights.array() - shift).exp();
    ens.weights /= ens.weights.sum();
    return ens;
}

}  // namespace driftforge
