#include "driftforge/em.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "driftforge/errors.hpp"
#include "driftforge/linalg.hpp"
#include "driftforge/parallel.hpp"

namespace driftforge {

namespace {

// Accept a factorization only if the solve is backward-stable.
bool solve_ok(const Eigen::MatrixXd& m, const Eigen::MatrixXd& x, const Eigen::MatrixXd& rhs) {
    double res = (m * x - rhs).norm();
    return res <= 1e-10 * (m.norm() * x.norm() + rhs.norm()) + 1e-300;
}

// Shared jitter-escalation solve: M = A + jit * I, jit escalating x10 from
// jitter*trace(Kc)/J (plus a term relative to trace(A)/J so that systems with
// extreme a^{-1} scales stay conditioned).
Eigen::MatrixXd solve_normal_equations(Eigen::MatrixXd a, const Eigen::MatrixXd& rhs,
                                       double jitter, double trace_kc_per_row) {
    const Eigen::Index n = a.rows();
    const double scale_a = a.trace() / static_cast<double>(n);
    const double base = jitter * trace_kc_per_row + 1e-14 * std::abs(scale_a);
    for (double mult = 1.0; mult <= 1.0e4 + 0.5; mult *= 10.0) {
        Eigen::MatrixXd m = a;
        m.diagonal().array() += mult * base;
        Eigen::LLT<Eigen::MatrixXd> llt(m);
        if (llt.info() == Eigen::Success) {
            Eigen::MatrixXd x = llt.solve(rhs);
            if (solve_ok(m, x, rhs)) return x;
        }
        Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
        if (ldlt.info() == Eigen::Success) {
            Eigen::MatrixXd x = ldlt.solve(rhs);
            if (solve_ok(m, x, rhs)) return x;
        }
    }
    throw IllConditionedSystemError(
        "m-step normal equations remained ill-conditioned after jitter escalation");
}

bool is_isotropic(const Eigen::MatrixXd& a) {
    const double alpha = a(0, 0);
    const double tol = 1e-12 * std::max(std::abs(alpha), a.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            const double want = i == j ? alpha : 0.0;
            if (std::abs(a(i, j) - want) > tol) return false;
        }
    return true;
}

}  // namespace

MStepSystem assemble_system(const ParticleEnsemble& ensemble,
                            const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& a_fn,
                            const Kernel& kernel, const EMConfig& config) {
    const int L = static_cast<int>(ensemble.paths.size());
    if (L == 0) throw InvalidInputError("assemble_system: empty ensemble");
    const int keep = std::min(config.keep, L);
    const int n0 = ensemble.grid.n_steps;
    const int d = static_cast<int>(ensemble.paths[0].rows());
    const int cs = std::max(1, config.center_stride);

    // top-keep paths by weight, ties broken by particle index
    std::vector<int> order(L);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
        return ensemble.weights[i] > ensemble.weights[j];
    });
    order.resize(keep);
    double wsum = 0.0;
    for (int l : order) wsum += ensemble.weights[l];
    if (wsum <= 0.0) throw InvalidInputError("assemble_system: retained weights vanish");

    MStepSystem sys;
    sys.kernel = kernel;
    sys.delta = ensemble.grid.delta;
    sys.lambda = config.lambda;
    sys.jitter = config.jitter;

    const int slots_per_path = (n0 + cs - 1) / cs;
    sys.centers.resize(d, static_cast<Eigen::Index>(keep) * slots_per_path);
    sys.eval_points.resize(d, static_cast<Eigen::Index>(keep) * n0);
    sys.increments.resize(d, static_cast<Eigen::Index>(keep) * n0);
    sys.w_scalar.resize(static_cast<Eigen::Index>(keep) * n0);
    sys.logdet_a.resize(static_cast<Eigen::Index>(keep) * n0);

    std::vector<Eigen::MatrixXd> a_mats(static_cast<std::size_t>(keep) * n0);
    bool isotropic = true;
    Eigen::Index col = 0, ccol = 0;
    std::vector<double> path_w(keep);
    for (int r = 0; r < keep; ++r) {
        const Eigen::MatrixXd& path = ensemble.paths[order[r]];
        const double w = ensemble.weights[order[r]] / wsum;
        path_w[r] = w;
        for (int n = 0; n < n0; ++n, ++col) {
            sys.eval_points.col(col) = path.col(n);
            sys.increments.col(col) = path.col(n + 1) - path.col(n);
            a_mats[col] = a_fn(path.col(n));
            if (isotropic && !is_isotropic(a_mats[col])) isotropic = false;
        }
        for (int n = 0; n < n0; n += cs, ++ccol) sys.centers.col(ccol) = path.col(n);
    }
    sys.isotropic = isotropic;

    col = 0;
    if (isotropic) {
        for (int r = 0; r < keep; ++r)
            for (int n = 0; n < n0; ++n, ++col) {
                const double alpha = a_mats[col](0, 0);
                if (!(alpha > 0.0) || !std::isfinite(alpha)) {
                    std::ostringstream msg;
                    msg << "assemble_system: singular diffusion at center " << col;
                    throw NumericalSingularityError(msg.str());
                }
                sys.w_scalar[col] = path_w[r] / alpha;
                sys.logdet_a[col] = d * std::log(alpha);
            }
    } else {
        sys.w_blocks.resize(a_mats.size());
        for (int r = 0; r < keep; ++r)
            for (int n = 0; n < n0; ++n, ++col) {
                Eigen::LLT<Eigen::MatrixXd> llt(a_mats[col]);
                if (llt.info() != Eigen::Success) {
                    std::ostringstream msg;
                    msg << "assemble_system: singular diffusion at center " << col;
                    throw NumericalSingularityError(msg.str());
                }
                sys.w_blocks[col] =
                    path_w[r] * llt.solve(Eigen::MatrixXd::Identity(d, d));
                double ld = 0.0;
                for (int i = 0; i < d; ++i) ld += std::log(llt.matrixLLT()(i, i));
                sys.logdet_a[col] = 2.0 * ld;
            }
    }

    sys.gram_eval = gram_matrix(kernel, sys.eval_points, sys.centers);
    sys.gram_centers = gram_matrix(kernel, sys.centers, sys.centers);
    return sys;
}

namespace {

// Solve the decoupled scalar normal equations (a = alpha I): one J x J
// factorization shared by the d coordinate systems.
Eigen::MatrixXd solve_isotropic(const MStepSystem& sys, const Eigen::VectorXd* scales) {
    const Eigen::Index j = sys.centers.cols();
    const Eigen::Index d = sys.centers.rows();
    Eigen::VectorXd sqw = sys.w_scalar.cwiseSqrt();
    Eigen::MatrixXd ms = sqw.asDiagonal() * sys.gram_eval;  // N x J
    Eigen::MatrixXd a(j, j);
    a.noalias() = sys.delta * (ms.transpose() * ms);
    if (scales)
        a.diagonal() += scales->cwiseInverse();
    else
        a += sys.lambda * sys.gram_centers;
    Eigen::MatrixXd rhs(j, d);
    rhs.noalias() = sys.gram_eval.transpose() *
                    (sys.w_scalar.asDiagonal() * sys.increments.transpose());
    Eigen::MatrixXd x = solve_normal_equations(
        std::move(a), rhs, sys.jitter, sys.gram_centers.trace() / static_cast<double>(j));
    return x.transpose();  // d x J
}

// General blocked system (Jd x Jd); used when a(x) has cross terms.
Eigen::MatrixXd solve_blocked(const MStepSystem& sys, const Eigen::VectorXd* scales) {
    const Eigen::Index j = sys.centers.cols();
    const Eigen::Index d = sys.centers.rows();
    const Eigen::Index n = sys.eval_points.cols();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(j * d, j * d);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(j * d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::MatrixXd& w = sys.w_blocks[i];
        const Eigen::VectorXd wtheta = w * sys.increments.col(i);
        for (Eigen::Index p = 0; p < j; ++p) {
            const double kp = sys.gram_eval(i, p);
            if (kp == 0.0) continue;
            rhs.segment(p * d, d) += kp * wtheta;
            for (Eigen::Index q = 0; q < j; ++q)
                a.block(p * d, q * d, d, d) += (sys.delta * kp * sys.gram_eval(i, q)) * w;
        }
    }
    if (scales) {
        for (Eigen::Index p = 0; p < j; ++p)
            a.diagonal().segment(p * d, d).array() += 1.0 / (*scales)[p];
    } else {
        for (Eigen::Index p = 0; p < j; ++p)
            for (Eigen::Index q = 0; q < j; ++q)
                a.block(p * d, q * d, d, d).diagonal().array() +=
                    sys.lambda * sys.gram_centers(p, q);
    }
    Eigen::MatrixXd x = solve_normal_equations(
        std::move(a), rhs, sys.jitter, sys.gram_centers.trace() / static_cast<double>(j));
    return Eigen::Map<const Eigen::MatrixXd>(x.data(), d, j);
}

DriftFunction solve_impl(const MStepSystem& sys, const Eigen::VectorXd* scales) {
    Eigen::MatrixXd coeffs =
        sys.isotropic ? solve_isotropic(sys, scales) : solve_blocked(sys, scales);
    return DriftFunction(sys.kernel, sys.centers, std::move(coeffs));
}

}  // namespace

DriftFunction solve_m_step(const MStepSystem& system) { return solve_impl(system, nullptr); }

DriftFunction solve_m_step_bayes(const MStepSystem& system, const Eigen::VectorXd& scales) {
    if (scales.size() != system.centers.cols())
        throw InvalidInputError("solve_m_step_bayes: one scale per center required");
    if (scales.minCoeff() <= 0.0)
        throw InvalidInputError("solve_m_step_bayes: scales must be positive");
    return solve_impl(system, &scales);
}

Eigen::VectorXd update_scales(const DriftFunction& drift, double hyper_a, double hyper_b,
                              rng::Stream& stream) {
    if (hyper_a <= 0.0 || hyper_b <= 0.0)
        throw InvalidInputError("update_scales: hyperparameters must be positive");
    const double shape = hyper_a + 0.5 * drift.dim();
    const double kdiag = drift.kernel().diag();
    Eigen::VectorXd scales(drift.size());
    std::gamma_distribution<double> gamma(shape, 1.0);
    for (Eigen::Index jc = 0; jc < drift.size(); ++jc) {
        const double rate = hyper_b + 0.5 * kdiag * drift.coefficients().col(jc).squaredNorm();
        scales[jc] = rate / gamma(stream);
    }
    return scales;
}

namespace {

double quad_term(const MStepSystem& sys, const Eigen::MatrixXd& resid) {
    double acc = 0.0;
    if (sys.isotropic) {
        for (Eigen::Index i = 0; i < resid.cols(); ++i)
            acc += sys.w_scalar[i] * resid.col(i).squaredNorm();
    } else {
        for (Eigen::Index i = 0; i < resid.cols(); ++i)
            acc += resid.col(i).dot(sys.w_blocks[i] * resid.col(i));
    }
    return acc;
}

}  // namespace

double m_step_risk(const MStepSystem& sys, const DriftFunction& drift) {
    Eigen::MatrixXd resid = sys.increments;
    const bool aligned = drift.size() == sys.centers.cols() &&
                         drift.dim() == sys.centers.rows() &&
                         drift.centers().isApprox(sys.centers, 0.0);
    if (aligned) {
        resid.noalias() -= sys.delta * (drift.coefficients() * sys.gram_eval.transpose());
    } else {
        for (Eigen::Index i = 0; i < resid.cols(); ++i)
            resid.col(i) -= sys.delta * drift(sys.eval_points.col(i));
    }
    return quad_term(sys, resid) / sys.delta + sys.lambda * drift.rkhs_norm_sq();
}

std::pair<DriftFunction, EMTrace> run_em(const ObservationSet& obs, const DiffusionModel& model,
                                         const TimeGrid& grid, const Eigen::VectorXd& x0,
                                         const EMConfig& config, const DriftFunction& init) {
    if (config.iters < 1) throw InvalidInputError("run_em: need at least one iteration");
    Kernel kernel{config.kernel_bandwidth, config.kernel_amplitude, model.dim};
    DriftFunction current =
        init.size() > 0 ? init : DriftFunction::zero(kernel);
    auto a_fn = [&model](const Eigen::VectorXd& x) { return model.a(x); };

    rng::Stream scale_stream(rng::derive_key(config.seed, rng::tag::scales));
    Eigen::VectorXd scales;
    EMTrace trace;
    int stall = 0;

    for (int k = 1; k <= config.iters; ++k) {
        try {
            SMCConfig sc = config.smc;
            sc.particles = config.particles;
            ParticleEnsemble ens =
                smc_filter(DriftField::from(current), model, obs, grid, x0, sc,
                           rng::derive_key(config.seed, rng::tag::propagate, 0xE0, k));
            MStepSystem sys = assemble_system(ens, a_fn, kernel, config);

            DriftFunction next;
            if (config.mode == EmMode::penalized) {
                next = solve_m_step(sys);
            } else {
                const Eigen::Index j = sys.centers.cols();
                if (scales.size() != j) {
                    // iteration-1 scales are prior draws
                    scales.resize(j);
                    std::gamma_distribution<double> gamma(config.hyper_a, 1.0);
                    for (Eigen::Index i = 0; i < j; ++i)
                        scales[i] = config.hyper_b / gamma(scale_stream);
                }
                next = solve_m_step_bayes(sys, scales);
                scales = update_scales(next, config.hyper_a, config.hyper_b, scale_stream);
            }

            // drift change RMS over a subsample of the system's eval points
            const Eigen::Index n = sys.eval_points.cols();
            const Eigen::Index step = std::max<Eigen::Index>(1, n / 256);
            double dsum = 0.0;
            int cnt = 0;
            for (Eigen::Index i = 0; i < n; i += step, ++cnt)
                dsum += (next(sys.eval_points.col(i)) - current(sys.eval_points.col(i)))
                            .squaredNorm();
            const double drift_delta = std::sqrt(dsum / std::max(1, cnt));

            double min_ess = static_cast<double>(config.particles);
            int resamples = 0;
            for (const auto& ev : ens.resample_log) {
                min_ess = std::min(min_ess, ev.ess);
                if (ev.resampled) ++resamples;
            }
            trace.records.push_back({k, m_step_risk(sys, next), next.coefficients().norm(),
                                     drift_delta, min_ess, resamples});
            current = std::move(next);

            if (config.early_stop) {
                stall = drift_delta < config.early_stop_tol ? stall + 1 : 0;
                if (stall >= config.early_stop_patience) break;
            }
        } catch (const Error& err) {
            std::ostringstream msg;
            msg << "em iteration " << k << ": " << err.what();
            throw Error(msg.str());
        }
    }
    return {std::move(current), std::move(trace)};
}

}  // namespace driftforge
