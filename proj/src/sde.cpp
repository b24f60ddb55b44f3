#include "driftforge/sde.hpp"

#include <cmath>
#include <sstream>

#include "driftforge/errors.hpp"
#include "driftforge/linalg.hpp"
#include "driftforge/log.hpp"
#include "driftforge/rng.hpp"

namespace driftforge {

namespace {

double param_or(const Params& p, const std::string& key, double fallback) {
    auto it = p.find(key);
    return it == p.end() ? fallback : it->second;
}

}  // namespace

LatentPath simulate(const DiffusionModel& model, const TimeGrid& grid,
                    const Eigen::VectorXd& x0, std::uint64_t seed) {
    if (grid.delta <= 0.0) throw InvalidInputError("simulate: delta must be positive");
    if (x0.size() != model.dim) throw InvalidInputError("simulate: x0 dimension mismatch");
    const int d = model.dim;
    const double sqrt_delta = std::sqrt(grid.delta);
    LatentPath path{grid, Eigen::MatrixXd(d, grid.size())};
    path.states.col(0) = x0;
    rng::Stream stream(rng::derive_key(seed, rng::tag::simulate));
    Eigen::VectorXd x = x0, xi(d);
    for (int n = 0; n < grid.n_steps; ++n) {
        for (int i = 0; i < d; ++i) xi[i] = stream.normal();
        x += model.drift(x) * grid.delta + model.diffusion(x) * xi * sqrt_delta;
        if (model.constrain) x = model.constrain(x);
        if (!x.allFinite()) {
            std::ostringstream msg;
            msg << "simulation diverged at step " << n + 1 << " (model " << model.name << ")";
            throw SimulationDivergedError(msg.str(), n + 1);
        }
        path.states.col(n + 1) = x;
    }
    return path;
}

Eigen::MatrixXd clamp_noise_covariance(Eigen::MatrixXd sigma) {
    constexpr double kFloor = 1e-30;
    bool clamped = false;
    for (Eigen::Index i = 0; i < sigma.rows(); ++i)
        if (sigma(i, i) < kFloor) {
            sigma(i, i) = kFloor;
            clamped = true;
        }
    if (clamped)
        log_warn("observation noise variance below 1e-30 clamped to 1e-30");
    return sigma;
}

ObservationSet observe(const LatentPath& path, int stride, const Eigen::MatrixXd& G,
                       const Eigen::MatrixXd& sigma_noise, std::uint64_t seed) {
    if (stride < 1) throw InvalidInputError("observe: stride must be >= 1");
    if (G.cols() != path.states.rows()) throw InvalidInputError("observe: G column mismatch");
    Eigen::MatrixXd sigma = clamp_noise_covariance(sigma_noise);
    if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() >
        1e-12 * (1.0 + sigma.cwiseAbs().maxCoeff()))
        throw InvalidInputError("observe: sigma_noise must be symmetric");
    Eigen::LLT<Eigen::MatrixXd> chol(sigma);
    if (chol.info() != Eigen::Success)
        throw InvalidInputError("observe: sigma_noise must be positive definite");

    ObservationSet obs;
    obs.G = G;
    obs.sigma_noise = sigma;
    for (int n = stride; n <= path.grid.n_steps; n += stride) obs.indices.push_back(n);
    const int d0 = static_cast<int>(G.rows());
    obs.values.resize(d0, static_cast<Eigen::Index>(obs.indices.size()));
    rng::Stream stream(rng::derive_key(seed, rng::tag::observe));
    Eigen::VectorXd xi(d0);
    Eigen::MatrixXd l = chol.matrixL();
    for (std::size_t m = 0; m < obs.indices.size(); ++m) {
        for (int i = 0; i < d0; ++i) xi[i] = stream.normal();
        obs.values.col(static_cast<Eigen::Index>(m)) =
            G * path.states.col(obs.indices[m]) + l * xi;
    }
    return obs;
}

double path_log_density(const LatentPath& path, const DiffusionModel& model) {
    double acc = 0.0;
    for (int n = 1; n <= path.grid.n_steps; ++n) {
        const Eigen::VectorXd xp = path.states.col(n - 1);
        Eigen::MatrixXd cov = model.a(xp) * path.grid.delta;
        Eigen::LLT<Eigen::MatrixXd> chol(cov);
        if (chol.info() != Eigen::Success) {
            std::ostringstream msg;
            msg << "path_log_density: singular diffusion matrix at step " << n;
            throw NumericalSingularityError(msg.str());
        }
        acc += mvn_logpdf_chol(path.states.col(n),
                               xp + model.drift(xp) * path.grid.delta, chol);
    }
    return acc;
}

DiffusionModel model_zoo(const std::string& name, const Params& params) {
    DiffusionModel m;
    m.name = name;
    if (name == "double_well") {
        const double vs = param_or(params, "varsigma", 1.0);
        m.dim = 1;
        m.drift = [](const Eigen::VectorXd& x) {
            return Eigen::VectorXd::Constant(1, 4.0 * x[0] * (1.0 - x[0] * x[0]));
        };
        m.diffusion = [vs](const Eigen::VectorXd&) {
            return Eigen::MatrixXd::Constant(1, 1, vs);
        };
    } else if (name == "double_well_variant") {
        const double vs = param_or(params, "varsigma", 1.0);
        m.dim = 1;
        m.drift = [](const Eigen::VectorXd& x) {
            return Eigen::VectorXd::Constant(1, x[0] * (1.0 - x[0] * x[0]));
        };
        m.diffusion = [vs](const Eigen::VectorXd& x) {
            return Eigen::MatrixXd::Constant(1, 1, vs * std::sqrt(1.0 + x[0] * x[0]));
        };
    } else if (name == "gamma") {
        const double vs = param_or(params, "varsigma", 1.0);
        m.dim = 1;
        m.drift = [](const Eigen::VectorXd& x) {
            return Eigen::VectorXd::Constant(1, 9.0 / x[0] - 5.0);
        };
        m.diffusion = [vs](const Eigen::VectorXd&) {
            return Eigen::MatrixXd::Constant(1, 1, vs);
        };
        // 9/x is singular at 0; reflect non-positive excursions back to |x|.
        m.constrain = [](const Eigen::VectorXd& x) {
            Eigen::VectorXd out = x;
            if (out[0] <= 0.0) out[0] = std::max(std::abs(out[0]), 1e-12);
            return out;
        };
    } else if (name == "michaelis_menten") {
        const double k1 = param_or(params, "k1", 1.0);
        const double k2 = param_or(params, "k2", 1.0);
        const double km1 = param_or(params, "km1", 1.0);
        const double km2 = param_or(params, "km2", 1.0);
        const double cons = param_or(params, "C", 2.0);
        const double sg = param_or(params, "sigma", 0.1);
        m.dim = 3;
        // reduced state (x_E, x_S, x_P); x_ES = C - x_E by conservation
        m.drift = [k1, k2, km1, km2, cons](const Eigen::VectorXd& x) {
            const double xe = x[0], xs = x[1], xp = x[2];
            const double xes = cons - xe;
            Eigen::VectorXd b(3);
            b[0] = -k1 * xe * xs - km2 * xe * xp + (km1 + k2) * xes;
            b[1] = -k1 * xe * xs + km1 * xes;
            b[2] = k2 * xes - km2 * xe * xp;
            return b;
        };
        m.diffusion = [sg](const Eigen::VectorXd&) {
            return Eigen::MatrixXd(sg * Eigen::MatrixXd::Identity(3, 3));
        };
    } else if (name == "sir") {
        const double beta = param_or(params, "beta", 0.5);
        const double gamma = param_or(params, "gamma", 0.6);
        const double sg = param_or(params, "sigma", 1e-6);
        m.dim = 2;
        m.drift = [beta, gamma](const Eigen::VectorXd& x) {
            const double xs = x[0], xi = x[1];
            Eigen::VectorXd b(2);
            b[0] = -beta * xs * xi;
            b[1] = beta * xs * xi - gamma * xi;
            return b;
        };
        m.diffusion = [sg](const Eigen::VectorXd&) {
            return Eigen::MatrixXd(sg * Eigen::MatrixXd::Identity(2, 2));
        };
    } else {
        throw InvalidInputError("model_zoo: unknown model '" + name + "'");
    }
    return m;
}

Eigen::VectorXd default_x0(const std::string& name, const Params& params) {
    if (name == "double_well" || name == "double_well_variant")
        return Eigen::VectorXd::Constant(1, 1.0);
    if (name == "gamma") return Eigen::VectorXd::Constant(1, 1.8);
    if (name == "michaelis_menten") {
        Eigen::VectorXd x0(3);
        x0 << 1.0, 2.0, 0.0;
        return x0;
    }
    if (name == "sir") {
        Eigen::VectorXd x0(2);
        x0 << 0.9, 0.1;
        return x0;
    }
    (void)params;
    throw InvalidInputError("default_x0: unknown model '" + name + "'");
}

double stationary_density(const std::string& name, const Params& params, double x) {
    const double vs = param_or(params, "varsigma", 1.0);
    const double vs2 = vs * vs;
    if (name == "double_well")
        return std::exp((2.0 * x * x - x * x * x * x) / (2.0 * vs2));
    if (name == "double_well_variant")
        return std::pow(1.0 + x * x, 2.0 / vs2 - 1.0) * std::exp(-x * x / vs2) / vs2;
    if (name == "gamma") {
        if (x <= 0.0) return 0.0;
        return std::pow(x, 18.0) * std::exp(-10.0 * x / vs2) / vs2;
    }
    throw InvalidInputError("stationary_density: no closed form for model '" + name + "'");
}

}  // namespace driftforge
