#include "driftforge/eval.hpp"

#include <algorithm>
#include <cmath>

#include "driftforge/errors.hpp"

namespace driftforge {

EmpiricalCdf::EmpiricalCdf(std::vector<double> samples) : sorted_(std::move(samples)) {
    if (sorted_.empty()) throw InvalidInputError("EmpiricalCdf: empty sample");
    std::sort(sorted_.begin(), sorted_.end());
}

double EmpiricalCdf::operator()(double x) const {
    auto it = std::upper_bound(sorted_.begin(), sorted_.end(), x);
    return static_cast<double>(it - sorted_.begin()) / static_cast<double>(sorted_.size());
}

double ks_distance(const EmpiricalCdf& f1, const EmpiricalCdf& f2) {
    const auto& a = f1.sorted();
    const auto& b = f2.sorted();
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double best = 0.0;
    while (i < a.size() || j < b.size()) {
        double x = (j >= b.size() || (i < a.size() && a[i] <= b[j])) ? a[i] : b[j];
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        best = std::max(best, std::abs(static_cast<double>(i) / na -
                                       static_cast<double>(j) / nb));
    }
    return best;
}

double drift_mse(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& fitted,
                 const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& truth,
                 const Eigen::MatrixXd& grid) {
    if (grid.cols() == 0) throw InvalidInputError("drift_mse: empty grid");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < grid.cols(); ++i)
        acc += (fitted(grid.col(i)) - truth(grid.col(i))).squaredNorm();
    return acc / static_cast<double>(grid.cols());
}

Eigen::MatrixXd evaluation_grid(
    const std::string& model_name, int resolution,
    const std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& bounding_box) {
    if (resolution < 2) throw InvalidInputError("evaluation_grid: resolution must be >= 2");
    const bool one_d = model_name == "double_well" || model_name == "double_well_variant" ||
                       model_name == "gamma";
    if (one_d) {
        double lo = -2.5, hi = 2.5;
        if (model_name == "gamma") {
            lo = 0.2;
            hi = 4.0;
        }
        Eigen::MatrixXd grid(1, resolution);
        for (int i = 0; i < resolution; ++i)
            grid(0, i) = lo + (hi - lo) * i / (resolution - 1.0);
        return grid;
    }
    if (!bounding_box)
        throw InvalidInputError("evaluation_grid: multivariate grids need a bounding box");
    const Eigen::VectorXd& lo = bounding_box->first;
    const Eigen::VectorXd& hi = bounding_box->second;
    const int d = static_cast<int>(lo.size());
    Eigen::Index total = 1;
    for (int k = 0; k < d; ++k) total *= resolution;
    Eigen::MatrixXd grid(d, total);
    for (Eigen::Index idx = 0; idx < total; ++idx) {
        Eigen::Index rem = idx;
        for (int k = 0; k < d; ++k) {
            const int step = static_cast<int>(rem % resolution);
            rem /= resolution;
            grid(k, idx) = lo[k] + (hi[k] - lo[k]) * step / (resolution - 1.0);
        }
    }
    return grid;
}

KolmogorovResult kolmogorov_metric(const DriftFunction& fitted, const DiffusionModel& true_model,
                                   const StationarySimConfig& config) {
    if (true_model.dim != 1)
        throw InvalidInputError("kolmogorov_metric: defined for 1-d models only");
    TimeGrid grid{config.delta, static_cast<int>(std::llround(config.t_final / config.delta))};
    const int burn = static_cast<int>(config.burn_fraction * grid.n_steps);

    DiffusionModel fitted_model = true_model;
    fitted_model.name = true_model.name + "_fitted";
    fitted_model.drift = [fitted](const Eigen::VectorXd& x) { return fitted(x); };

    LatentPath truth = simulate(true_model, grid, config.x0, config.seed_true);
    KolmogorovResult out;
    out.n_samples = grid.n_steps - burn;
    LatentPath est;
    try {
        est = simulate(fitted_model, grid, config.x0, config.seed_fitted);
    } catch (const SimulationDivergedError&) {
        out.value = 1.0;
        out.diverged = true;
        return out;
    }
    std::vector<double> s1(out.n_samples), s2(out.n_samples);
    for (int n = 0; n < out.n_samples; ++n) {
        s1[n] = truth.states(0, burn + 1 + n);
        s2[n] = est.states(0, burn + 1 + n);
    }
    EmpiricalCdf f1(std::move(s1)), f2(std::move(s2));
    out.value = ks_distance(f1, f2);
    out.samples_true = f1.sorted();
    out.samples_fitted = f2.sorted();
    return out;
}

}  // namespace driftforge
