// Timings of the OpenMP kernels against the serial reference path:
// Gram assembly, particle propagation, and batch stationary simulation.
// Both paths must produce identical numbers; the benchmark checks that too.

#include <chrono>
#include <cstdio>
#include <vector>

#include "driftforge/em.hpp"
#include "driftforge/eval.hpp"
#include "driftforge/kernel.hpp"
#include "driftforge/parallel.hpp"
#include "driftforge/sde.hpp"
#include "driftforge/smc.hpp"

using namespace driftforge;

namespace {

double now() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

struct Case {
    const char* name;
    double serial_s;
    double parallel_s;
    bool identical;
};

Eigen::MatrixXd random_points(int d, int n, std::uint64_t seed) {
    rng::Stream s(rng::derive_key(seed));
    Eigen::MatrixXd m(d, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < d; ++i) m(i, j) = s.normal();
    return m;
}

Case bench_gram() {
    Kernel kernel{2.0, 10.0, 2};
    Eigen::MatrixXd pts = random_points(2, 3000, 7);
    parallel_enabled() = false;
    double t0 = now();
    Eigen::MatrixXd g_serial = gram_matrix(kernel, pts, pts);
    double t1 = now();
    parallel_enabled() = true;
    double t2 = now();
    Eigen::MatrixXd g_par = gram_matrix(kernel, pts, pts);
    double t3 = now();
    return {"gram_matrix 3000x3000", t1 - t0, t3 - t2, g_serial.isApprox(g_par, 0.0)};
}

Case bench_smc() {
    DiffusionModel model = model_zoo("double_well");
    TimeGrid grid{0.025, 1600};
    Eigen::VectorXd x0 = Eigen::VectorXd::Constant(1, 1.0);
    LatentPath path = simulate(model, grid, x0, 11);
    ObservationSet obs = observe(path, 5, Eigen::MatrixXd::Identity(1, 1),
                                 1e-4 * Eigen::MatrixXd::Identity(1, 1), 12);
    SMCConfig cfg;
    cfg.particles = 64;
    DriftField drift = DriftField::numeric(model.drift, 1);

    parallel_enabled() = false;
    double t0 = now();
    ParticleEnsemble serial = smc_filter(drift, model, obs, grid, x0, cfg, 13);
    double t1 = now();
    parallel_enabled() = true;
    double t2 = now();
    ParticleEnsemble par = smc_filter(drift, model, obs, grid, x0, cfg, 13);
    double t3 = now();
    bool same = serial.log_weights.isApprox(par.log_weights, 0.0);
    for (std::size_t l = 0; same && l < serial.paths.size(); ++l)
        same = serial.paths[l].isApprox(par.paths[l], 0.0);
    return {"smc_filter L=64, N0=1600", t1 - t0, t3 - t2, same};
}

Case bench_batch_sim() {
    DiffusionModel model = model_zoo("double_well");
    TimeGrid grid{0.025, 20000};
    Eigen::VectorXd x0 = Eigen::VectorXd::Constant(1, 1.0);
    const int n = 16;
    auto run_batch = [&](std::vector<double>& sums) {
        parallel_for(n, [&](int s) {
            LatentPath p = simulate(model, grid, x0, 100 + s);
            sums[s] = p.states.row(0).sum();
        });
    };
    std::vector<double> a(n), b(n);
    parallel_enabled() = false;
    double t0 = now();
    run_batch(a);
    double t1 = now();
    parallel_enabled() = true;
    double t2 = now();
    run_batch(b);
    double t3 = now();
    return {"simulate x16, N0=20000", t1 - t0, t3 - t2, a == b};
}

}  // namespace

int main() {
    std::printf("%-28s %10s %10s %9s %s\n", "kernel", "serial[s]", "openmp[s]", "speedup",
                "identical");
    for (auto c : {bench_gram(), bench_smc(), bench_batch_sim()}) {
        std::printf("%-28s %10.3f %10.3f %8.2fx %s\n", c.name, c.serial_s, c.parallel_s,
                    c.serial_s / c.parallel_s, c.identical ? "yes" : "NO");
        if (!c.identical) return 1;
    }
    std::printf("threads: %d\n", max_threads());
    return 0;
}
