#pragma once

#include <functional>

namespace driftforge {

// Global switch between the OpenMP kernels and the serial reference path.
// Every parallel loop in the library is written so that both paths produce
// bit-identical results (independent iterations, per-iteration RNG streams,
// static schedule); tests assert this.
bool& parallel_enabled();

// Worker count: min(omp_get_max_threads(), DRIFT_FORGE_THREADS if set).
int max_threads();

// Static-schedule parallel for over [0, n). Falls back to a plain loop when
// parallelism is disabled or OpenMP is unavailable.
void parallel_for(int n, const std::function<void(int)>& body);

struct SerialSection {
    // RAII: force the serial path inside a scope (used by tests/bench).
    SerialSection() : saved_(parallel_enabled()) { parallel_enabled() = false; }
    ~SerialSection() { parallel_enabled() = saved_; }

  private:
    bool saved_;
};

}  // namespace driftforge
