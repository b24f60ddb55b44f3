#include "driftforge/parallel.hpp"

#include <algorithm>
#include <cstdlib>
#include <exception>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace driftforge {

bool& parallel_enabled() {
#ifdef _OPENMP
    static bool enabled = true;
#else
    static bool enabled = false;
#endif
    return enabled;
}

int max_threads() {
#ifdef _OPENMP
    int n = omp_get_max_threads();
#else
    int n = 1;
#endif
    if (const char* env = std::getenv("DRIFT_FORGE_THREADS")) {
        int cap = std::atoi(env);
        if (cap > 0) n = std::min(n, cap);
    }
    return n;
}

void parallel_for(int n, const std::function<void(int)>& body) {
#ifdef _OPENMP
    if (parallel_enabled() && n > 1) {
        // Exceptions may not cross the OpenMP region; capture and rethrow.
        std::exception_ptr err = nullptr;
#pragma omp parallel for schedule(static) num_threads(max_threads())
        for (int i = 0; i < n; ++i) {
            try {
                body(i);
            } catch (...) {
#pragma omp critical
                if (!err) err = std::current_exception();
            }
        }
        if (err) std::rethrow_exception(err);
        return;
    }
#endif
    for (int i = 0; i < n; ++i) body(i);
}

}  // namespace driftforge
