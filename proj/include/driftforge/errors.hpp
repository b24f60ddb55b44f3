#pragma once

#include <stdexcept>
#include <string>

namespace driftforge {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad arguments or malformed inputs (dimension mismatches, non-p.d. covariances, ...).
struct InvalidInputError : Error {
    using Error::Error;
};

// A matrix that must be invertible is numerically singular.
struct NumericalSingularityError : Error {
    using Error::Error;
};

// Euler-Maruyama state became non-finite.
struct SimulationDivergedError : Error {
    SimulationDivergedError(const std::string& msg, int step_index)
        : Error(msg), step(step_index) {}
    int step;
};

// Every particle weight underflowed to zero.
struct DegenerateEnsembleError : Error {
    DegenerateEnsembleError(const std::string& msg, int obs)
        : Error(msg), obs_index(obs) {}
    int obs_index;
};

// Normal-equations solve failed even after jitter escalation.
struct IllConditionedSystemError : Error {
    using Error::Error;
};

// Bad experiment configuration (unknown key, missing field, wrong type).
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace driftforge
