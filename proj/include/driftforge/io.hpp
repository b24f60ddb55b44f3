#pragma once

#include <nlohmann/json_fwd.hpp>

#include <string>
#include <vector>

#include "driftforge/em.hpp"
#include "driftforge/eval.hpp"
#include "driftforge/kernel.hpp"
#include "driftforge/sde.hpp"

namespace driftforge::io {

using json = nlohmann::json;

// Shortest round-trip decimal form (exact re-parse for finite doubles).
std::string format_double(double v);
double parse_double(const std::string& s);

// CSV `time,<columns>` with a row per grid point / observation time.
void write_path_csv(const std::string& file, const LatentPath& path);
void write_observations_csv(const std::string& file, const ObservationSet& obs,
                            const TimeGrid& grid);

// Sidecar with the grid metadata needed to re-run a fit from the CSV alone.
void write_observations_meta(const std::string& file, const ObservationSet& obs,
                             const TimeGrid& grid, std::uint64_t seed);
ObservationSet read_observations(const std::string& csv_file, const std::string& meta_file,
                                 TimeGrid& grid_out);

json drift_to_json(const DriftFunction& f);
DriftFunction drift_from_json(const json& j);
void write_drift(const std::string& file, const DriftFunction& f);
DriftFunction read_drift(const std::string& file);

void write_trace_csv(const std::string& file, const EMTrace& trace);

json eval_report_to_json(const EvalReport& report);
void write_eval_report(const std::string& file, const EvalReport& report);

// Particle-ensemble diagnostics (--dump-particles).
void write_particles(const std::string& dir, const ParticleEnsemble& ensemble);

json matrix_to_json(const Eigen::MatrixXd& m);          // row-major nested arrays
Eigen::MatrixXd matrix_from_json(const json& j);
json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const json& j);

void write_text(const std::string& file, const std::string& content);
json read_json_file(const std::string& file);

}  // namespace driftforge::io
