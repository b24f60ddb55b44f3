#include "driftforge/io.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "driftforge/errors.hpp"

namespace driftforge::io {

namespace fs = std::filesystem;

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{})
        throw InvalidInputError("could not parse floating-point value '" + s + "'");
    return v;
}

void write_text(const std::string& file, const std::string& content) {
    std::ofstream out(file);
    if (!out) throw Error("cannot open '" + file + "' for writing");
    out << content;
}

json read_json_file(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw Error("cannot open '" + file + "'");
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& err) {
        throw ConfigError("malformed JSON in '" + file + "': " + err.what());
    }
    return j;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(field);
    return out;
}

}  // namespace

void write_path_csv(const std::string& file, const LatentPath& path) {
    std::ofstream out(file);
    if (!out) throw Error("cannot open '" + file + "' for writing");
    out << "time";
    for (Eigen::Index i = 0; i < path.states.rows(); ++i) out << ",x" << i;
    out << "\n";
    for (int n = 0; n <= path.grid.n_steps; ++n) {
        out << format_double(path.grid.time(n));
        for (Eigen::Index i = 0; i < path.states.rows(); ++i)
            out << "," << format_double(path.states(i, n));
        out << "\n";
    }
}

void write_observations_csv(const std::string& file, const ObservationSet& obs,
                            const TimeGrid& grid) {
    std::ofstream out(file);
    if (!out) throw Error("cannot open '" + file + "' for writing");
    out << "time";
    for (Eigen::Index i = 0; i < obs.values.rows(); ++i) out << ",y" << i;
    out << "\n";
    for (std::size_t m = 0; m < obs.indices.size(); ++m) {
        out << format_double(grid.time(obs.indices[m]));
        for (Eigen::Index i = 0; i < obs.values.rows(); ++i)
            out << "," << format_double(obs.values(i, static_cast<Eigen::Index>(m)));
        out << "\n";
    }
}

void write_observations_meta(const std::string& file, const ObservationSet& obs,
                             const TimeGrid& grid, std::uint64_t seed) {
    json j;
    j["delta"] = grid.delta;
    j["n_steps"] = grid.n_steps;
    j["indices"] = obs.indices;
    j["G"] = matrix_to_json(obs.G);
    j["sigma_noise"] = matrix_to_json(obs.sigma_noise);
    j["seed"] = seed;
    write_text(file, j.dump(2) + "\n");
}

ObservationSet read_observations(const std::string& csv_file, const std::string& meta_file,
                                 TimeGrid& grid_out) {
    json meta = read_json_file(meta_file);
    grid_out.delta = meta.at("delta").get<double>();
    grid_out.n_steps = meta.at("n_steps").get<int>();
    ObservationSet obs;
    obs.indices = meta.at("indices").get<std::vector<int>>();
    obs.G = matrix_from_json(meta.at("G"));
    obs.sigma_noise = matrix_from_json(meta.at("sigma_noise"));

    std::ifstream in(csv_file);
    if (!in) throw Error("cannot open '" + csv_file + "'");
    std::string line;
    if (!std::getline(in, line)) throw InvalidInputError("empty observations CSV");
    std::vector<Eigen::VectorXd> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        Eigen::VectorXd v(static_cast<Eigen::Index>(fields.size()) - 1);
        for (std::size_t i = 1; i < fields.size(); ++i)
            v[static_cast<Eigen::Index>(i - 1)] = parse_double(fields[i]);
        rows.push_back(std::move(v));
    }
    if (rows.size() != obs.indices.size())
        throw InvalidInputError("observations CSV row count does not match sidecar indices");
    obs.values.resize(rows.empty() ? 0 : rows[0].size(),
                      static_cast<Eigen::Index>(rows.size()));
    for (std::size_t m = 0; m < rows.size(); ++m)
        obs.values.col(static_cast<Eigen::Index>(m)) = rows[m];
    return obs;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw ConfigError("expected a nested array for a matrix");
    Eigen::MatrixXd m(j.size(), j[0].size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (j[i].size() != static_cast<std::size_t>(m.cols()))
            throw ConfigError("ragged matrix rows in JSON");
        for (std::size_t c = 0; c < j[i].size(); ++c)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
                j[i][c].get<double>();
    }
    return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

Eigen::VectorXd vector_from_json(const json& j) {
    if (!j.is_array()) throw ConfigError("expected an array for a vector");
    Eigen::VectorXd v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i)
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
}

json drift_to_json(const DriftFunction& f) {
    json j;
    j["bandwidth"] = f.kernel().bandwidth;
    j["amplitude"] = f.kernel().amplitude;
    j["dim"] = f.kernel().dim;
    json centers = json::array(), coeffs = json::array();
    for (Eigen::Index c = 0; c < f.size(); ++c) {
        centers.push_back(vector_to_json(f.centers().col(c)));
        coeffs.push_back(vector_to_json(f.coefficients().col(c)));
    }
    j["centers"] = std::move(centers);
    j["coefficients"] = std::move(coeffs);
    return j;
}

DriftFunction drift_from_json(const json& j) {
    Kernel kernel{j.at("bandwidth").get<double>(), j.at("amplitude").get<double>(),
                  j.at("dim").get<int>()};
    const auto& jc = j.at("centers");
    const auto& jb = j.at("coefficients");
    if (jc.size() != jb.size())
        throw ConfigError("drift JSON: centers and coefficients differ in length");
    Eigen::MatrixXd centers(kernel.dim, jc.size()), coeffs(kernel.dim, jb.size());
    for (std::size_t c = 0; c < jc.size(); ++c) {
        centers.col(static_cast<Eigen::Index>(c)) = vector_from_json(jc[c]);
        coeffs.col(static_cast<Eigen::Index>(c)) = vector_from_json(jb[c]);
    }
    return DriftFunction(kernel, std::move(centers), std::move(coeffs));
}

void write_drift(const std::string& file, const DriftFunction& f) {
    write_text(file, drift_to_json(f).dump(2) + "\n");
}

DriftFunction read_drift(const std::string& file) {
    return drift_from_json(read_json_file(file));
}

void write_trace_csv(const std::string& file, const EMTrace& trace) {
    std::ofstream out(file);
    if (!out) throw Error("cannot open '" + file + "' for writing");
    out << "iter,risk,coef_norm,drift_delta,min_ess,resample_count\n";
    for (const auto& r : trace.records)
        out << r.iter << "," << format_double(r.risk) << "," << format_double(r.coef_norm)
            << "," << format_double(r.drift_delta) << "," << format_double(r.min_ess) << ","
            << r.resample_count << "\n";
}

json eval_report_to_json(const EvalReport& report) {
    json j;
    j["mse"] = report.mse;
    if (report.kolmogorov)
        j["kolmogorov"] = *report.kolmogorov;
    else
        j["kolmogorov"] = nullptr;
    j["kolmogorov_diverged"] = report.kolmogorov_diverged;
    j["n_stationary_samples"] = report.n_stationary_samples;
    j["stationary_seed"] = report.stationary_seed;
    j["eval_grid"] = matrix_to_json(report.eval_grid);
    return j;
}

void write_eval_report(const std::string& file, const EvalReport& report) {
    write_text(file, eval_report_to_json(report).dump(2) + "\n");
}

void write_particles(const std::string& dir, const ParticleEnsemble& ensemble) {
    fs::create_directories(dir);
    {
        std::ofstream out(fs::path(dir) / "resample_log.csv");
        out << "obs_index,ess,resampled\n";
        for (const auto& ev : ensemble.resample_log)
            out << ev.obs_index << "," << format_double(ev.ess) << ","
                << (ev.resampled ? 1 : 0) << "\n";
    }
    {
        std::ofstream out(fs::path(dir) / "weights.csv");
        out << "particle,weight,log_weight\n";
        for (Eigen::Index l = 0; l < ensemble.weights.size(); ++l)
            out << l << "," << format_double(ensemble.weights[l]) << ","
                << format_double(ensemble.log_weights[l]) << "\n";
    }
    for (std::size_t l = 0; l < ensemble.paths.size(); ++l) {
        LatentPath p{ensemble.grid, ensemble.paths[l]};
        write_path_csv((fs::path(dir) / ("path_" + std::to_string(l) + ".csv")).string(), p);
    }
}

}  // namespace driftforge::io
