// Copyright 2026 The realclock Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Batch experiment runner behind the realclock command line tool: JSON
// configuration, the five experiment types, CSV artifacts and summary.txt.
//
// Exit statuses: 0 all checks passed, 1 a check failed (or the run aborted),
// 2 the configuration or a referenced file could not be read or parsed,
// 3 a numeric bound of the target module is violated.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "realclock/classical_dynamics.hpp"
#include "realclock/clock_models.hpp"
#include "realclock/effective_bath.hpp"
#include "realclock/errors.hpp"
#include "realclock/master_equation.hpp"
#include "realclock/monte_carlo.hpp"
#include "realclock/numeric.hpp"
#include "realclock/quantum_core.hpp"

namespace realclock {

namespace fs = std::filesystem;
using json = nlohmann::json;

enum class ExperimentKind { ClockStats, DephasingCompare, MasterTrajectory, ClassicalDiffusion, BathSpectrum };

inline const char* to_string(ExperimentKind kind) {
    switch (kind) {
    case ExperimentKind::ClockStats: return "clock_stats";
    case ExperimentKind::DephasingCompare: return "dephasing_compare";
    case ExperimentKind::MasterTrajectory: return "master_trajectory";
    case ExperimentKind::ClassicalDiffusion: return "classical_diffusion";
    case ExperimentKind::BathSpectrum: return "bath_spectrum";
    }
    return "?";
}

enum class ClassicalInitial { Delta, VonMises, Uniform };

/// Fully resolved configuration: every default is filled in.
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::ClockStats;
    std::optional<ClockParams> clock;
    std::optional<Hamiltonian> hamiltonian;
    std::optional<DensityMatrix> rho0;

    double dt = 0.0;
    double horizon = 0.0;
    std::size_t n_paths = 0;
    std::size_t n_grid = 0;
    std::uint64_t seed = 1;
    std::size_t record_every = 1;
    double tolerance = 0.0;

    // classical_diffusion
    double classical_omega = 1.0;
    ClassicalInitial classical_initial = ClassicalInitial::Delta;
    double phi0 = 0.0;
    double concentration = 1.0;
    std::size_t n_snapshots = 100;

    // bath_spectrum
    double omega_max = 0.0;
    std::size_t n_frequencies = 0;
    double temperature_product = 1.0;

    fs::path output_dir;
};

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<fs::path> output_dir;
};

// ---------------------------------------------------------------------------
// Presets

inline json preset(const std::string& name) {
    if (name == "qubit-dephasing") {
        return json::parse(R"({
            "experiment": "dephasing_compare",
            "clock": {"model": "ornstein_uhlenbeck", "theta": 0.1, "kappa": 0.005},
            "system": {"energies": [0, 1]},
            "initial_state": "plus",
            "numeric": {"dt": 0.005, "horizon": 100, "n_paths": 10000, "seed": 1, "record_every": 200},
            "output_dir": "out/qubit-dephasing"
        })");
    }
    if (name == "classical-release") {
        return json::parse(R"({
            "experiment": "classical_diffusion",
            "clock": {"model": "ornstein_uhlenbeck", "theta": 1, "kappa": 0.1},
            "classical": {"omega": 1, "initial": "delta", "phi0": 0, "n_snapshots": 100},
            "numeric": {"n_grid": 256, "horizon": 2000},
            "output_dir": "out/classical-release"
        })");
    }
    throw ParseError("unknown preset '" + name + "' (expected qubit-dephasing or classical-release)");
}

namespace detail {

inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
    // nlohmann reports the 1-based byte offset of the offending character.
    const std::size_t end = std::min(byte > 0 ? byte - 1 : 0, text.size());
    std::size_t line = 1;
    std::size_t column = 1;
    for (std::size_t i = 0; i < end; ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return {line, column};
}

inline void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) {
        throw ParseError(where + ": expected an object");
    }
    for (const auto& item : obj.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return item.key() == k; })) {
            throw ParseError(where + ": unknown key '" + item.key() + "'");
        }
    }
}

inline std::optional<double> opt_number(const json& obj, const std::string& where, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
        return std::nullopt;
    }
    if (!it->is_number()) {
        throw ParseError(where + "." + key + ": expected a number");
    }
    return it->get<double>();
}

inline std::optional<std::uint64_t> opt_count(const json& obj, const std::string& where, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
        return std::nullopt;
    }
    if (!it->is_number_unsigned()) {
        throw ParseError(where + "." + key + ": expected a non-negative integer");
    }
    return it->get<std::uint64_t>();
}

inline std::optional<std::string> opt_string(const json& obj, const std::string& where, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
        return std::nullopt;
    }
    if (!it->is_string()) {
        throw ParseError(where + "." + key + ": expected a string");
    }
    return it->get<std::string>();
}

inline std::vector<double> number_array(const json& value, const std::string& where) {
    if (!value.is_array()) {
        throw ParseError(where + ": expected an array of numbers");
    }
    std::vector<double> out;
    for (const auto& v : value) {
        if (!v.is_number()) {
            throw ParseError(where + ": expected an array of numbers");
        }
        out.push_back(v.get<double>());
    }
    return out;
}

inline fs::path resolve(const fs::path& base, const std::string& file) {
    const fs::path p(file);
    return p.is_absolute() ? p : base / p;
}

/// Two-column text table "tau,c" (or whitespace separated); '#' comments and a
/// non-numeric header line are skipped.
inline CorrelationTable read_correlation_table(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open correlation table '" + path.string() + "'");
    }
    CorrelationTable table;
    std::string line;
    std::size_t line_no = 0;
    bool header_allowed = true;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') {
            continue;
        }
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        double tau = 0.0;
        double c = 0.0;
        std::string extra;
        if (!(ss >> tau >> c) || (ss >> extra)) {
            if (header_allowed) {
                header_allowed = false;
                continue;
            }
            throw ParseError("correlation table: expected 'tau,c'", line_no, 1);
        }
        header_allowed = false;
        table.tau.push_back(tau);
        table.c.push_back(c);
    }
    return table;
}

inline ClockParams parse_clock(const json& j, const fs::path& base) {
    const std::string where = "clock";
    const std::string model = opt_string(j, where, "model").value_or("ornstein_uhlenbeck");
    const double epsilon = opt_number(j, where, "epsilon").value_or(1.0);
    if (model == "ornstein_uhlenbeck") {
        check_keys(j, where, {"model", "theta", "kappa", "epsilon"});
        const auto theta = opt_number(j, where, "theta");
        const auto kappa = opt_number(j, where, "kappa");
        if (!theta || !kappa) {
            throw ParseError("clock: theta and kappa are required");
        }
        return ClockParams::ornstein_uhlenbeck(*theta, *kappa, epsilon);
    }
    if (model == "tabulated") {
        check_keys(j, where, {"model", "tau", "c", "file", "epsilon"});
        CorrelationTable table;
        if (const auto file = opt_string(j, where, "file")) {
            if (j.contains("tau") || j.contains("c")) {
                throw ParseError("clock: give either file or tau/c arrays");
            }
            table = read_correlation_table(resolve(base, *file));
        } else {
            if (!j.contains("tau") || !j.contains("c")) {
                throw ParseError("clock: tabulated model needs tau and c arrays or a file");
            }
            table.tau = number_array(j.at("tau"), "clock.tau");
            table.c = number_array(j.at("c"), "clock.c");
        }
        return ClockParams::tabulated(std::move(table), epsilon);
    }
    throw ParseError("clock.model: expected ornstein_uhlenbeck or tabulated");
}

inline Matrix parse_json_matrix(const json& value, const std::string& where) {
    if (!value.is_array() || value.empty()) {
        throw ParseError(where + ": expected a non-empty array of rows");
    }
    const auto n = static_cast<Eigen::Index>(value.size());
    if (n > kMaxDim) {
        throw ParseError(where + ": dimension exceeds 64");
    }
    Matrix m(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const json& row = value[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
            throw ParseError(where + ": rows must have " + std::to_string(n) + " entries");
        }
        for (Eigen::Index c = 0; c < n; ++c) {
            const json& e = row[static_cast<std::size_t>(c)];
            if (e.is_number()) {
                m(r, c) = Complex(e.get<double>(), 0.0);
            } else if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number()) {
                m(r, c) = Complex(e[0].get<double>(), e[1].get<double>());
            } else {
                throw ParseError(where + ": entries must be numbers or [re, im] pairs");
            }
        }
    }
    return m;
}

inline Matrix matrix_source(const json& j, const std::string& where, const fs::path& base) {
    if (j.contains("file") == j.contains("matrix")) {
        throw ParseError(where + ": give exactly one of file or matrix");
    }
    if (const auto file = opt_string(j, where, "file")) {
        return load_matrix(resolve(base, *file).string());
    }
    return parse_json_matrix(j.at("matrix"), where + ".matrix");
}

inline Hamiltonian parse_system(const json& j, const fs::path& base) {
    check_keys(j, "system", {"energies", "file", "matrix"});
    if (j.contains("energies")) {
        if (j.size() != 1) {
            throw ParseError("system: energies cannot be combined with file or matrix");
        }
        const auto energies = number_array(j.at("energies"), "system.energies");
        if (energies.empty() || energies.size() > static_cast<std::size_t>(kMaxDim)) {
            throw ParseError("system.energies: need between 1 and 64 levels");
        }
        return Hamiltonian::diagonal(energies);
    }
    return Hamiltonian(matrix_source(j, "system", base));
}

inline DensityMatrix parse_initial_state(const json& j, const Hamiltonian& h, const fs::path& base) {
    const int dim = h.dim();
    if (j.is_string()) {
        const auto name = j.get<std::string>();
        if (name == "plus") {
            return DensityMatrix::plus(dim);
        }
        if (name == "maximally_mixed") {
            return DensityMatrix::maximally_mixed(dim);
        }
        if (name == "ground") {
            Matrix r = Matrix::Zero(dim, dim);
            r(0, 0) = 1.0;
            return DensityMatrix::from_matrix(h.from_eigenbasis(r));
        }
        throw ParseError("initial_state: expected plus, maximally_mixed, ground or an object");
    }
    check_keys(j, "initial_state", {"basis", "energy_level", "file", "matrix"});
    if (j.size() != 1) {
        throw ParseError("initial_state: give exactly one of basis, energy_level, file or matrix");
    }
    if (const auto k = opt_count(j, "initial_state", "basis")) {
        if (*k >= static_cast<std::uint64_t>(dim)) {
            throw ParseError("initial_state.basis: index out of range");
        }
        return DensityMatrix::basis_state(dim, static_cast<int>(*k));
    }
    if (const auto k = opt_count(j, "initial_state", "energy_level")) {
        if (*k >= static_cast<std::uint64_t>(dim)) {
            throw ParseError("initial_state.energy_level: index out of range");
        }
        Matrix r = Matrix::Zero(dim, dim);
        r(static_cast<Eigen::Index>(*k), static_cast<Eigen::Index>(*k)) = 1.0;
        return DensityMatrix::from_matrix(h.from_eigenbasis(r));
    }
    return DensityMatrix::from_matrix(matrix_source(j, "initial_state", base));
}

inline std::size_t stride_for(std::size_t n_steps, std::size_t points) {
    return std::max<std::size_t>(1, n_steps / points);
}

} // namespace detail

/// Parses a configuration document. Relative file references resolve against
/// base_dir. Throws ParseError (status 2) or ParameterError (status 3).
inline ExperimentConfig parse_config(const std::string& text, const fs::path& base_dir,
                                     const Overrides& overrides = {}) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, column] = detail::line_column(text, e.byte);
        throw ParseError("invalid JSON at line " + std::to_string(line) + ", column " + std::to_string(column),
                         line, column);
    }
    if (!doc.is_object()) {
        throw ParseError("configuration must be a JSON object", 1, 1);
    }
    if (const auto name = detail::opt_string(doc, "config", "preset")) {
        json merged = preset(*name);
        doc.erase("preset");
        merged.merge_patch(doc);
        doc = std::move(merged);
    }
    detail::check_keys(doc, "config",
                       {"experiment", "clock", "system", "initial_state", "numeric", "classical", "bath", "output_dir"});

    ExperimentConfig cfg;
    const auto kind = detail::opt_string(doc, "config", "experiment");
    if (!kind) {
        throw ParseError("config: experiment is required");
    }
    static const ExperimentKind kinds[] = {ExperimentKind::ClockStats, ExperimentKind::DephasingCompare,
                                           ExperimentKind::MasterTrajectory, ExperimentKind::ClassicalDiffusion,
                                           ExperimentKind::BathSpectrum};
    const auto found = std::find_if(std::begin(kinds), std::end(kinds),
                                    [&](ExperimentKind k) { return *kind == to_string(k); });
    if (found == std::end(kinds)) {
        throw ParseError("config.experiment: unknown experiment '" + *kind + "'");
    }
    cfg.kind = *found;

    if (!doc.contains("clock")) {
        throw ParseError("config: clock is required");
    }
    detail::check_keys(doc.at("clock"), "clock", {"model", "theta", "kappa", "epsilon", "tau", "c", "file"});
    cfg.clock = detail::parse_clock(doc.at("clock"), base_dir);
    const ClockParams& clock = *cfg.clock;

    const bool quantum = cfg.kind == ExperimentKind::DephasingCompare || cfg.kind == ExperimentKind::MasterTrajectory;
    if (doc.contains("system")) {
        cfg.hamiltonian = detail::parse_system(doc.at("system"), base_dir);
    } else if (quantum) {
        throw ParseError("config: system is required for " + std::string(to_string(cfg.kind)));
    }
    if (cfg.hamiltonian) {
        cfg.rho0 = doc.contains("initial_state")
                       ? detail::parse_initial_state(doc.at("initial_state"), *cfg.hamiltonian, base_dir)
                       : DensityMatrix::plus(cfg.hamiltonian->dim());
    } else if (doc.contains("initial_state")) {
        throw ParseError("config: initial_state needs a system");
    }

    const json numeric = doc.value("numeric", json::object());
    detail::check_keys(numeric, "numeric",
                       {"dt", "horizon", "n_paths", "n_grid", "seed", "record_every", "tolerance"});
    const auto dt = detail::opt_number(numeric, "numeric", "dt");
    const auto horizon = detail::opt_number(numeric, "numeric", "horizon");
    const auto n_paths = detail::opt_count(numeric, "numeric", "n_paths");
    const auto n_grid = detail::opt_count(numeric, "numeric", "n_grid");
    const auto record_every = detail::opt_count(numeric, "numeric", "record_every");
    const auto tolerance = detail::opt_number(numeric, "numeric", "tolerance");
    cfg.seed = overrides.seed.value_or(detail::opt_count(numeric, "numeric", "seed").value_or(1));

    const json classical = doc.value("classical", json::object());
    detail::check_keys(classical, "classical", {"omega", "initial", "phi0", "concentration", "n_snapshots"});
    const json bath = doc.value("bath", json::object());
    detail::check_keys(bath, "bath", {"omega_max", "n_points", "temperature_product"});

    if (overrides.output_dir) {
        cfg.output_dir = *overrides.output_dir;
    } else {
        cfg.output_dir = detail::resolve(base_dir, detail::opt_string(doc, "config", "output_dir").value_or("out"));
    }

    const double theta = clock.theta();
    switch (cfg.kind) {
    case ExperimentKind::ClockStats: {
        cfg.dt = dt.value_or(theta / 20.0);
        cfg.horizon = horizon.value_or(50.0 * theta);
        cfg.n_paths = n_paths.value_or(1000);
        cfg.tolerance = tolerance.value_or(0.1);
        if (clock.model() != CorrelationModel::OrnsteinUhlenbeck) {
            throw ParameterError("clock_stats: path sampling requires an Ornstein-Uhlenbeck clock");
        }
        if (cfg.n_paths < 1) {
            throw ParameterError("clock_stats: n_paths must be at least 1");
        }
        if (!(cfg.dt > 0.0) || cfg.dt > theta / 20.0 * (1.0 + 1e-12)) {
            throw ParameterError("clock_stats: dt must satisfy 0 < dt <= theta/20");
        }
        if (!(cfg.horizon >= 4.0 * cfg.dt) || !std::isfinite(cfg.horizon)) {
            throw ParameterError("clock_stats: horizon must cover at least four steps");
        }
        break;
    }
    case ExperimentKind::DephasingCompare: {
        const double w = cfg.hamiltonian->max_gap();
        cfg.dt = dt.value_or(w > 0.0 ? std::min(theta / 20.0, 0.1 / w) : theta / 20.0);
        cfg.horizon = horizon.value_or(1000.0 * theta);
        cfg.n_paths = n_paths.value_or(1000);
        if (!(cfg.dt > 0.0) || !(cfg.horizon > 0.0)) {
            throw ParameterError("dephasing_compare: dt and horizon must be positive");
        }
        cfg.record_every = record_every.value_or(detail::stride_for(detail::grid_intervals(cfg.horizon, cfg.dt), 100));
        if (cfg.hamiltonian->dim() < 2) {
            throw ParameterError("dephasing_compare: need at least two levels");
        }
        validate(EnsembleSpec{clock, *cfg.hamiltonian, *cfg.rho0, cfg.n_paths, cfg.horizon, cfg.dt, cfg.seed,
                              cfg.record_every});
        break;
    }
    case ExperimentKind::MasterTrajectory: {
        MasterParams probe{*cfg.hamiltonian, clock.diffusion(), 1.0};
        const double bound = max_stable_step(probe);
        const auto rate = slowest_decay_rate(probe);
        cfg.horizon = horizon.value_or(rate ? 5.0 / *rate : 10.0);
        cfg.dt = dt.value_or(std::isfinite(bound) ? 0.05 * bound : 0.01 * cfg.horizon);
        cfg.tolerance = tolerance.value_or(1e-8);
        if (!(cfg.horizon > 0.0) || !std::isfinite(cfg.horizon)) {
            throw ParameterError("master_trajectory: horizon must be positive and finite");
        }
        validate(MasterParams{*cfg.hamiltonian, clock.diffusion(), cfg.dt});
        cfg.record_every = record_every.value_or(detail::stride_for(detail::grid_intervals(cfg.horizon, cfg.dt), 200));
        if (cfg.record_every < 1) {
            throw ParameterError("master_trajectory: record_every must be at least 1");
        }
        break;
    }
    case ExperimentKind::ClassicalDiffusion: {
        cfg.classical_omega = detail::opt_number(classical, "classical", "omega").value_or(1.0);
        const std::string initial = detail::opt_string(classical, "classical", "initial").value_or("delta");
        if (initial == "delta") {
            cfg.classical_initial = ClassicalInitial::Delta;
        } else if (initial == "von_mises") {
            cfg.classical_initial = ClassicalInitial::VonMises;
        } else if (initial == "uniform") {
            cfg.classical_initial = ClassicalInitial::Uniform;
        } else {
            throw ParseError("classical.initial: expected delta, von_mises or uniform");
        }
        cfg.phi0 = detail::opt_number(classical, "classical", "phi0").value_or(0.0);
        cfg.concentration = detail::opt_number(classical, "classical", "concentration").value_or(1.0);
        cfg.n_snapshots = detail::opt_count(classical, "classical", "n_snapshots").value_or(100);
        cfg.n_grid = n_grid.value_or(256);
        cfg.horizon = horizon.value_or(50.0);
        cfg.tolerance = tolerance.value_or(1e-3);
        const double bound = max_grid_step(std::max<std::size_t>(cfg.n_grid, 1), cfg.classical_omega,
                                           clock.diffusion());
        cfg.dt = dt.value_or(std::isfinite(bound) ? 0.9 * bound : 0.01);
        if (!std::isfinite(cfg.classical_omega) || !std::isfinite(cfg.phi0) || !(cfg.concentration >= 0.0)) {
            throw ParameterError("classical_diffusion: omega, phi0 and concentration must be finite");
        }
        if (cfg.n_grid < 8) {
            throw ParameterError("classical_diffusion: n_grid must be at least 8");
        }
        if (cfg.n_snapshots < 2) {
            throw ParameterError("classical_diffusion: n_snapshots must be at least 2");
        }
        if (!(cfg.horizon > 0.0) || !std::isfinite(cfg.horizon)) {
            throw ParameterError("classical_diffusion: horizon must be positive and finite");
        }
        if (!(cfg.dt > 0.0) || cfg.dt > bound * (1.0 + 1e-12)) {
            throw ParameterError("classical_diffusion: dt = " + format_double(cfg.dt) +
                                 " violates the stability bound " + format_double(bound));
        }
        break;
    }
    case ExperimentKind::BathSpectrum: {
        cfg.omega_max = detail::opt_number(bath, "bath", "omega_max").value_or(50.0 / theta);
        cfg.n_frequencies = detail::opt_count(bath, "bath", "n_points").value_or(501);
        cfg.temperature_product = detail::opt_number(bath, "bath", "temperature_product").value_or(1.0);
        if (!(cfg.omega_max > 0.0) || !std::isfinite(cfg.omega_max) || cfg.n_frequencies < 2) {
            throw ParameterError("bath_spectrum: need omega_max > 0 and n_points >= 2");
        }
        if (!(cfg.temperature_product > 0.0) || !std::isfinite(cfg.temperature_product)) {
            throw ParameterError("bath_spectrum: temperature_product must be positive");
        }
        break;
    }
    }
    return cfg;
}

inline ExperimentConfig load_config(const fs::path& path, const Overrides& overrides = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ParseError("cannot open config '" + path.string() + "'");
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), path.parent_path(), overrides);
}

// ---------------------------------------------------------------------------
// Derived quantities

struct DerivedQuantities {
    double diffusion = 0.0;
    double noise_ratio = 0.0; // kappa / theta
    bool good_clock = true;
    std::optional<double> zeta;
    std::optional<double> period_of_applicability;
    std::optional<double> theta_max_omega;
    bool markov_questionable = false;
    std::vector<std::string> warnings;
};

inline DerivedQuantities derive(const ExperimentConfig& cfg) {
    const ClockParams& clock = *cfg.clock;
    DerivedQuantities d;
    d.diffusion = clock.diffusion();
    d.noise_ratio = clock.noise_ratio();
    d.good_clock = clock.good_clock();
    std::optional<double> max_omega;
    if (cfg.kind == ExperimentKind::ClassicalDiffusion) {
        const double w = std::abs(cfg.classical_omega);
        if (w > 0.0) {
            d.zeta = 1.0 / w;
        }
        max_omega = w;
    } else if (cfg.hamiltonian) {
        d.zeta = cfg.hamiltonian->zeta();
        max_omega = cfg.hamiltonian->max_gap();
    }
    if (d.zeta && !clock.ideal()) {
        d.period_of_applicability = period_of_applicability(clock, *d.zeta);
    }
    if (max_omega) {
        d.theta_max_omega = clock.theta() * *max_omega;
        d.markov_questionable = *d.theta_max_omega > 1.0;
    }
    if (!d.good_clock) {
        d.warnings.push_back("outside good-clock regime (kappa/theta = " + format_double(d.noise_ratio) +
                             ", threshold " + format_double(kGoodClockRatio) + ")");
    }
    if (d.markov_questionable) {
        d.warnings.push_back("Markov approximation questionable (theta max|omega_nm| = " +
                             format_double(*d.theta_max_omega) + " > 1)");
    }
    return d;
}

inline void write_derived(std::ostream& out, const DerivedQuantities& d) {
    out << "D = " << format_double(d.diffusion) << '\n'
        << "kappa_over_theta = " << format_double(d.noise_ratio) << '\n'
        << "good_clock = " << (d.good_clock ? "true" : "false") << '\n'
        << "zeta = " << format_optional(d.zeta) << '\n'
        << "period_of_applicability = " << format_optional(d.period_of_applicability) << '\n'
        << "theta_max_omega = " << format_optional(d.theta_max_omega) << '\n'
        << "markov_questionable = " << (d.markov_questionable ? "true" : "false") << '\n';
}

// ---------------------------------------------------------------------------
// Running

struct Check {
    std::string name;
    bool passed = false;
};

struct RunResult {
    std::vector<Check> checks;
    std::string error; // set when the run aborted

    bool passed() const {
        return error.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
    }
};

namespace detail {

class Runner {
public:
    Runner(const ExperimentConfig& cfg, unsigned threads) : cfg_(cfg), threads_(threads) {}

    RunResult run() {
        fs::create_directories(cfg_.output_dir);
        header();
        try {
            switch (cfg_.kind) {
            case ExperimentKind::ClockStats: clock_stats(); break;
            case ExperimentKind::DephasingCompare: dephasing_compare(); break;
            case ExperimentKind::MasterTrajectory: master_trajectory(); break;
            case ExperimentKind::ClassicalDiffusion: classical_diffusion(); break;
            case ExperimentKind::BathSpectrum: bath_spectrum(); break;
            }
        } catch (const std::exception& e) {
            result_.error = e.what();
        }
        for (const auto& c : result_.checks) {
            summary_ << "check." << c.name << " = " << (c.passed ? "pass" : "fail") << '\n';
        }
        if (!result_.error.empty()) {
            summary_ << "error = " << result_.error << '\n';
        }
        summary_ << "status = " << (result_.passed() ? "pass" : "fail") << '\n';
        write("summary.txt", [&](std::ostream& out) { out << summary_.str(); });
        return result_;
    }

private:
    void write(const std::string& name, const std::function<void(std::ostream&)>& body) {
        const fs::path path = cfg_.output_dir / name;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IntegrityError("cannot write '" + path.string() + "'");
        }
        body(out);
        if (!out) {
            throw IntegrityError("write to '" + path.string() + "' failed");
        }
    }

    void check(const std::string& name, bool passed) { result_.checks.push_back({name, passed}); }

    void kv(const std::string& key, double value) { summary_ << key << " = " << format_double(value) << '\n'; }
    void kv(const std::string& key, const std::optional<double>& value) {
        summary_ << key << " = " << format_optional(value) << '\n';
    }
    void kv(const std::string& key, std::size_t value) { summary_ << key << " = " << value << '\n'; }
    void kv(const std::string& key, bool value) { summary_ << key << " = " << (value ? "true" : "false") << '\n'; }

    void header() {
        const ClockParams& clock = *cfg_.clock;
        summary_ << "experiment = " << to_string(cfg_.kind) << '\n' << "seed = " << cfg_.seed << '\n';
        summary_ << "clock.model = "
                 << (clock.model() == CorrelationModel::OrnsteinUhlenbeck ? "ornstein_uhlenbeck" : "tabulated") << '\n';
        kv("clock.theta", clock.theta());
        kv("clock.kappa", clock.kappa());
        kv("clock.epsilon", clock.epsilon());
        if (cfg_.hamiltonian) {
            kv("system.dim", static_cast<std::size_t>(cfg_.hamiltonian->dim()));
        }
        const auto derived = derive(cfg_);
        write_derived(summary_, derived);
        for (const auto& w : derived.warnings) {
            summary_ << "warning = " << w << '\n';
        }
    }

    void clock_stats() {
        const ClockParams& clock = *cfg_.clock;
        kv("dt", cfg_.dt);
        kv("horizon", cfg_.horizon);
        std::vector<NoisePath> paths;
        paths.reserve(cfg_.n_paths);
        for (std::size_t p = 0; p < cfg_.n_paths; ++p) {
            paths.push_back(sample_ou_path(clock, cfg_.horizon, cfg_.dt, cfg_.seed, p));
        }
        const ClockStats stats = estimate_stats(paths);
        write_stats_report(summary_, stats);
        write("path.csv", [&](std::ostream& out) { write_path_csv(out, paths.front()); });
        write("correlation.csv", [&](std::ostream& out) {
            out << "lag,tau,c_hat,c_model\n";
            for (std::size_t j = 0; j < stats.c_hat.size(); ++j) {
                const double tau = static_cast<double>(j) * stats.step;
                const double row[] = {static_cast<double>(j), tau, stats.c_hat[j], correlation(clock, tau)};
                write_csv_row(out, row);
            }
        });

        // The path variance <Delta(t)^2> = 2 kappa^2 (t/theta - 1 + exp(-t/theta))
        // grows with slope 2 kappa^2 / theta = 2 D at large t.
        const double slope_model = 2.0 * clock.diffusion();
        kv("variance_slope_model", slope_model);
        if (clock.ideal()) {
            const bool zero = stats.mean_alpha == 0.0 && stats.c_hat[0] == 0.0 && stats.kappa_hat == 0.0 &&
                              stats.variance_slope.value_or(0.0) == 0.0;
            check("all_zero_statistics", zero);
            return;
        }
        const double tol = cfg_.tolerance;
        auto within = [&](const std::optional<double>& est, double truth) {
            return est && std::abs(*est / truth - 1.0) < tol;
        };
        kv("tolerance", tol);
        check("theta_recovery", within(stats.theta_hat, clock.theta()));
        check("kappa_recovery", within(stats.kappa_hat, clock.kappa()));
        check("variance_slope", within(stats.variance_slope, slope_model));
    }

    void dephasing_compare() {
        const EnsembleSpec spec{*cfg_.clock, *cfg_.hamiltonian, *cfg_.rho0,   cfg_.n_paths,
                                cfg_.horizon, cfg_.dt,          cfg_.seed,    cfg_.record_every};
        kv("dt", cfg_.dt);
        kv("horizon", cfg_.horizon);
        kv("record_every", cfg_.record_every);
        const ComparisonReport report = compare_to_master(spec, EnsembleOptions{threads_});
        write_comparison_summary(summary_, report);
        write("comparison.csv", [&](std::ostream& out) { write_comparison_csv(out, report); });

        double late_z = 0.0;
        double late_z_modulus = 0.0;
        for (const auto& p : report.points) {
            if (p.t >= 10.0 * cfg_.clock->theta()) {
                late_z = std::max(late_z, std::abs(p.z_markov));
                late_z_modulus = std::max(late_z_modulus, std::abs(p.z_markov_modulus));
            }
        }
        kv("max_abs_z_markov_late", late_z);
        kv("max_abs_z_markov_late_modulus", late_z_modulus);
        check("z_gauss_fraction", report.z_criterion_met());
        // The Markov curve is only expected to hold inside the good-clock regime.
        if (cfg_.clock->good_clock() && !report.markov_questionable) {
            check("markov_late", late_z < 4.0);
        }
    }

    void master_trajectory() {
        const MasterParams params{*cfg_.hamiltonian, cfg_.clock->diffusion(), cfg_.dt};
        const Hamiltonian& h = params.hamiltonian;
        kv("dt", cfg_.dt);
        kv("horizon", cfg_.horizon);
        kv("record_every", cfg_.record_every);
        const Trajectory traj = integrate(params, *cfg_.rho0, cfg_.horizon, cfg_.record_every);

        Trajectory exact;
        double max_dev = 0.0;
        bool monotone = true;
        for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
            const auto& s = traj.snapshots[i];
            auto rho = solve_exact(params, *cfg_.rho0, s.t);
            max_dev = std::max(max_dev, (s.rho.matrix() - rho.matrix()).cwiseAbs().maxCoeff());
            const double entropy = von_neumann_entropy(rho);
            exact.snapshots.push_back({s.t, std::move(rho), entropy});
            if (i > 0 && s.entropy < traj.snapshots[i - 1].entropy - 1e-10) {
                monotone = false;
            }
        }
        write("trajectory.csv", [&](std::ostream& out) { write_trajectory_csv(out, traj); });
        write("exact.csv", [&](std::ostream& out) { write_trajectory_csv(out, exact); });

        kv("steps", traj.steps);
        kv("beyond_applicability", traj.beyond_applicability);
        kv("slowest_decay_rate", slowest_decay_rate(params));
        kv("max_dev_rk4_vs_exact", max_dev);
        kv("max_trace_error", traj.max_trace_error);
        kv("max_hermiticity_error", traj.max_hermiticity_error);
        kv("min_eigenvalue", traj.min_eigenvalue);
        kv("tolerance", cfg_.tolerance);
        check("exact_solution", max_dev < cfg_.tolerance);
        check("entropy_monotone", monotone);
        check("trace_preserved", traj.max_trace_error < 1e-10);
        check("positivity", traj.min_eigenvalue >= -kPositivityTol);

        // |rho_01| in the energy basis decays at omega_01^2 D.
        if (h.dim() >= 2 && params.diffusion > 0.0) {
            const double w = h.omega(0, 1);
            const double initial = std::abs(h.to_eigenbasis(cfg_.rho0->matrix())(0, 1));
            std::vector<double> t;
            std::vector<double> y;
            for (const auto& s : traj.snapshots) {
                const double v = std::abs(h.to_eigenbasis(s.rho.matrix())(0, 1));
                if (v > 1e-6 * initial) {
                    t.push_back(s.t);
                    y.push_back(v);
                }
            }
            const double expected = w * w * params.diffusion;
            kv("decay_rate_model", expected);
            if (initial > 0.0 && expected > 0.0 && t.size() >= 3) {
                const double fitted = fit_exponential_rate(t, y);
                kv("decay_rate_fit", fitted);
                check("decay_rate", std::abs(fitted / expected - 1.0) < 5e-3);
            }
        }
    }

    void classical_diffusion() {
        const double omega = cfg_.classical_omega;
        const double diffusion = cfg_.clock->diffusion();
        const std::size_t n = cfg_.n_grid;
        const int max_mode = default_max_mode(n);
        const bool delta = cfg_.classical_initial == ClassicalInitial::Delta;
        kv("omega", omega);
        kv("n_grid", n);
        kv("dt", cfg_.dt);
        kv("horizon", cfg_.horizon);
        summary_ << "initial = "
                 << (delta ? "delta" : cfg_.classical_initial == ClassicalInitial::VonMises ? "von_mises" : "uniform")
                 << '\n';

        std::optional<AngleDistribution> grid;
        FourierModes modes0 = delta_release(cfg_.phi0, max_mode);
        if (!delta) {
            grid = cfg_.classical_initial == ClassicalInitial::VonMises
                       ? AngleDistribution::von_mises(n, cfg_.phi0, cfg_.concentration, omega, diffusion)
                       : AngleDistribution::uniform(n, omega, diffusion);
            modes0 = modes_from_density(grid->values(), max_mode);
        }

        std::vector<double> times;
        std::vector<double> mode1_spectral;
        std::vector<double> mode1_grid;
        double grid_vs_spectral = 0.0;
        double probability_drift = 0.0;
        std::ostringstream snapshots;
        snapshots << "t,mode1_spectral,mean_angle,circular_variance,wrapped_variance";
        if (grid) {
            snapshots << ",mode1_grid,grid_vs_spectral";
        }
        snapshots << '\n';

        FourierModes modes = modes0;
        std::vector<double> spectral;
        for (std::size_t k = 0; k <= cfg_.n_snapshots; ++k) {
            const double t = cfg_.horizon * static_cast<double>(k) / static_cast<double>(cfg_.n_snapshots);
            if (k > 0 && grid) {
                const double t_prev =
                    cfg_.horizon * static_cast<double>(k - 1) / static_cast<double>(cfg_.n_snapshots);
                grid = evolve_grid(*grid, t - t_prev, cfg_.dt);
            }
            modes = evolve_modes(modes0, omega, diffusion, t);
            const CircularStats cs = circular_stats(modes);
            times.push_back(t);
            mode1_spectral.push_back(std::abs(modes[1]));
            std::vector<double> row{t, mode1_spectral.back(), cs.mean_angle, cs.circular_variance,
                                    cs.wrapped_variance};
            if (grid) {
                spectral = density_from_modes(modes, n);
                double diff = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    diff = std::max(diff, std::abs(grid->values()[i] - spectral[i]));
                }
                grid_vs_spectral = std::max(grid_vs_spectral, diff);
                probability_drift = std::max(probability_drift, std::abs(grid->total_probability() - 1.0));
                mode1_grid.push_back(std::abs(modes_from_density(grid->values(), 1)[1]));
                row.push_back(mode1_grid.back());
                row.push_back(diff);
            }
            write_csv_row(snapshots, row);
        }
        spectral = density_from_modes(modes, n);
        write("snapshots.csv", [&](std::ostream& out) { out << snapshots.str(); });
        write("density_spectral.csv", [&](std::ostream& out) { write_density_csv(out, spectral); });
        write("modes.csv", [&](std::ostream& out) { write_modes_csv(out, modes); });
        if (grid) {
            write("density_grid.csv", [&](std::ostream& out) { write_density_csv(out, grid->values()); });
        }

        double uniform_distance = 0.0;
        for (const double v : spectral) {
            uniform_distance = std::max(uniform_distance, std::abs(v - 1.0 / kTwoPi));
        }
        const double rate = omega * omega * diffusion;
        kv("mode1_decay_rate_model", rate);
        kv("uniform_distance_final", uniform_distance);
        const auto fit = [&](const std::vector<double>& y) -> std::optional<double> {
            std::vector<double> tt;
            std::vector<double> yy;
            for (std::size_t i = 0; i < y.size(); ++i) {
                if (y[i] > 1e-12 * y.front() && y[i] > 0.0) {
                    tt.push_back(times[i]);
                    yy.push_back(y[i]);
                }
            }
            if (tt.size() < 3) {
                return std::nullopt;
            }
            return fit_exponential_rate(tt, yy);
        };
        const bool has_mode1 = mode1_spectral.front() > 1e-12;
        if (rate > 0.0 && has_mode1) {
            const auto spectral_rate = fit(mode1_spectral);
            kv("mode1_decay_rate_spectral", spectral_rate);
            check("mode1_decay_spectral", spectral_rate && std::abs(*spectral_rate / rate - 1.0) < 0.01);
            if (grid) {
                const auto grid_rate = fit(mode1_grid);
                kv("mode1_decay_rate_grid", grid_rate);
                check("mode1_decay_grid", grid_rate && std::abs(*grid_rate / rate - 1.0) < 0.05);
            }
        }
        if (grid) {
            kv("max_grid_vs_spectral", grid_vs_spectral);
            kv("max_probability_drift", probability_drift);
            kv("tolerance", cfg_.tolerance);
            check("grid_vs_spectral", grid_vs_spectral < cfg_.tolerance);
            check("probability_conserved", probability_drift < 1e-10);
        }
        if (rate > 0.0 && cfg_.horizon >= 20.0 / rate) {
            check("uniformization", uniform_distance < 1e-6);
        }
    }

    void bath_spectrum() {
        const ClockParams& clock = *cfg_.clock;
        const auto omegas = frequency_grid(cfg_.omega_max, cfg_.n_frequencies);
        const BathModel bath = make_bath_model(clock, cfg_.temperature_product, omegas);
        kv("omega_max", cfg_.omega_max);
        kv("n_points", cfg_.n_frequencies);
        kv("temperature_product", cfg_.temperature_product);
        std::vector<double> s;
        for (const double w : omegas) {
            s.push_back(spectral_density(clock, w));
        }
        write("spectrum.csv", [&](std::ostream& out) { write_spectrum_csv(out, omegas, s); });
        write("chi_squared.csv", [&](std::ostream& out) {
            out << "omega,chi_squared\n";
            for (std::size_t i = 0; i < omegas.size(); ++i) {
                const double row[] = {bath.omega[i], bath.chi_squared[i]};
                write_csv_row(out, row);
            }
        });
        const double min_s = *std::min_element(s.begin(), s.end());
        kv("min_S", min_s);
        check("non_negative", min_s >= 0.0);
        if (clock.model() != CorrelationModel::OrnsteinUhlenbeck) {
            return;
        }
        const BathConsistencyReport r = bath_consistency_check(clock, omegas);
        write("spectrum_check.csv", [&](std::ostream& out) {
            out << "omega,S,S_quadrature\n";
            for (std::size_t i = 0; i < r.omega.size(); ++i) {
                const double row[] = {r.omega[i], r.s_closed[i], r.s_quadrature[i]};
                write_csv_row(out, row);
            }
        });
        kv("S0", r.s0);
        kv("S0_quadrature", r.s0_quadrature);
        kv("max_relative_error", r.max_relative_error);
        kv("parseval_integral", r.parseval_integral);
        kv("parseval_relative_error", r.parseval_relative_error);
        check("zero_frequency_identity", r.zero_frequency_identity);
        check("closed_form_vs_quadrature", r.max_relative_error < 1e-6);
        check("parseval", r.parseval_relative_error < 1e-4);
    }

    const ExperimentConfig& cfg_;
    unsigned threads_;
    RunResult result_;
    std::ostringstream summary_;
};

} // namespace detail

/// Executes the experiment, writing CSVs and summary.txt into cfg.output_dir.
/// threads only schedules work; outputs do not depend on it.
inline RunResult run_experiment(const ExperimentConfig& cfg, unsigned threads = 0) {
    if (threads == 0) {
        threads = std::max(1u, std::thread::hardware_concurrency());
    }
    return detail::Runner(cfg, threads).run();
}

// ---------------------------------------------------------------------------
// Command entry points

inline int run_command(const fs::path& config, const Overrides& overrides, unsigned threads, std::ostream& out,
                       std::ostream& err) {
    ExperimentConfig cfg;
    try {
        cfg = load_config(config, overrides);
    } catch (const ParseError& e) {
        err << "error: " << e.what();
        if (e.line() > 0 && std::string(e.what()).find("line") == std::string::npos) {
            err << " (line " << e.line() << ", column " << e.column() << ')';
        }
        err << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::out_of_range& e) {
        err << "error: " << e.what() << '\n';
        return 3;
    }
    RunResult result;
    try {
        result = run_experiment(cfg, threads);
    } catch (const std::exception& e) {
        // Output directory could not be created or summary.txt not written.
        err << "error: " << e.what() << '\n';
        return 1;
    }
    for (const auto& c : result.checks) {
        out << c.name << ": " << (c.passed ? "pass" : "FAIL") << '\n';
    }
    if (!result.error.empty()) {
        err << "error: " << result.error << '\n';
    }
    out << "summary: " << (cfg.output_dir / "summary.txt").string() << '\n';
    return result.passed() ? 0 : 1;
}

inline int validate_command(const fs::path& config, const Overrides& overrides, std::ostream& out,
                            std::ostream& err) {
    try {
        const ExperimentConfig cfg = load_config(config, overrides);
        const DerivedQuantities d = derive(cfg);
        out << "experiment = " << to_string(cfg.kind) << '\n';
        write_derived(out, d);
        for (const auto& w : d.warnings) {
            out << "warning: " << w << '\n';
        }
        out << "valid\n";
        return 0;
    } catch (const ParseError& e) {
        err << "error: " << e.what();
        if (e.line() > 0 && std::string(e.what()).find("line") == std::string::npos) {
            err << " (line " << e.line() << ", column " << e.column() << ')';
        }
        err << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::out_of_range& e) {
        err << "error: " << e.what() << '\n';
        return 3;
    }
}

} // namespace realclock
