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

// Real-clock master equation
//
//     d rho/dt = -i [H, rho] - D [H, [H, rho]],   D = kappa^2 / theta,
//
// integrated with fixed-step RK4, and its closed-form solution
// rho_nm(t) = rho_nm(0) exp(-i omega_nm t - omega_nm^2 D t) in the energy basis.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "realclock/clock_models.hpp"
#include "realclock/errors.hpp"
#include "realclock/numeric.hpp"
#include "realclock/quantum_core.hpp"

namespace realclock {

struct MasterParams {
    Hamiltonian hamiltonian;
    double diffusion = 0.0; // D = kappa^2 / theta
    double dt = 0.0;        // integrator step

    static MasterParams from_clock(Hamiltonian h, const ClockParams& clock, double dt) {
        return MasterParams{std::move(h), clock.diffusion(), dt};
    }
};

/// Largest step allowed by 0.1 / max|omega_nm| and 0.1 / (D max omega_nm^2).
inline double max_stable_step(const MasterParams& params) {
    const double w = params.hamiltonian.max_gap();
    double bound = std::numeric_limits<double>::infinity();
    if (w > 0.0) {
        bound = std::min(bound, 0.1 / w);
        if (params.diffusion > 0.0) {
            bound = std::min(bound, 0.1 / (params.diffusion * w * w));
        }
    }
    return bound;
}

inline void validate(const MasterParams& params) {
    if (!(params.diffusion >= 0.0) || !std::isfinite(params.diffusion)) {
        throw ParameterError("master equation: diffusion must be non-negative and finite");
    }
    if (!(params.dt > 0.0) || !std::isfinite(params.dt)) {
        throw ParameterError("master equation: dt must be positive and finite");
    }
    if (params.dt > max_stable_step(params) * (1.0 + 1e-12)) {
        throw ParameterError("master equation: dt = " + format_double(params.dt) +
                             " exceeds the step bound " + format_double(max_stable_step(params)));
    }
}

namespace detail {

// For hermitian rho: rho H = (H rho)^dagger, and the commutator C is
// anti-hermitian so C H = -(H C)^dagger. Two products per evaluation, and the
// result is hermitian by construction. Buffers are reused across steps.
struct Rk4Workspace {
    Matrix h_rho, comm, h_comm, k1, k2, k3, k4, stage;
};

inline void master_rhs(const Matrix& h, double diffusion, const Matrix& rho, Matrix& out, Rk4Workspace& ws) {
    ws.h_rho.noalias() = h * rho;
    ws.comm = ws.h_rho - ws.h_rho.adjoint();
    ws.h_comm.noalias() = h * ws.comm;
    out = Complex(0.0, -1.0) * ws.comm - diffusion * (ws.h_comm + ws.h_comm.adjoint());
}

inline void rk4_inplace(const Matrix& h, double diffusion, Matrix& rho, double step, Rk4Workspace& ws) {
    master_rhs(h, diffusion, rho, ws.k1, ws);
    ws.stage = rho + (0.5 * step) * ws.k1;
    master_rhs(h, diffusion, ws.stage, ws.k2, ws);
    ws.stage = rho + (0.5 * step) * ws.k2;
    master_rhs(h, diffusion, ws.stage, ws.k3, ws);
    ws.stage = rho + step * ws.k3;
    master_rhs(h, diffusion, ws.stage, ws.k4, ws);
    ws.stage = rho + (step / 6.0) * (ws.k1 + 2.0 * ws.k2 + 2.0 * ws.k3 + ws.k4);
    rho = 0.5 * (ws.stage + ws.stage.adjoint());
}

inline Matrix rk4(const Matrix& h, double diffusion, const Matrix& rho, double step) {
    Rk4Workspace ws;
    Matrix next = rho;
    rk4_inplace(h, diffusion, next, step, ws);
    return next;
}

} // namespace detail

/// One classical RK4 step of size params.dt, re-hermitized.
inline DensityMatrix step_rk4(const MasterParams& params, const DensityMatrix& rho) {
    validate(params);
    if (rho.dim() != params.hamiltonian.dim()) {
        throw ParameterError("step_rk4: state and Hamiltonian dimensions differ");
    }
    return DensityMatrix::unchecked(
        detail::rk4(params.hamiltonian.matrix(), params.diffusion, rho.matrix(), params.dt));
}

/// Closed-form solution at clock time t.
inline DensityMatrix solve_exact(const MasterParams& params, const DensityMatrix& rho0, double t) {
    if (!(t >= 0.0)) {
        throw ParameterError("solve_exact: t must be non-negative");
    }
    if (!(params.diffusion >= 0.0)) {
        throw ParameterError("solve_exact: diffusion must be non-negative");
    }
    const Hamiltonian& h = params.hamiltonian;
    if (rho0.dim() != h.dim()) {
        throw ParameterError("solve_exact: state and Hamiltonian dimensions differ");
    }
    Matrix r = h.to_eigenbasis(rho0.matrix());
    for (int n = 0; n < h.dim(); ++n) {
        for (int m = 0; m < h.dim(); ++m) {
            const double w = h.omega(n, m);
            r(n, m) *= std::polar(std::exp(-w * w * params.diffusion * t), -w * t);
        }
    }
    return DensityMatrix::unchecked(h.from_eigenbasis(r));
}

struct DecayConstant {
    int n = 0;
    int m = 0;
    double rate = 0.0;
};

/// omega_nm^2 D for every pair n < m.
inline std::vector<DecayConstant> decay_constants(const MasterParams& params) {
    std::vector<DecayConstant> out;
    const Hamiltonian& h = params.hamiltonian;
    for (int n = 0; n < h.dim(); ++n) {
        for (int m = n + 1; m < h.dim(); ++m) {
            const double w = h.omega(n, m);
            out.push_back({n, m, w * w * params.diffusion});
        }
    }
    return out;
}

/// Slowest non-zero decoherence rate min_gap^2 D, equal to the inverse period
/// of applicability. Absent for an ideal clock or a degenerate spectrum.
inline std::optional<double> slowest_decay_rate(const MasterParams& params) {
    const auto gap = params.hamiltonian.min_gap();
    if (!gap || params.diffusion == 0.0) {
        return std::nullopt;
    }
    return (*gap) * (*gap) * params.diffusion;
}

struct Snapshot {
    double t = 0.0;
    DensityMatrix rho;
    double entropy = 0.0;
};

struct Trajectory {
    std::vector<Snapshot> snapshots;
    std::size_t steps = 0;
    /// Set when t_final exceeds the period of applicability 1 / slowest rate.
    bool beyond_applicability = false;
    double max_trace_error = 0.0;
    double max_hermiticity_error = 0.0;
    double min_eigenvalue = std::numeric_limits<double>::infinity();
};

/// Fixed-step RK4 from 0 to t_final, recording every record_every steps and at
/// t_final (the last step is shortened to land on it exactly).
inline Trajectory integrate(const MasterParams& params, const DensityMatrix& rho0, double t_final,
                            std::size_t record_every = 1) {
    validate(params);
    if (!(t_final >= 0.0) || !std::isfinite(t_final)) {
        throw ParameterError("integrate: t_final must be non-negative and finite");
    }
    if (record_every == 0) {
        throw ParameterError("integrate: record_every must be positive");
    }
    if (rho0.dim() != params.hamiltonian.dim()) {
        throw ParameterError("integrate: state and Hamiltonian dimensions differ");
    }

    Trajectory traj;
    if (const auto rate = slowest_decay_rate(params)) {
        traj.beyond_applicability = t_final > 1.0 / *rate;
    }
    auto record = [&](double t, const Matrix& m) {
        auto rho = DensityMatrix::unchecked(m);
        const auto diag = rho.diagnostics();
        traj.max_trace_error = std::max(traj.max_trace_error, diag.trace_error);
        traj.max_hermiticity_error = std::max(traj.max_hermiticity_error, diag.hermiticity_error);
        traj.min_eigenvalue = std::min(traj.min_eigenvalue, diag.min_eigenvalue);
        const double entropy = von_neumann_entropy(rho);
        traj.snapshots.push_back({t, std::move(rho), entropy});
    };

    const Matrix& h = params.hamiltonian.matrix();
    Matrix rho = rho0.matrix();
    detail::Rk4Workspace ws;
    record(0.0, rho);

    const auto full_steps = static_cast<std::size_t>(std::floor(t_final / params.dt));
    std::size_t k = 0;
    for (; k < full_steps; ++k) {
        detail::rk4_inplace(h, params.diffusion, rho, params.dt, ws);
        const double t = static_cast<double>(k + 1) * params.dt;
        if ((k + 1) % record_every == 0 && t < t_final) {
            record(t, rho);
        }
    }
    const double remainder = t_final - static_cast<double>(full_steps) * params.dt;
    if (remainder > 1e-12 * std::max(1.0, t_final)) {
        detail::rk4_inplace(h, params.diffusion, rho, remainder, ws);
        ++k;
    }
    traj.steps = k;
    if (t_final > 0.0) {
        record(t_final, rho);
    }
    return traj;
}

/// CSV header t,S,re(rho_n_m)...,im(rho_n_m)... followed by one row per snapshot.
inline void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
    if (traj.snapshots.empty()) {
        return;
    }
    const int dim = traj.snapshots.front().rho.dim();
    out << "t,S";
    for (const char* part : {"re", "im"}) {
        for (int n = 0; n < dim; ++n) {
            for (int m = 0; m < dim; ++m) {
                out << ',' << part << "(rho_" << n << '_' << m << ')';
            }
        }
    }
    out << '\n';
    std::vector<double> row;
    for (const auto& snap : traj.snapshots) {
        row.clear();
        row.push_back(snap.t);
        row.push_back(snap.entropy);
        for (int n = 0; n < dim; ++n) {
            for (int m = 0; m < dim; ++m) {
                row.push_back(snap.rho(n, m).real());
            }
        }
        for (int n = 0; n < dim; ++n) {
            for (int m = 0; m < dim; ++m) {
                row.push_back(snap.rho(n, m).imag());
            }
        }
        write_csv_row(out, row);
    }
}

} // namespace realclock
