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

// Classical real-clock dynamics for H = omega J in angle-action variables.
// The action is conserved and the angle density obeys
//
//     d rho/dt = omega d rho/dphi + omega^2 D d^2 rho/dphi^2
//
// on the circle. Fourier modes rho(phi) = sum_m c_m exp(i m phi) evolve
// independently: c_m(t) = c_m(0) exp(i m omega t - m^2 omega^2 D t).

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <cstddef>
#include <numbers>
#include <ostream>
#include <utility>
#include <vector>

#include "realclock/errors.hpp"
#include "realclock/numeric.hpp"

namespace realclock {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Coefficients c_m for m = -M..M of a real density.
class FourierModes {
public:
    FourierModes(int max_mode, std::vector<std::complex<double>> coefficients)
        : max_mode_(max_mode), coeffs_(std::move(coefficients)) {
        if (max_mode < 0 || coeffs_.size() != static_cast<std::size_t>(2 * max_mode + 1)) {
            throw ParameterError("FourierModes: need 2M+1 coefficients");
        }
    }

    int max_mode() const noexcept { return max_mode_; }
    std::complex<double> operator[](int m) const { return coeffs_.at(static_cast<std::size_t>(m + max_mode_)); }
    std::complex<double>& operator[](int m) { return coeffs_.at(static_cast<std::size_t>(m + max_mode_)); }
    const std::vector<std::complex<double>>& coefficients() const noexcept { return coeffs_; }

private:
    int max_mode_;
    std::vector<std::complex<double>> coeffs_;
};

/// Exact evolution of every mode over time t.
inline FourierModes evolve_modes(const FourierModes& modes, double omega, double diffusion, double t) {
    if (!(t >= 0.0)) {
        throw ParameterError("evolve_modes: t must be non-negative");
    }
    FourierModes out = modes;
    for (int m = -modes.max_mode(); m <= modes.max_mode(); ++m) {
        const double k = static_cast<double>(m) * omega;
        out[m] *= std::polar(std::exp(-k * k * diffusion * t), k * t);
    }
    return out;
}

/// Truncated Fourier series of delta(phi - phi0): c_m = exp(-i m phi0) / 2pi.
inline FourierModes delta_release(double phi0, int n_modes) {
    if (n_modes < 1) {
        throw ParameterError("delta_release: n_modes must be at least 1");
    }
    std::vector<std::complex<double>> c(static_cast<std::size_t>(2 * n_modes + 1));
    for (int m = -n_modes; m <= n_modes; ++m) {
        c[static_cast<std::size_t>(m + n_modes)] =
            m == 0 ? std::complex<double>(1.0 / kTwoPi, 0.0) : std::polar(1.0 / kTwoPi, -m * phi0);
    }
    return FourierModes(n_modes, std::move(c));
}

/// Density on the uniform grid phi_i = 2 pi i / n_grid.
class AngleDistribution {
public:
    /// Validates non-negativity (tiny negatives >= -1e-12 are clamped) and
    /// normalization (2pi/n) sum = 1 to 1e-10.
    static AngleDistribution make(std::vector<double> values, double omega, double diffusion) {
        if (values.size() < 3) {
            throw ParameterError("AngleDistribution: need at least 3 grid points");
        }
        if (!(diffusion >= 0.0) || !std::isfinite(omega)) {
            throw ParameterError("AngleDistribution: need finite omega and diffusion >= 0");
        }
        for (double& v : values) {
            if (!std::isfinite(v) || v < -1e-12) {
                throw ParameterError("AngleDistribution: density must be non-negative");
            }
            v = std::max(v, 0.0);
        }
        AngleDistribution d(std::move(values), omega, diffusion);
        if (std::abs(d.total_probability() - 1.0) > 1e-10) {
            throw ParameterError("AngleDistribution: density is not normalized");
        }
        return d;
    }

    /// Scales arbitrary non-negative weights to unit probability.
    static AngleDistribution normalized(std::vector<double> weights, double omega, double diffusion) {
        CompensatedSum s;
        for (const double w : weights) {
            s.add(w);
        }
        if (!(s.value() > 0.0)) {
            throw ParameterError("AngleDistribution: weights must have positive sum");
        }
        const double scale = static_cast<double>(weights.size()) / (kTwoPi * s.value());
        for (double& w : weights) {
            w *= scale;
        }
        return make(std::move(weights), omega, diffusion);
    }

    static AngleDistribution uniform(std::size_t n_grid, double omega, double diffusion) {
        return make(std::vector<double>(n_grid, 1.0 / kTwoPi), omega, diffusion);
    }

    /// Von Mises bump exp(kappa cos(phi - mu)), normalized on the grid.
    static AngleDistribution von_mises(std::size_t n_grid, double mu, double concentration, double omega,
                                       double diffusion) {
        std::vector<double> w(n_grid);
        for (std::size_t i = 0; i < n_grid; ++i) {
            w[i] = std::exp(concentration * (std::cos(grid_angle(i, n_grid) - mu) - 1.0));
        }
        return normalized(std::move(w), omega, diffusion);
    }

    static double grid_angle(std::size_t i, std::size_t n_grid) {
        return kTwoPi * static_cast<double>(i) / static_cast<double>(n_grid);
    }

    std::size_t n_grid() const noexcept { return values_.size(); }
    const std::vector<double>& values() const noexcept { return values_; }
    double omega() const noexcept { return omega_; }
    double diffusion() const noexcept { return diffusion_; }
    double spacing() const noexcept { return kTwoPi / static_cast<double>(values_.size()); }

    double total_probability() const {
        CompensatedSum s;
        for (const double v : values_) {
            s.add(v);
        }
        return spacing() * s.value();
    }

private:
    friend AngleDistribution evolve_grid(const AngleDistribution&, double, double);

    AngleDistribution(std::vector<double> values, double omega, double diffusion)
        : values_(std::move(values)), omega_(omega), diffusion_(diffusion) {}

    std::vector<double> values_;
    double omega_;
    double diffusion_;
};

/// Largest step with dt <= 0.5 dphi/|omega| and dt <= 0.25 dphi^2 / (omega^2 D).
inline double max_grid_step(std::size_t n_grid, double omega, double diffusion) {
    const double dphi = kTwoPi / static_cast<double>(n_grid);
    double bound = std::numeric_limits<double>::infinity();
    if (omega != 0.0) {
        bound = std::min(bound, 0.5 * dphi / std::abs(omega));
        if (diffusion > 0.0) {
            bound = std::min(bound, 0.25 * dphi * dphi / (omega * omega * diffusion));
        }
    }
    return bound;
}

/// Method-of-lines evolution to t_final: centered first and second differences
/// on the periodic grid, classical RK4 in time (last step shortened to land on
/// t_final). Probability is conserved exactly up to rounding.
inline AngleDistribution evolve_grid(const AngleDistribution& dist, double t_final, double dt) {
    if (!(t_final >= 0.0) || !std::isfinite(t_final)) {
        throw ParameterError("evolve_grid: t_final must be non-negative and finite");
    }
    if (!(dt > 0.0) || dt > max_grid_step(dist.n_grid(), dist.omega(), dist.diffusion()) * (1.0 + 1e-12)) {
        throw ParameterError("evolve_grid: dt violates the stability bound");
    }
    const std::size_t n = dist.n_grid();
    const double dphi = dist.spacing();
    const double adv = dist.omega() / (2.0 * dphi);
    const double dif = dist.omega() * dist.omega() * dist.diffusion() / (dphi * dphi);

    auto rhs = [&](const std::vector<double>& u, std::vector<double>& du) {
        for (std::size_t i = 0; i < n; ++i) {
            const double left = u[(i + n - 1) % n];
            const double right = u[(i + 1) % n];
            du[i] = adv * (right - left) + dif * (right - 2.0 * u[i] + left);
        }
    };

    std::vector<double> u = dist.values();
    std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
    auto step = [&](double h) {
        rhs(u, k1);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + 0.5 * h * k1[i];
        rhs(tmp, k2);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + 0.5 * h * k2[i];
        rhs(tmp, k3);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + h * k3[i];
        rhs(tmp, k4);
        for (std::size_t i = 0; i < n; ++i) {
            u[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    };

    const auto full_steps = static_cast<std::size_t>(std::floor(t_final / dt));
    for (std::size_t k = 0; k < full_steps; ++k) {
        step(dt);
    }
    const double remainder = t_final - static_cast<double>(full_steps) * dt;
    if (remainder > 1e-12 * std::max(1.0, t_final)) {
        step(remainder);
    }
    for (double& v : u) {
        if (v < 0.0 && v >= -1e-12) {
            v = 0.0;
        }
    }
    return AngleDistribution(std::move(u), dist.omega(), dist.diffusion());
}

/// Discrete Fourier coefficients c_m = (1/n) sum_i rho_i exp(-i m phi_i), |m| <= max_mode.
inline FourierModes modes_from_density(const std::vector<double>& values, int max_mode) {
    const std::size_t n = values.size();
    if (max_mode < 0 || static_cast<std::size_t>(2 * max_mode) >= n) {
        throw ParameterError("modes_from_density: max_mode must be below n_grid/2");
    }
    std::vector<std::complex<double>> c(static_cast<std::size_t>(2 * max_mode + 1));
    for (int m = -max_mode; m <= max_mode; ++m) {
        std::complex<double> acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            acc += values[i] * std::polar(1.0, -m * AngleDistribution::grid_angle(i, n));
        }
        c[static_cast<std::size_t>(m + max_mode)] = acc / static_cast<double>(n);
    }
    return FourierModes(max_mode, std::move(c));
}

/// Default truncation for spectral comparisons on an n-point grid.
inline int default_max_mode(std::size_t n_grid) { return static_cast<int>(n_grid / 2) - 1; }

/// Real part of sum_m c_m exp(i m phi_i) on the n-point grid. Values in
/// [-1e-12, 0) are clamped to zero; larger negatives (truncation ringing)
/// are returned as is.
inline std::vector<double> density_from_modes(const FourierModes& modes, std::size_t n_grid) {
    std::vector<double> out(n_grid);
    for (std::size_t i = 0; i < n_grid; ++i) {
        const double phi = AngleDistribution::grid_angle(i, n_grid);
        double v = modes[0].real();
        for (int m = 1; m <= modes.max_mode(); ++m) {
            v += 2.0 * (modes[m] * std::polar(1.0, m * phi)).real();
        }
        out[i] = (v < 0.0 && v >= -1e-12) ? 0.0 : v;
    }
    return out;
}

struct CircularStats {
    double mean_angle = 0.0;
    double resultant = 0.0;          // R = |<exp(i phi)>|
    double circular_variance = 0.0;  // 1 - R
    double wrapped_variance = 0.0;   // -2 ln R; equals 2 omega^2 D t after a delta release
};

inline CircularStats circular_stats(const FourierModes& modes) {
    if (modes.max_mode() < 1) {
        throw ParameterError("circular_stats: need the m = 1 mode");
    }
    const std::complex<double> first_moment = kTwoPi * std::conj(modes[1]);
    CircularStats s;
    s.resultant = std::abs(first_moment);
    s.mean_angle = std::arg(first_moment);
    s.circular_variance = 1.0 - s.resultant;
    s.wrapped_variance = s.resultant > 0.0 ? -2.0 * std::log(s.resultant) : std::numeric_limits<double>::infinity();
    return s;
}

/// CSV phi,rho.
inline void write_density_csv(std::ostream& out, const std::vector<double>& values) {
    out << "phi,rho\n";
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double row[] = {AngleDistribution::grid_angle(i, values.size()), values[i]};
        write_csv_row(out, row);
    }
}

/// CSV m,re,im.
inline void write_modes_csv(std::ostream& out, const FourierModes& modes) {
    out << "m,re,im\n";
    for (int m = -modes.max_mode(); m <= modes.max_mode(); ++m) {
        const double row[] = {static_cast<double>(m), modes[m].real(), modes[m].imag()};
        write_csv_row(out, row);
    }
}

} // namespace realclock
