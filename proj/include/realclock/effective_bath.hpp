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

// Effective thermal bath of a real clock. Coupling the system to a classical
// bath through chi(omega) reproduces the clock's master equation when
//
//     kB T_b chi(omega)^2 = S(omega) = int_0^inf c(tau) cos(omega tau) dtau.
//
// Only the product is fixed, so S(omega) is the primitive and chi^2 follows
// from a chosen temperature scale (kB = 1).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <span>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "realclock/clock_models.hpp"
#include "realclock/errors.hpp"
#include "realclock/numeric.hpp"

namespace realclock {

/// Upper cutoff of the lag integral, in correlation times.
inline constexpr double kSpectralTailCutoff = 40.0;

namespace detail {

// One 61-point Kronrod pass per panel; refine adaptively only when the error
// estimate is not negligible against the scale of the whole integral. A purely
// relative per-panel tolerance chases rounding noise on far-tail panels whose
// integrand nearly cancels.
template <class F>
double panel_integral(F&& f, double a, double b, double scale) {
    using Rule = boost::math::quadrature::gauss_kronrod<double, 61>;
    double error = 0.0;
    const double value = Rule::integrate(f, a, b, 0, 0.0, &error);
    if (error <= 1e-14 * scale) {
        return value;
    }
    return Rule::integrate(f, a, b, 10, 1e-12);
}

} // namespace detail

/// S(omega) by adaptive Gauss-Kronrod quadrature of c(tau) cos(omega tau) over
/// [0, 40 theta] (or the table range, if shorter). Panels are at most a
/// quarter period or a correlation time wide.
inline double spectral_density_quadrature(const ClockParams& clock, double omega) {
    if (!(omega >= 0.0) || !std::isfinite(omega)) {
        throw ParameterError("spectral_density: omega must be non-negative and finite");
    }
    if (clock.ideal()) {
        return 0.0;
    }
    double upper = kSpectralTailCutoff * clock.theta();
    std::vector<double> breaks;
    if (clock.model() == CorrelationModel::Tabulated) {
        upper = std::min(upper, clock.table().tau.back());
        for (const double t : clock.table().tau) {
            if (t > 0.0 && t < upper) {
                breaks.push_back(t);
            }
        }
    }
    double width = clock.theta();
    if (omega > 0.0) {
        width = std::min(width, 0.5 * std::numbers::pi / omega);
    }
    const auto panels = static_cast<std::size_t>(std::ceil(upper / width));
    for (std::size_t i = 1; i < panels; ++i) {
        breaks.push_back(upper * static_cast<double>(i) / static_cast<double>(panels));
    }
    breaks.push_back(0.0);
    breaks.push_back(upper);
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    auto integrand = [&](double tau) { return correlation(clock, tau) * std::cos(omega * tau); };
    CompensatedSum total;
    for (std::size_t i = 1; i < breaks.size(); ++i) {
        total.add(detail::panel_integral(integrand, breaks[i - 1], breaks[i], clock.c0() * clock.theta()));
    }
    return total.value();
}

/// S(omega); the Lorentzian kappa^2 / (theta (1 + omega^2 theta^2)) for OU
/// clocks, quadrature otherwise.
inline double spectral_density(const ClockParams& clock, double omega) {
    if (!(omega >= 0.0) || !std::isfinite(omega)) {
        throw ParameterError("spectral_density: omega must be non-negative and finite");
    }
    if (clock.model() == CorrelationModel::OrnsteinUhlenbeck) {
        const double wt = omega * clock.theta();
        return clock.kappa() * clock.kappa() / (clock.theta() * (1.0 + wt * wt));
    }
    return spectral_density_quadrature(clock, omega);
}

struct BathModel {
    double temperature_product = 1.0; // kB T_b
    std::vector<double> omega;
    std::vector<double> chi_squared;
};

inline BathModel make_bath_model(const ClockParams& clock, double temperature_product,
                                 std::span<const double> omegas) {
    if (!(temperature_product > 0.0) || !std::isfinite(temperature_product)) {
        throw ParameterError("bath: temperature product must be positive");
    }
    BathModel bath;
    bath.temperature_product = temperature_product;
    for (const double w : omegas) {
        bath.omega.push_back(w);
        bath.chi_squared.push_back(spectral_density(clock, w) / temperature_product);
    }
    return bath;
}

/// Uniform frequency table 0, d, ..., omega_max.
inline std::vector<double> frequency_grid(double omega_max, std::size_t n_points) {
    if (!(omega_max > 0.0) || n_points < 2) {
        throw ParameterError("frequency_grid: need omega_max > 0 and at least 2 points");
    }
    std::vector<double> w(n_points);
    for (std::size_t i = 0; i < n_points; ++i) {
        w[i] = omega_max * static_cast<double>(i) / static_cast<double>(n_points - 1);
    }
    return w;
}

struct BathConsistencyReport {
    double s0 = 0.0;            // S(0), closed form
    double s0_quadrature = 0.0; // S(0), numerical
    double diffusion = 0.0;     // kappa^2 / theta from the clock parameters
    bool zero_frequency_identity = false; // S(0) == D exactly
    std::vector<double> omega;
    std::vector<double> s_closed;
    std::vector<double> s_quadrature;
    double max_relative_error = 0.0; // closed form vs quadrature
    double min_value = 0.0;
    double parseval_integral = 0.0; // (2/pi) int_0^inf S, truncated at 100/theta plus tail
    double parseval_relative_error = 0.0;

    bool passed() const {
        return zero_frequency_identity && max_relative_error < 1e-6 && min_value >= 0.0 &&
               parseval_relative_error < 1e-4;
    }
};

/// (2/pi) int_0^inf S(omega) domega, which must equal c(0). The integral is
/// taken numerically up to W = 100/theta; the remainder is closed with the
/// 1/omega^2 asymptote, int_W^inf S ~ W S(W).
inline double parseval_integral(const ClockParams& clock) {
    const double cutoff = 100.0 / clock.theta();
    const double panel = 1.0 / clock.theta();
    CompensatedSum total;
    for (double lo = 0.0; lo < cutoff * (1.0 - 1e-12); lo += panel) {
        total.add(detail::panel_integral([&](double w) { return spectral_density(clock, w); }, lo,
                                         std::min(lo + panel, cutoff), clock.c0()));
    }
    total.add(cutoff * spectral_density(clock, cutoff));
    return 2.0 / std::numbers::pi * total.value();
}

/// Checks the rate-level equivalence between the clock and its effective bath:
/// S(0) = D, closed form against quadrature, positivity and Parseval.
inline BathConsistencyReport bath_consistency_check(const ClockParams& clock, std::span<const double> omegas) {
    if (clock.model() != CorrelationModel::OrnsteinUhlenbeck) {
        throw ParameterError("bath_consistency_check: requires an Ornstein-Uhlenbeck clock");
    }
    BathConsistencyReport r;
    r.s0 = spectral_density(clock, 0.0);
    r.s0_quadrature = spectral_density_quadrature(clock, 0.0);
    r.diffusion = clock.diffusion();
    r.zero_frequency_identity = r.s0 == r.diffusion;
    r.min_value = std::numeric_limits<double>::infinity();
    for (const double w : omegas) {
        const double closed = spectral_density(clock, w);
        const double quad = spectral_density_quadrature(clock, w);
        r.omega.push_back(w);
        r.s_closed.push_back(closed);
        r.s_quadrature.push_back(quad);
        r.min_value = std::min(r.min_value, closed);
        if (closed > 0.0) {
            r.max_relative_error = std::max(r.max_relative_error, std::abs(quad - closed) / closed);
        } else {
            r.max_relative_error = std::max(r.max_relative_error, std::abs(quad));
        }
    }
    if (r.omega.empty()) {
        r.min_value = 0.0;
    }
    if (clock.ideal()) {
        r.parseval_integral = 0.0;
        r.parseval_relative_error = 0.0;
    } else {
        r.parseval_integral = parseval_integral(clock);
        r.parseval_relative_error = std::abs(r.parseval_integral - clock.c0()) / clock.c0();
    }
    return r;
}

/// CSV omega,S.
inline void write_spectrum_csv(std::ostream& out, std::span<const double> omega, std::span<const double> s) {
    out << "omega,S\n";
    for (std::size_t i = 0; i < omega.size(); ++i) {
        const double row[] = {omega[i], s[i]};
        write_csv_row(out, row);
    }
}

} // namespace realclock
