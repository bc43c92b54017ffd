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

#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "realclock/effective_bath.hpp"

using namespace realclock;
using realclock::testing::simpson;

namespace {

// Cosine transform of c over [0, 40 theta] by composite Simpson with at least
// 400 points per oscillation period.
double simpson_spectrum(const ClockParams& clock, double omega) {
    const double upper = 40.0 * clock.theta();
    const double cycles = omega * upper / (2.0 * std::numbers::pi);
    const auto n = static_cast<std::size_t>(std::max(20000.0, 400.0 * cycles));
    return simpson([&](double tau) { return correlation(clock, tau) * std::cos(omega * tau); }, 0.0, upper, n);
}

} // namespace

TEST(SpectralDensity, ZeroFrequencyIsDiffusion) {
    const auto clock = ClockParams::ornstein_uhlenbeck(1.0, 0.1);
    EXPECT_DOUBLE_EQ(spectral_density(clock, 0.0), 0.01);
    EXPECT_EQ(spectral_density(clock, 0.0), clock.diffusion());
    EXPECT_NEAR(simpson_spectrum(clock, 0.0) / 0.01, 1.0, 1e-9);
}

TEST(SpectralDensity, HalfWidthAtInverseCorrelationTime) {
    const auto clock = ClockParams::ornstein_uhlenbeck(0.3, 0.01);
    EXPECT_NEAR(spectral_density(clock, 1.0 / 0.3) / spectral_density(clock, 0.0), 0.5, 1e-15);
    EXPECT_NEAR(simpson_spectrum(clock, 1.0 / 0.3) / simpson_spectrum(clock, 0.0), 0.5, 1e-8);
}

TEST(SpectralDensity, IdealClockHasNoNoise) {
    const auto clock = ClockParams::ornstein_uhlenbeck(1.0, 0.0);
    for (const double w : {0.0, 0.5, 10.0}) {
        EXPECT_EQ(spectral_density(clock, w), 0.0);
        EXPECT_EQ(spectral_density_quadrature(clock, w), 0.0);
    }
}

TEST(SpectralDensity, LorentzianMatchesIndependentQuadrature) {
    for (const double theta : {0.1, 1.0, 4.0}) {
        const auto clock = ClockParams::ornstein_uhlenbeck(theta, 0.05 * theta);
        for (const double x : {0.0, 0.1, 1.0, 3.0, 10.0, 25.0, 50.0}) {
            const double w = x / theta;
            const double closed = spectral_density(clock, w);
            EXPECT_NEAR(simpson_spectrum(clock, w) / closed, 1.0, 1e-6) << "theta=" << theta << " x=" << x;
        }
    }
}

TEST(SpectralDensity, LorentzianMatchesLibraryQuadratureOnDenseGrid) {
    const auto clock = ClockParams::ornstein_uhlenbeck(0.5, 0.02);
    double worst = 0.0;
    for (const double w : frequency_grid(50.0 / 0.5, 501)) {
        const double closed = spectral_density(clock, w);
        worst = std::max(worst, std::abs(spectral_density_quadrature(clock, w) - closed) / closed);
    }
    EXPECT_LT(worst, 1e-6);
}

TEST(SpectralDensity, Scaling) {
    const auto base = ClockParams::ornstein_uhlenbeck(0.8, 0.02);
    const auto double_kappa = ClockParams::ornstein_uhlenbeck(0.8, 0.04);
    const auto double_theta = ClockParams::ornstein_uhlenbeck(1.6, 0.02);
    for (const double w : {0.0, 0.7, 3.0, 40.0}) {
        EXPECT_NEAR(spectral_density(double_kappa, w) / spectral_density(base, w), 4.0, 1e-14);
    }
    EXPECT_NEAR(spectral_density(double_theta, 0.0) / spectral_density(base, 0.0), 0.5, 1e-15);
}

TEST(SpectralDensity, NonNegativeAndDecreasing) {
    const auto clock = ClockParams::ornstein_uhlenbeck(0.2, 0.01);
    double previous = std::numeric_limits<double>::infinity();
    for (const double w : frequency_grid(500.0, 1001)) {
        const double s = spectral_density(clock, w);
        EXPECT_GE(s, 0.0);
        EXPECT_LT(s, previous);
        previous = s;
    }
}

TEST(SpectralDensity, RejectsNegativeFrequency) {
    const auto clock = ClockParams::ornstein_uhlenbeck(1.0, 0.1);
    EXPECT_THROW(spectral_density(clock, -0.1), ParameterError);
    EXPECT_THROW(spectral_density_quadrature(clock, -0.1), ParameterError);
}

TEST(SpectralDensity, TabulatedClockUsesQuadrature) {
    const auto ou = ClockParams::ornstein_uhlenbeck(1.0, 0.05);
    CorrelationTable table;
    for (int i = 0; i <= 8000; ++i) {
        table.tau.push_back(i * 5e-3);
        table.c.push_back(correlation(ou, table.tau.back()));
    }
    const auto tab = ClockParams::tabulated(table);
    for (const double w : {0.0, 1.0, 5.0}) {
        // Linear interpolation error is O(h^2 / 8) of the curvature.
        EXPECT_NEAR(spectral_density(tab, w) / spectral_density(ou, w), 1.0, 1e-5);
    }
    EXPECT_THROW(bath_consistency_check(tab, std::vector<double>{0.0}), ParameterError);
}

TEST(Parseval, IntegralRecoversZeroLagCorrelation) {
    for (const double theta : {0.1, 1.0, 7.0}) {
        const auto clock = ClockParams::ornstein_uhlenbeck(theta, 0.03 * theta);
        EXPECT_NEAR(parseval_integral(clock) / clock.c0(), 1.0, 1e-4);
    }
}

TEST(Parseval, TruncationAloneMissesTheLorentzianTail) {
    // Without the tail term the integral up to 100/theta is (2/pi) atan(100) c0,
    // short by about 0.64%.
    const auto clock = ClockParams::ornstein_uhlenbeck(1.0, 0.1);
    const double truncated = parseval_integral(clock) - 2.0 / std::numbers::pi * 100.0 * spectral_density(clock, 100.0);
    EXPECT_NEAR(truncated / clock.c0(), 2.0 / std::numbers::pi * std::atan(100.0), 1e-10);
}

TEST(BathModel, ChiSquaredFollowsTemperature) {
    const auto clock = ClockParams::ornstein_uhlenbeck(1.0, 0.1);
    const auto omegas = frequency_grid(10.0, 11);
    const auto a = make_bath_model(clock, 1.0, omegas);
    const auto b = make_bath_model(clock, 4.0, omegas);
    for (std::size_t i = 0; i < omegas.size(); ++i) {
        EXPECT_EQ(a.chi_squared[i], spectral_density(clock, omegas[i]));
        EXPECT_NEAR(b.chi_squared[i] * 4.0, a.chi_squared[i], 1e-18);
    }
    EXPECT_THROW(make_bath_model(clock, 0.0, omegas), ParameterError);
    EXPECT_THROW(frequency_grid(1.0, 1), ParameterError);
}

TEST(ConsistencyCheck, ReportPasses) {
    const auto clock = ClockParams::ornstein_uhlenbeck(1.0, 0.1);
    const auto r = bath_consistency_check(clock, frequency_grid(50.0, 101));
    EXPECT_TRUE(r.zero_frequency_identity);
    EXPECT_DOUBLE_EQ(r.s0, 0.01);
    EXPECT_EQ(r.s0, r.diffusion);
    EXPECT_NEAR(r.s0_quadrature, 0.01, 1e-12);
    EXPECT_LT(r.max_relative_error, 1e-6);
    EXPECT_GE(r.min_value, 0.0);
    EXPECT_LT(r.parseval_relative_error, 1e-4);
    EXPECT_TRUE(r.passed());
    EXPECT_EQ(r.omega.size(), 101u);
}

TEST(ConsistencyCheck, IdealClock) {
    const auto r = bath_consistency_check(ClockParams::ornstein_uhlenbeck(1.0, 0.0), frequency_grid(5.0, 6));
    EXPECT_TRUE(r.passed());
    EXPECT_EQ(r.s0, 0.0);
}

TEST(Csv, SpectrumHeader) {
    std::stringstream out;
    const std::vector<double> w{0.0, 1.0};
    const std::vector<double> s{0.01, 0.005};
    write_spectrum_csv(out, w, s);
    EXPECT_EQ(out.str(), "omega,S\n0,0.01\n1,0.005\n");
}
