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
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "realclock/clock_models.hpp"

using namespace realclock;

namespace {

struct Moments {
    double mean = 0.0;
    double var = 0.0;
};

Moments moments(const std::vector<double>& x) {
    Moments m;
    for (const double v : x) m.mean += v;
    m.mean /= static_cast<double>(x.size());
    for (const double v : x) m.var += (v - m.mean) * (v - m.mean);
    m.var /= static_cast<double>(x.size() - 1);
    return m;
}

} // namespace

// ---------------------------------------------------------------------------
// Parameters and correlation

TEST(ClockParams, DerivedQuantities) {
    const auto p = ClockParams::ornstein_uhlenbeck(2.0, 0.1, 0.5);
    EXPECT_DOUBLE_EQ(p.c0(), 0.0025);
    EXPECT_DOUBLE_EQ(p.diffusion(), 0.005);
    EXPECT_DOUBLE_EQ(p.noise_ratio(), 0.05);
    EXPECT_TRUE(p.good_clock());
    EXPECT_FALSE(ClockParams::ornstein_uhlenbeck(1.0, 0.5).good_clock());
}

TEST(ClockParams, RejectsInvalid) {
    EXPECT_THROW(ClockParams::ornstein_uhlenbeck(0.0, 0.1), ParameterError);
    EXPECT_THROW(ClockParams::ornstein_uhlenbeck(1.0, -0.1), ParameterError);
    EXPECT_THROW(ClockParams::ornstein_uhlenbeck(1.0, 0.1, 0.0), ParameterError);
    EXPECT_THROW(ClockParams::ornstein_uhlenbeck(1.0, 1.0), ParameterError); // c0 = 1
}

TEST(Correlation, OrnsteinUhlenbeckValues) {
    const auto p = ClockParams::ornstein_uhlenbeck(1.0, 0.05);
    EXPECT_DOUBLE_EQ(correlation(p, 0.0), 0.0025);
    EXPECT_NEAR(correlation(p, 1.0), 0.0025 * std::exp(-1.0), 1e-18);
    EXPECT_EQ(correlation(p, -2.0), correlation(p, 2.0));
}

TEST(Correlation, TabulatedInterpolatesEvenlyWithoutExtrapolation) {
    const auto p = ClockParams::tabulated({{0.0, 1.0, 2.0}, {0.01, 0.005, 0.0}});
    EXPECT_DOUBLE_EQ(correlation(p, 0.5), 0.0075);
    EXPECT_DOUBLE_EQ(correlation(p, -0.5), 0.0075);
    EXPECT_DOUBLE_EQ(correlation(p, 2.0), 0.0);
    EXPECT_THROW(correlation(p, 2.5), RangeError);
    // theta = int c / c0 = 0.01 / 0.01, kappa = theta sqrt(c0)
    EXPECT_DOUBLE_EQ(p.theta(), 1.0);
    EXPECT_DOUBLE_EQ(p.kappa(), 0.1);
}

TEST(Correlation, TabulatedRejectsBadTables) {
    EXPECT_THROW(ClockParams::tabulated({{0.0}, {0.01}}), ParameterError);
    EXPECT_THROW(ClockParams::tabulated({{0.5, 1.0}, {0.01, 0.0}}), ParameterError);
    EXPECT_THROW(ClockParams::tabulated({{0.0, 1.0, 1.0}, {0.01, 0.0, 0.0}}), ParameterError);
    EXPECT_THROW(ClockParams::tabulated({{0.0, 1.0}, {1.5, 0.0}}), ParameterError);
}

TEST(PeriodOfApplicability, Formula) {
    const auto p = ClockParams::ornstein_uhlenbeck(1.0, 0.1);
    EXPECT_NEAR(period_of_applicability(p, 1.0), 100.0, 1e-12);
    EXPECT_NEAR(period_of_applicability(p, 2.0), 400.0, 1e-12);
    EXPECT_TRUE(std::isinf(period_of_applicability(ClockParams::ornstein_uhlenbeck(1.0, 0.0), 1.0)));
    EXPECT_THROW(period_of_applicability(p, 0.0), ParameterError);
}

// ---------------------------------------------------------------------------
// Continuous OU sampler

TEST(SampleOuPath, IdealClockIsExactlyZero) {
    const auto path = sample_ou_path(ClockParams::ornstein_uhlenbeck(1.0, 0.0), 7.0, 0.05, 3);
    for (std::size_t i = 0; i < path.size(); ++i) {
        EXPECT_EQ(path.alpha[i], 0.0);
        EXPECT_EQ(path.delta[i], 0.0);
    }
}

TEST(SampleOuPath, SameSeedIsBitIdentical) {
    const auto p = ClockParams::ornstein_uhlenbeck(1.0, 0.05);
    const auto a = sample_ou_path(p, 10.0, 0.05, 99);
    const auto b = sample_ou_path(p, 10.0, 0.05, 99);
    EXPECT_EQ(a.alpha, b.alpha);
    EXPECT_EQ(a.delta, b.delta);
    const auto c = sample_ou_path(p, 10.0, 0.05, 100);
    EXPECT_NE(a.alpha, c.alpha);
}

TEST(SampleOuPath, GridAndErrors) {
    const auto p = ClockParams::ornstein_uhlenbeck(1.0, 0.05);
    const auto path = sample_ou_path(p, 10.0, 0.05, 1);
    EXPECT_EQ(path.size(), 201u);
    EXPECT_DOUBLE_EQ(path.time(200), 10.0);
    EXPECT_THROW(sample_ou_path(p, 10.0, 0.0, 1), ParameterError);
    EXPECT_THROW(sample_ou_path(p, 10.0, 0.051, 1), ParameterError);
    EXPECT_THROW(sample_ou_path(p, 0.01, 0.05, 1), ParameterError);
    const auto tab = ClockParams::tabulated({{0.0, 1.0}, {0.01, 0.0}});
    EXPECT_THROW(sample_ou_path(tab, 10.0, 0.01, 1), ParameterError);
}

TEST(SampleOuPath, DeltaIsTrapezoidOfAlpha) {
    const auto p = ClockParams::ornstein_uhlenbeck(0.5, 0.04);
    const auto path = sample_ou_path(p, 20.0, 0.01, 11);
    EXPECT_EQ(path.delta[0], 0.0);
    double acc = 0.0;
    for (std::size_t i = 1; i < path.size(); ++i) {
        acc += 0.5 * path.grid_dt * (path.alpha[i - 1] + path.alpha[i]);
        EXPECT_NEAR(path.delta[i], acc, 1e-15);
    }
}

TEST(SampleOuPath, StationaryVarianceOverPaths) {
    const auto p = ClockParams::ornstein_uhlenbeck(1.0, 0.05);
    constexpr int n_paths = 10000;
    std::vector<double> final_alpha;
    for (int k = 0; k < n_paths; ++k) {
        final_alpha.push_back(sample_ou_path(p, 10.0, 0.05, 5, k).alpha.back());
    }
    const auto m = moments(final_alpha);
    const double sampling_error = 0.0025 * std::sqrt(2.0 / (n_paths - 1));
    EXPECT_NEAR(m.var, 0.0025, 3.0 * sampling_error);
}

TEST(SampleOuPath, OneStepConditionalLawIsExact) {
    // A coarse step (dt = theta/20 is the largest allowed) and a long chain.
    const double theta = 1.0;
    const double kappa = 0.05;
    const double dt = theta / 20.0;
    const auto p = ClockParams::ornstein_uhlenbeck(theta, kappa);
    const auto path = sample_ou_path(p, 10000.0, dt, 17);
    ASSERT_GE(path.size(), 100000u);
    const double decay = std::exp(-dt / theta);
    const double expected_var = (kappa / theta) * (kappa / theta) * (1.0 - std::exp(-2.0 * dt / theta));
    std::vector<double> residual;
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        residual.push_back(path.alpha[i + 1] - decay * path.alpha[i]);
    }
    const auto m = moments(residual);
    const auto n = static_cast<double>(residual.size());
    EXPECT_NEAR(m.mean, 0.0, 5.0 * std::sqrt(expected_var / n));
    EXPECT_NEAR(m.var, expected_var, 5.0 * expected_var * std::sqrt(2.0 / n));
}

TEST(SampleOuPath, NoDriftBetweenHalves) {
    const auto p = ClockParams::ornstein_uhlenbeck(1.0, 0.05);
    std::vector<double> first;
    std::vector<double> second;
    for (int k = 0; k < 400; ++k) {
        const auto path = sample_ou_path(p, 40.0, 0.05, 23, k);
        const std::size_t half = path.size() / 2;
        first.insert(first.end(), path.alpha.begin(), path.alpha.begin() + static_cast<long>(half));
        second.insert(second.end(), path.alpha.begin() + static_cast<long>(half), path.alpha.end());
    }
    // Effective sample size: one independent draw per 2 theta of path time.
    const double n_eff = 400.0 * 20.0 / 2.0;
    const auto a = moments(first);
    const auto b = moments(second);
    const double c0 = 0.0025;
    EXPECT_NEAR(a.mean - b.mean, 0.0, 5.0 * std::sqrt(2.0 * c0 / n_eff));
    EXPECT_NEAR(a.var - b.var, 0.0, 5.0 * c0 * std::sqrt(4.0 / n_eff));
}

TEST(SampleOuPath, NoCausalityViolationsForGoodClock) {
    const auto p = ClockParams::ornstein_uhlenbeck(1.0, 0.05);
    std::size_t violations = 0;
    for (int k = 0; k < 200; ++k) {
        violations += sample_ou_path(p, 50.0, 0.05, 8, k).causality_violations;
    }
    EXPECT_EQ(violations, 0u);
}

TEST(SampleOuPath, ViolationsAreCountedNotRejected) {
    // kappa/theta = 0.9: alpha <= -1 is routine, and the samples must survive.
    const auto p = ClockParams::ornstein_uhlenbeck(1.0, 0.9);
    const auto path = sample_ou_path(p, 200.0, 0.05, 1);
    std::size_t expected = 0;
    for (const double a : path.alpha) expected += a <= -1.0 ? 1 : 0;
    EXPECT_GT(expected, 0u);
    EXPECT_EQ(path.causality_violations, expected);
}

// ---------------------------------------------------------------------------
// Discrete tick sequences

TEST(TickSequence, IdealClockTicksExactly) {
    const auto seq = sample_tick_sequence(ClockParams::ornstein_uhlenbeck(5.0, 0.0, 0.25), 40, 1);
    ASSERT_EQ(seq.ticks.size(), 41u);
    for (std::size_t k = 0; k < seq.ticks.size(); ++k) {
        EXPECT_EQ(seq.ticks[k], static_cast<double>(k) * 0.25);
    }
}

TEST(TickSequence, RejectsEmpty) {
    EXPECT_THROW(sample_tick_sequence(ClockParams::ornstein_uhlenbeck(5.0, 0.1), 0, 1), ParameterError);
}

TEST(TickSequence, MonotoneWithoutViolationsAndDeltaRecursion) {
    const auto seq = sample_tick_sequence(ClockParams::ornstein_uhlenbeck(5.0, 0.1, 1.0), 5000, 4);
    EXPECT_EQ(seq.causality_violations, 0u);
    EXPECT_EQ(seq.delta[0], 0.0);
    for (std::size_t k = 0; k + 1 < seq.ticks.size(); ++k) {
        EXPECT_GT(seq.ticks[k + 1], seq.ticks[k]);
        EXPECT_EQ(seq.delta[k + 1], seq.delta[k] + seq.alpha[k]);
    }
}

TEST(TickSequence, MeanRelativeErrorIsZero) {
    const auto p = ClockParams::ornstein_uhlenbeck(5.0, 0.1, 1.0);
    const std::vector<TickSequence> seqs{sample_tick_sequence(p, 10000, 31)};
    const auto stats = estimate_stats(seqs);
    ASSERT_TRUE(stats.theta_hat);
    // Long-run variance of the mean: sum_j c_j / N = 2 theta c0 / (eps N).
    const double se = std::sqrt(2.0 * *stats.theta_hat * stats.c_hat[0] / 10000.0);
    EXPECT_NEAR(stats.mean_alpha, 0.0, 3.0 * se);
}

TEST(TickSequence, AbsoluteErrorCorrelationMatchesDoubleSum) {
    // <Delta_k Delta_l> = eps^2 sum_{i<k} sum_{j<l} c_{i-j}, oracle from the model c_j.
    const double eps = 1.0;
    const double theta = 5.0;
    const double kappa = 0.1;
    const auto p = ClockParams::ornstein_uhlenbeck(theta, kappa, eps);
    const double c0 = (kappa / theta) * (kappa / theta);
    auto c = [&](long j) { return c0 * std::exp(-std::abs(static_cast<double>(j)) * eps / theta); };

    constexpr int n_paths = 20000;
    constexpr int kmax = 5;
    std::vector<TickSequence> seqs;
    for (int s = 0; s < n_paths; ++s) seqs.push_back(sample_tick_sequence(p, kmax, 77, s));

    for (int k = 1; k <= kmax; ++k) {
        for (int l = 1; l <= kmax; ++l) {
            double oracle = 0.0;
            for (int i = 0; i < k; ++i)
                for (int j = 0; j < l; ++j) oracle += eps * eps * c(i - j);
            std::vector<double> products;
            for (const auto& s : seqs) products.push_back(s.delta[k] * s.delta[l]);
            const auto m = moments(products);
            EXPECT_NEAR(m.mean, oracle, 5.0 * std::sqrt(m.var / n_paths)) << "k=" << k << " l=" << l;
        }
    }
}

TEST(TickSequence, VarianceSlopeMatchesDoubleSumAsymptote) {
    // Large-k growth of eps^2 sum_{i,j<k} c_{i-j} is k eps * (eps sum_j c_j);
    // for c_j = c0 exp(-|j| eps/theta) the sum is c0 coth(eps / (2 theta)).
    const double eps = 1.0;
    const double theta = 5.0;
    const double kappa = 0.1;
    const auto p = ClockParams::ornstein_uhlenbeck(theta, kappa, eps);
    const double c0 = (kappa / theta) * (kappa / theta);
    const double oracle_slope = eps * c0 / std::tanh(eps / (2.0 * theta));

    std::vector<TickSequence> seqs;
    for (int s = 0; s < 1000; ++s) seqs.push_back(sample_tick_sequence(p, 1000, 5, s));
    const auto stats = estimate_stats(seqs);
    ASSERT_TRUE(stats.variance_slope);
    EXPECT_NEAR(*stats.variance_slope / oracle_slope, 1.0, 0.10);
    // The asymptote is twice kappa^2/theta.
    EXPECT_NEAR(oracle_slope / (kappa * kappa / theta), 2.0, 0.01);
}

// ---------------------------------------------------------------------------
// Statistics

TEST(EstimateStats, RecoversThetaAndKappa) {
    const auto p = ClockParams::ornstein_uhlenbeck(1.0, 0.05);
    std::vector<NoisePath> paths;
    for (int k = 0; k < 1000; ++k) paths.push_back(sample_ou_path(p, 50.0, 0.05, 12, k));
    const auto stats = estimate_stats(paths);
    ASSERT_TRUE(stats.theta_hat);
    ASSERT_TRUE(stats.kappa_hat);
    EXPECT_NEAR(*stats.theta_hat, 1.0, 0.10);
    EXPECT_NEAR(*stats.kappa_hat, 0.05, 0.005);
    EXPECT_EQ(stats.causality_violations, 0u);
}

TEST(EstimateStats, EmptyInputIsAnError) {
    EXPECT_THROW(estimate_stats(std::span<const NoisePath>{}), ParameterError);
    EXPECT_THROW(estimate_stats(std::span<const TickSequence>{}), ParameterError);
}

TEST(EstimateStats, ZeroPathHasZeroStatsAndNoTheta) {
    const auto path = sample_ou_path(ClockParams::ornstein_uhlenbeck(1.0, 0.0), 20.0, 0.05, 1);
    const std::vector<NoisePath> paths{path};
    const auto stats = estimate_stats(paths);
    EXPECT_EQ(stats.mean_alpha, 0.0);
    for (const double c : stats.c_hat) EXPECT_EQ(c, 0.0);
    EXPECT_FALSE(stats.theta_hat);
    ASSERT_TRUE(stats.kappa_hat);
    EXPECT_EQ(*stats.kappa_hat, 0.0);
    ASSERT_TRUE(stats.variance_slope);
    EXPECT_EQ(*stats.variance_slope, 0.0);
}

TEST(EstimateStats, CorrelationIsInvariantUnderReversal) {
    const auto p = ClockParams::ornstein_uhlenbeck(1.0, 0.05);
    const auto path = sample_ou_path(p, 20.0, 0.05, 2);
    NoisePath reversed = path;
    std::reverse(reversed.alpha.begin(), reversed.alpha.end());
    const std::vector<NoisePath> a{path};
    const std::vector<NoisePath> b{reversed};
    const auto sa = estimate_stats(a);
    const auto sb = estimate_stats(b);
    ASSERT_EQ(sa.c_hat.size(), sb.c_hat.size());
    for (std::size_t j = 0; j < sa.c_hat.size(); ++j) {
        EXPECT_NEAR(sa.c_hat[j], sb.c_hat[j], 1e-17);
    }
}

TEST(EstimateStats, MismatchedLengthsAreAnError) {
    const auto p = ClockParams::ornstein_uhlenbeck(1.0, 0.05);
    const std::vector<NoisePath> paths{sample_ou_path(p, 10.0, 0.05, 1), sample_ou_path(p, 20.0, 0.05, 1)};
    EXPECT_THROW(estimate_stats(paths), ParameterError);
}

TEST(PathCsv, RoundTripsExactly) {
    const auto path = sample_ou_path(ClockParams::ornstein_uhlenbeck(1.0, 0.05), 2.0, 0.05, 9);
    std::stringstream ss;
    write_path_csv(ss, path);
    std::string line;
    std::getline(ss, line);
    EXPECT_EQ(line, "t,alpha,delta");
    for (std::size_t i = 0; i < path.size(); ++i) {
        ASSERT_TRUE(std::getline(ss, line));
        std::stringstream row(line);
        std::string t, a, d;
        std::getline(row, t, ',');
        std::getline(row, a, ',');
        std::getline(row, d, ',');
        EXPECT_EQ(std::stod(a), path.alpha[i]);
        EXPECT_EQ(std::stod(d), path.delta[i]);
    }
}

TEST(StatsReport, KeyValueLines) {
    const std::vector<NoisePath> paths{
        sample_ou_path(ClockParams::ornstein_uhlenbeck(1.0, 0.0), 20.0, 0.05, 1)};
    std::stringstream ss;
    write_stats_report(ss, estimate_stats(paths));
    const std::string text = ss.str();
    EXPECT_NE(text.find("theta_hat = absent\n"), std::string::npos);
    EXPECT_NE(text.find("kappa_hat = 0\n"), std::string::npos);
}
