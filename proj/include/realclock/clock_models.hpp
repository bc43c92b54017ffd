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

// Good-clock error processes: sampling, correlation models and empirical
// statistics.
//
// A real clock reads t while the ideal time is s = t + Delta(t). The relative
// error alpha = dDelta/dt is a zero-mean stationary process with correlation
// c(tau). Two parameters summarize it: the correlation time theta and the
// amplitude kappa, with kappa^2 = c(0) theta^2. The master-equation diffusion
// constant is D = kappa^2 / theta.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "realclock/errors.hpp"
#include "realclock/numeric.hpp"
#include "realclock/philox.hpp"

namespace realclock {

enum class CorrelationModel { OrnsteinUhlenbeck, Tabulated };

/// Correlation c(tau) sampled at tau[0] = 0 < tau[1] < ... ; linearly
/// interpolated and extended evenly to negative lags.
struct CorrelationTable {
    std::vector<double> tau;
    std::vector<double> c;
};

/// Noise-to-correlation-time ratio above which a clock is no longer treated
/// as good. Crossing it produces a warning, never a rejection.
inline constexpr double kGoodClockRatio = 0.1;

class ClockParams {
public:
    /// Ornstein-Uhlenbeck clock, c(tau) = (kappa/theta)^2 exp(-|tau|/theta).
    /// kappa = 0 is the ideal clock.
    static ClockParams ornstein_uhlenbeck(double theta, double kappa, double epsilon = 1.0) {
        if (!(theta > 0.0) || !std::isfinite(theta)) {
            throw ParameterError("clock: theta must be positive and finite");
        }
        if (!(kappa >= 0.0) || !std::isfinite(kappa)) {
            throw ParameterError("clock: kappa must be non-negative and finite");
        }
        if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
            throw ParameterError("clock: epsilon must be positive and finite");
        }
        const double ratio = kappa / theta;
        if (!(ratio * ratio < 1.0)) {
            throw ParameterError("clock: c0 = (kappa/theta)^2 must be below 1");
        }
        ClockParams p;
        p.epsilon_ = epsilon;
        p.theta_ = theta;
        p.kappa_ = kappa;
        p.model_ = CorrelationModel::OrnsteinUhlenbeck;
        return p;
    }

    /// Gaussian clock with a user-supplied correlation. theta and kappa are
    /// derived from the table: theta = int_0^taumax c / c(0), kappa = theta sqrt(c(0)).
    static ClockParams tabulated(CorrelationTable table, double epsilon = 1.0) {
        if (table.tau.size() != table.c.size() || table.tau.size() < 2) {
            throw ParameterError("clock: correlation table needs at least two matching tau/c entries");
        }
        if (table.tau.front() != 0.0) {
            throw ParameterError("clock: correlation table must start at tau = 0");
        }
        for (std::size_t i = 1; i < table.tau.size(); ++i) {
            if (!(table.tau[i] > table.tau[i - 1])) {
                throw ParameterError("clock: correlation table tau must be strictly increasing");
            }
        }
        const double c0 = table.c.front();
        if (!(c0 > 0.0) || !(c0 < 1.0)) {
            throw ParameterError("clock: tabulated c(0) must lie in (0, 1)");
        }
        if (!(epsilon > 0.0)) {
            throw ParameterError("clock: epsilon must be positive");
        }
        CompensatedSum area;
        for (std::size_t i = 1; i < table.tau.size(); ++i) {
            area.add(0.5 * (table.tau[i] - table.tau[i - 1]) * (table.c[i] + table.c[i - 1]));
        }
        const double theta = area.value() / c0;
        if (!(theta > 0.0)) {
            throw ParameterError("clock: tabulated correlation has non-positive integral");
        }
        ClockParams p;
        p.epsilon_ = epsilon;
        p.theta_ = theta;
        p.kappa_ = theta * std::sqrt(c0);
        p.model_ = CorrelationModel::Tabulated;
        p.table_ = std::move(table);
        return p;
    }

    double epsilon() const noexcept { return epsilon_; }
    double theta() const noexcept { return theta_; }
    double kappa() const noexcept { return kappa_; }
    CorrelationModel model() const noexcept { return model_; }
    const CorrelationTable& table() const noexcept { return table_; }

    double c0() const noexcept { return (kappa_ / theta_) * (kappa_ / theta_); }
    double diffusion() const noexcept { return kappa_ * kappa_ / theta_; }
    double noise_ratio() const noexcept { return kappa_ / theta_; }
    bool good_clock() const noexcept { return noise_ratio() < kGoodClockRatio; }
    bool ideal() const noexcept { return kappa_ == 0.0; }

private:
    ClockParams() = default;

    double epsilon_ = 1.0;
    double theta_ = 1.0;
    double kappa_ = 0.0;
    CorrelationModel model_ = CorrelationModel::OrnsteinUhlenbeck;
    CorrelationTable table_;
};

/// Stationary correlation c(tau) of the relative error.
inline double correlation(const ClockParams& params, double tau) {
    const double lag = std::abs(tau);
    if (params.model() == CorrelationModel::OrnsteinUhlenbeck) {
        return params.c0() * std::exp(-lag / params.theta());
    }
    const auto& tab = params.table();
    if (lag > tab.tau.back()) {
        throw RangeError("correlation: lag " + format_double(tau) + " outside tabulated range");
    }
    const auto upper = std::upper_bound(tab.tau.begin(), tab.tau.end(), lag);
    if (upper == tab.tau.end()) {
        return tab.c.back();
    }
    const auto i = static_cast<std::size_t>(upper - tab.tau.begin());
    const double w = (lag - tab.tau[i - 1]) / (tab.tau[i] - tab.tau[i - 1]);
    return (1.0 - w) * tab.c[i - 1] + w * tab.c[i];
}

/// Clock time over which the spread of Delta stays below the system's
/// characteristic time zeta: zeta^2 theta / kappa^2. Infinite for an ideal clock.
inline double period_of_applicability(const ClockParams& params, double zeta) {
    if (!(zeta > 0.0)) {
        throw ParameterError("period_of_applicability: zeta must be positive");
    }
    if (params.ideal()) {
        return std::numeric_limits<double>::infinity();
    }
    return zeta * zeta * params.theta() / (params.kappa() * params.kappa());
}

/// One realization of a continuous clock on the uniform grid t_i = i * grid_dt.
struct NoisePath {
    double grid_dt = 0.0;
    std::vector<double> alpha;
    std::vector<double> delta;
    std::size_t causality_violations = 0;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    std::size_t size() const noexcept { return alpha.size(); }
    double time(std::size_t i) const noexcept { return static_cast<double>(i) * grid_dt; }
};

/// Tick readouts s_k = k epsilon + Delta_k of a discrete clock.
struct TickSequence {
    double epsilon = 0.0;
    std::vector<double> alpha; // alpha_0 .. alpha_{n-1}
    std::vector<double> delta; // Delta_0 .. Delta_n
    std::vector<double> ticks; // s_0 .. s_n
    std::size_t causality_violations = 0;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

namespace detail {

/// Number of grid intervals covering [0, horizon] at spacing dt.
inline std::size_t grid_intervals(double horizon, double dt) {
    const double ratio = horizon / dt;
    const auto n = static_cast<std::size_t>(std::floor(ratio * (1.0 + 1e-12)));
    return std::max<std::size_t>(n, 1);
}

inline std::size_t count_violations(std::span<const double> alpha) {
    return static_cast<std::size_t>(
        std::count_if(alpha.begin(), alpha.end(), [](double a) { return a <= -1.0; }));
}

/// Fills alpha with a stationary OU chain of one-step decay exp(-step/theta).
inline void fill_ou_chain(const ClockParams& params, double step, PhiloxStream& rng,
                          std::span<double> alpha) {
    if (alpha.empty()) {
        return;
    }
    if (params.ideal()) {
        std::fill(alpha.begin(), alpha.end(), 0.0);
        return;
    }
    const double sigma = params.noise_ratio();
    const double decay = std::exp(-step / params.theta());
    const double innovation = sigma * std::sqrt(-std::expm1(-2.0 * step / params.theta()));
    alpha[0] = sigma * rng.normal();
    for (std::size_t i = 1; i < alpha.size(); ++i) {
        alpha[i] = decay * alpha[i - 1] + innovation * rng.normal();
    }
}

} // namespace detail

/// Stationary Ornstein-Uhlenbeck path on [0, horizon] with exact one-step
/// updates. Delta is accumulated by the trapezoid rule; alpha <= -1 samples
/// are counted, not rejected. The grid step must resolve theta (dt <= theta/20).
inline NoisePath sample_ou_path(const ClockParams& params, double horizon, double dt,
                                std::uint64_t seed, std::uint64_t stream = 0) {
    if (params.model() != CorrelationModel::OrnsteinUhlenbeck) {
        throw ParameterError("sample_ou_path: clock model is not Ornstein-Uhlenbeck");
    }
    if (!(dt > 0.0) || dt > params.theta() / 20.0 * (1.0 + 1e-12)) {
        throw ParameterError("sample_ou_path: dt must satisfy 0 < dt <= theta/20");
    }
    if (!(horizon >= dt * (1.0 - 1e-12)) || !std::isfinite(horizon)) {
        throw ParameterError("sample_ou_path: horizon must be at least dt");
    }
    const std::size_t n = detail::grid_intervals(horizon, dt);

    NoisePath path;
    path.grid_dt = dt;
    path.seed = seed;
    path.stream = stream;
    path.alpha.resize(n + 1);
    path.delta.resize(n + 1);

    PhiloxStream rng(seed, stream);
    detail::fill_ou_chain(params, dt, rng, path.alpha);

    path.delta[0] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        path.delta[i + 1] = path.delta[i] + 0.5 * dt * (path.alpha[i] + path.alpha[i + 1]);
    }
    path.causality_violations = detail::count_violations(path.alpha);
    return path;
}

/// Discrete clock: alpha_k is the OU chain sampled at spacing epsilon and
/// Delta_{k+1} = Delta_k + epsilon alpha_k with Delta_0 = 0.
inline TickSequence sample_tick_sequence(const ClockParams& params, std::int64_t n_ticks,
                                         std::uint64_t seed, std::uint64_t stream = 0) {
    if (n_ticks < 1) {
        throw ParameterError("sample_tick_sequence: n_ticks must be at least 1");
    }
    if (params.model() != CorrelationModel::OrnsteinUhlenbeck) {
        throw ParameterError("sample_tick_sequence: clock model is not Ornstein-Uhlenbeck");
    }
    const auto n = static_cast<std::size_t>(n_ticks);
    const double eps = params.epsilon();

    TickSequence seq;
    seq.epsilon = eps;
    seq.seed = seed;
    seq.stream = stream;
    seq.alpha.resize(n);
    seq.delta.resize(n + 1);
    seq.ticks.resize(n + 1);

    PhiloxStream rng(seed, stream);
    detail::fill_ou_chain(params, eps, rng, seq.alpha);

    seq.delta[0] = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        seq.delta[k + 1] = seq.delta[k] + eps * seq.alpha[k];
    }
    for (std::size_t k = 0; k <= n; ++k) {
        seq.ticks[k] = static_cast<double>(k) * eps + seq.delta[k];
    }
    seq.causality_violations = detail::count_violations(seq.alpha);
    return seq;
}

/// Empirical clock statistics pooled over an ensemble of equal-length series.
struct ClockStats {
    double step = 0.0;           // grid spacing of the series
    std::size_t n_series = 0;
    std::size_t series_length = 0;
    double mean_alpha = 0.0;
    std::vector<double> c_hat;   // lags j = 0 .. max_lag, biased (1/N) normalization
    std::size_t theta_lags = 0;  // lags summed into theta_hat
    std::optional<double> theta_hat;
    std::optional<double> kappa_hat;
    std::optional<double> variance_slope; // d<Delta^2>/dt at large lag
    std::size_t causality_violations = 0;
};

namespace detail {

inline ClockStats estimate_from_series(double step,
                                       const std::vector<std::span<const double>>& alphas,
                                       const std::vector<std::span<const double>>& deltas,
                                       std::size_t violations) {
    if (alphas.empty()) {
        throw ParameterError("estimate_stats: no paths supplied");
    }
    const std::size_t n = alphas.front().size();
    for (std::size_t p = 0; p < alphas.size(); ++p) {
        if (alphas[p].size() != n || deltas[p].size() != deltas.front().size()) {
            throw ParameterError("estimate_stats: all paths must have the same length");
        }
    }
    if (n < 4) {
        throw ParameterError("estimate_stats: paths are too short");
    }

    ClockStats stats;
    stats.step = step;
    stats.n_series = alphas.size();
    stats.series_length = n;
    stats.causality_violations = violations;

    CompensatedSum mean;
    for (const auto& a : alphas) {
        for (const double x : a) {
            mean.add(x);
        }
    }
    const double total = static_cast<double>(n) * static_cast<double>(alphas.size());
    stats.mean_alpha = mean.value() / total;

    // Zero mean is a good-clock axiom, so the correlation is not re-centred.
    const std::size_t max_lag = std::max<std::size_t>(1, n / 4);
    stats.c_hat.assign(max_lag + 1, 0.0);
    for (std::size_t j = 0; j <= max_lag; ++j) {
        double acc = 0.0;
        for (const auto& a : alphas) {
            double s = 0.0;
            for (std::size_t i = 0; i + j < n; ++i) {
                s += a[i] * a[i + j];
            }
            acc += s;
        }
        stats.c_hat[j] = acc / total;
    }

    const double c0 = stats.c_hat[0];
    if (c0 > 0.0) {
        // Initial positive sequence: sum lags until the first non-positive estimate.
        double sum = 0.0;
        std::size_t used = 0;
        for (std::size_t j = 1; j <= max_lag && stats.c_hat[j] > 0.0; ++j) {
            sum += stats.c_hat[j];
            used = j;
        }
        stats.theta_lags = used;
        const double theta = step * (c0 + 2.0 * sum) / (2.0 * c0);
        stats.theta_hat = theta;
        stats.kappa_hat = theta * std::sqrt(c0);
    } else {
        stats.kappa_hat = 0.0;
    }

    // Variance growth from stationary increments Delta(t + L) - Delta(t): each
    // has the law of Delta(L) since Delta(0) = 0. The fit window sits where the
    // growth is linear (lags of 5-10 theta_hat, else the last quarter-range).
    const std::size_t n_delta = deltas.front().size();
    const std::size_t lag_cap = (n_delta - 1) / 2;
    std::size_t lag_lo = std::max<std::size_t>(1, lag_cap / 2);
    std::size_t lag_hi = lag_cap;
    if (stats.theta_hat) {
        const auto lo = static_cast<std::size_t>(std::ceil(5.0 * *stats.theta_hat / step));
        const auto hi = static_cast<std::size_t>(std::ceil(10.0 * *stats.theta_hat / step));
        if (hi <= lag_cap && lo >= 1) {
            lag_lo = lo;
            lag_hi = hi;
        }
    }
    if (lag_hi > lag_lo) {
        const std::size_t stride = std::max<std::size_t>(1, (lag_hi - lag_lo) / 64);
        std::vector<double> lags;
        std::vector<double> variances;
        for (std::size_t lag = lag_lo; lag <= lag_hi; lag += stride) {
            double acc = 0.0;
            std::size_t count = 0;
            for (const auto& d : deltas) {
                for (std::size_t i = 0; i + lag < n_delta; ++i) {
                    const double inc = d[i + lag] - d[i];
                    acc += inc * inc;
                }
                count += n_delta - lag;
            }
            lags.push_back(static_cast<double>(lag) * step);
            variances.push_back(acc / static_cast<double>(count));
        }
        if (lags.size() >= 2) {
            stats.variance_slope = linear_fit(lags, variances).slope;
        }
    }
    return stats;
}

} // namespace detail

/// Pooled statistics of continuous-clock paths (all with the same grid).
inline ClockStats estimate_stats(std::span<const NoisePath> paths) {
    if (paths.empty()) {
        throw ParameterError("estimate_stats: no paths supplied");
    }
    std::vector<std::span<const double>> alphas;
    std::vector<std::span<const double>> deltas;
    std::size_t violations = 0;
    for (const auto& p : paths) {
        if (p.grid_dt != paths.front().grid_dt) {
            throw ParameterError("estimate_stats: paths must share one grid step");
        }
        alphas.emplace_back(p.alpha);
        deltas.emplace_back(p.delta);
        violations += p.causality_violations;
    }
    return detail::estimate_from_series(paths.front().grid_dt, alphas, deltas, violations);
}

/// Pooled statistics of discrete tick sequences (all with the same epsilon).
inline ClockStats estimate_stats(std::span<const TickSequence> sequences) {
    if (sequences.empty()) {
        throw ParameterError("estimate_stats: no tick sequences supplied");
    }
    std::vector<std::span<const double>> alphas;
    std::vector<std::span<const double>> deltas;
    std::size_t violations = 0;
    for (const auto& s : sequences) {
        if (s.epsilon != sequences.front().epsilon) {
            throw ParameterError("estimate_stats: tick sequences must share one epsilon");
        }
        alphas.emplace_back(s.alpha);
        deltas.emplace_back(s.delta);
        violations += s.causality_violations;
    }
    return detail::estimate_from_series(sequences.front().epsilon, alphas, deltas, violations);
}

/// CSV with columns t, alpha, delta.
inline void write_path_csv(std::ostream& out, const NoisePath& path) {
    out << "t,alpha,delta\n";
    for (std::size_t i = 0; i < path.size(); ++i) {
        const double row[] = {path.time(i), path.alpha[i], path.delta[i]};
        write_csv_row(out, row);
    }
}

/// Flat key = value report.
inline void write_stats_report(std::ostream& out, const ClockStats& stats) {
    out << "step = " << format_double(stats.step) << '\n'
        << "n_series = " << stats.n_series << '\n'
        << "series_length = " << stats.series_length << '\n'
        << "mean_alpha = " << format_double(stats.mean_alpha) << '\n'
        << "c0_hat = " << format_double(stats.c_hat.empty() ? 0.0 : stats.c_hat[0]) << '\n'
        << "theta_hat = " << format_optional(stats.theta_hat) << '\n'
        << "theta_lags = " << stats.theta_lags << '\n'
        << "kappa_hat = " << format_optional(stats.kappa_hat) << '\n'
        << "variance_slope = " << format_optional(stats.variance_slope) << '\n'
        << "causality_violations = " << stats.causality_violations << '\n';
}

} // namespace realclock
