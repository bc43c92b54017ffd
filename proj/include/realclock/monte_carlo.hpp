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

// Brute-force ensemble over clock realizations. Each path evolves unitarily in
// ideal time s = t + Delta(t); the ensemble mean is the clock-time density
// matrix. Results are bit-identical for any thread count: path p always draws
// from Philox stream (seed, p) and partial sums are reduced in a fixed chunk
// order with compensated summation.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <ostream>
#include <thread>
#include <vector>


#include "realclock/clock_models.hpp"
#include "realclock/errors.hpp"
#include "realclock/master_equation.hpp"
#include "realclock/numeric.hpp"
#include "realclock/quantum_core.hpp"

namespace realclock {

inline constexpr std::size_t kPathsPerChunk = 256;

/// Relative Markov-vs-exact discrepancy tolerated at the edge of the good-clock
/// regime, (kappa/theta)^2 (theta omega)^2 with kappa/theta = 0.1 and theta omega = 1.
inline constexpr double kGoodClockMarkovBound = 0.01;

struct EnsembleSpec {
    ClockParams clock;
    Hamiltonian hamiltonian;
    DensityMatrix rho0;
    std::size_t n_paths = 1;
    double horizon = 0.0;
    double dt = 0.0;
    std::uint64_t seed = 0;
    std::size_t record_every = 1; // snapshot stride on the noise grid
};

struct EnsembleOptions {
    unsigned threads = 1;
};

/// Ensemble mean at one grid time. Variances are of the mean (sample variance
/// over n_paths, divided by n_paths) and refer to energy-basis elements.
struct EnsembleSnapshot {
    double t = 0.0;
    DensityMatrix mean;        // computational basis
    Matrix mean_energy_basis;
    Eigen::MatrixXd var_re;
    Eigen::MatrixXd var_im;
    Eigen::MatrixXd cov_re_im;

    double stderr_re(int n, int m) const { return std::sqrt(std::max(0.0, var_re(n, m))); }
    double stderr_im(int n, int m) const { return std::sqrt(std::max(0.0, var_im(n, m))); }

    /// Standard error of the complex element <rho_nm>: sqrt(E|X - <X>|^2 / n).
    double element_stderr(int n, int m) const { return std::sqrt(std::max(0.0, var_re(n, m) + var_im(n, m))); }

    /// Standard error of |<rho_nm>| (energy basis), linearized along the mean.
    /// Only fluctuations parallel to the mean enter, so for a coherence that
    /// dephases by phase noise this is second order in the noise and much
    /// smaller than element_stderr.
    double abs_stderr(int n, int m) const {
        const Complex z = mean_energy_basis(n, m);
        const double a = std::abs(z);
        if (a == 0.0) {
            return std::sqrt(std::max(0.0, var_re(n, m) + var_im(n, m)));
        }
        const double ur = z.real() / a;
        const double ui = z.imag() / a;
        const double v = ur * ur * var_re(n, m) + ui * ui * var_im(n, m) + 2.0 * ur * ui * cov_re_im(n, m);
        return std::sqrt(std::max(0.0, v));
    }
};

struct EnsembleResult {
    std::vector<EnsembleSnapshot> snapshots;
    std::size_t n_paths = 0;
    std::size_t causality_violations = 0;
    std::size_t paths_with_violations = 0;
};

inline void validate(const EnsembleSpec& spec) {
    if (spec.n_paths < 1) {
        throw ParameterError("ensemble: n_paths must be at least 1");
    }
    if (spec.record_every < 1) {
        throw ParameterError("ensemble: record_every must be at least 1");
    }
    if (spec.rho0.dim() != spec.hamiltonian.dim()) {
        throw ParameterError("ensemble: state and Hamiltonian dimensions differ");
    }
    if (spec.clock.model() != CorrelationModel::OrnsteinUhlenbeck) {
        throw ParameterError("ensemble: path sampling requires an Ornstein-Uhlenbeck clock");
    }
    if (!(spec.dt > 0.0) || spec.dt > spec.clock.theta() / 20.0 * (1.0 + 1e-12)) {
        throw ParameterError("ensemble: dt must satisfy 0 < dt <= theta/20");
    }
    const double w = spec.hamiltonian.max_gap();
    if (w > 0.0 && spec.dt > 0.1 / w * (1.0 + 1e-12)) {
        throw ParameterError("ensemble: dt must resolve the fastest phase (dt <= 0.1/max|omega_nm|)");
    }
    if (!(spec.horizon >= spec.dt * (1.0 - 1e-12)) || !std::isfinite(spec.horizon)) {
        throw ParameterError("ensemble: horizon must be at least dt");
    }
}

namespace detail {

/// Grid indices at which snapshots are taken (stride, plus the final point).
inline std::vector<std::size_t> record_indices(std::size_t n_intervals, std::size_t stride) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i <= n_intervals; i += stride) {
        idx.push_back(i);
    }
    if (idx.back() != n_intervals) {
        idx.push_back(n_intervals);
    }
    return idx;
}

struct MomentSums {
    CompensatedSum re, im, re2, im2, re_im;

    void add(Complex z) {
        re.add(z.real());
        im.add(z.imag());
        re2.add(z.real() * z.real());
        im2.add(z.imag() * z.imag());
        re_im.add(z.real() * z.imag());
    }

    void add(const MomentSums& o) {
        re.add(o.re);
        im.add(o.im);
        re2.add(o.re2);
        im2.add(o.im2);
        re_im.add(o.re_im);
    }
};

struct ChunkResult {
    std::vector<MomentSums> sums; // [record][n * dim + m]
    std::size_t violations = 0;
    std::size_t violating_paths = 0;
};

inline ChunkResult simulate_chunk(const EnsembleSpec& spec, const Matrix& rho0_energy,
                                  const std::vector<std::size_t>& records, std::size_t first,
                                  std::size_t last) {
    const int dim = spec.hamiltonian.dim();
    const auto elems = static_cast<std::size_t>(dim * dim);
    ChunkResult out;
    out.sums.resize(records.size() * elems);
    for (std::size_t p = first; p < last; ++p) {
        const NoisePath path = sample_ou_path(spec.clock, spec.horizon, spec.dt, spec.seed, p);
        out.violations += path.causality_violations;
        out.violating_paths += path.causality_violations > 0 ? 1 : 0;
        for (std::size_t r = 0; r < records.size(); ++r) {
            const std::size_t i = records[r];
            const double s = path.time(i) + path.delta[i];
            MomentSums* row = &out.sums[r * elems];
            for (int n = 0; n < dim; ++n) {
                for (int m = 0; m < dim; ++m) {
                    const Complex z = n == m ? rho0_energy(n, m)
                                             : rho0_energy(n, m) *
                                                   std::polar(1.0, -spec.hamiltonian.omega(n, m) * s);
                    row[static_cast<std::size_t>(n * dim + m)].add(z);
                }
            }
        }
    }
    return out;
}

} // namespace detail

/// Average of exp(-iH(t + Delta_p(t))) rho0 exp(iH(t + Delta_p(t))) over
/// n_paths sampled OU clocks, at every record_every-th grid time.
inline EnsembleResult ensemble_average(const EnsembleSpec& spec, EnsembleOptions options = {}) {
    validate(spec);
    const Hamiltonian& h = spec.hamiltonian;
    const int dim = h.dim();
    const auto elems = static_cast<std::size_t>(dim * dim);
    const std::size_t n_intervals = detail::grid_intervals(spec.horizon, spec.dt);
    const auto records = detail::record_indices(n_intervals, spec.record_every);
    const Matrix rho0_energy = h.to_eigenbasis(spec.rho0.matrix());

    const std::size_t n_chunks = (spec.n_paths + kPathsPerChunk - 1) / kPathsPerChunk;
    const std::size_t workers = std::clamp<std::size_t>(options.threads, 1, n_chunks);

    std::vector<detail::MomentSums> totals(records.size() * elems);
    EnsembleResult result;
    result.n_paths = spec.n_paths;

    // Waves of one chunk per worker bound memory; each wave is reduced in chunk order.
    for (std::size_t wave = 0; wave < n_chunks; wave += workers) {
        const std::size_t wave_end = std::min(n_chunks, wave + workers);
        std::vector<detail::ChunkResult> partial(wave_end - wave);
        auto run_chunk = [&](std::size_t c) {
            const std::size_t first = c * kPathsPerChunk;
            const std::size_t last = std::min(spec.n_paths, first + kPathsPerChunk);
            partial[c - wave] = detail::simulate_chunk(spec, rho0_energy, records, first, last);
        };
        if (workers == 1) {
            run_chunk(wave);
        } else {
            std::atomic<std::size_t> next{wave};
            std::vector<std::thread> pool;
            for (std::size_t w = 0; w < wave_end - wave; ++w) {
                pool.emplace_back([&]() {
                    for (std::size_t c = next++; c < wave_end; c = next++) {
                        run_chunk(c);
                    }
                });
            }
            for (auto& t : pool) {
                t.join();
            }
        }
        for (const auto& chunk : partial) {
            for (std::size_t k = 0; k < totals.size(); ++k) {
                totals[k].add(chunk.sums[k]);
            }
            result.causality_violations += chunk.violations;
            result.paths_with_violations += chunk.violating_paths;
        }
    }

    const auto n = static_cast<double>(spec.n_paths);
    for (std::size_t r = 0; r < records.size(); ++r) {
        Matrix mean(dim, dim);
        Eigen::MatrixXd var_re(dim, dim);
        Eigen::MatrixXd var_im(dim, dim);
        Eigen::MatrixXd cov(dim, dim);
        for (int a = 0; a < dim; ++a) {
            for (int b = 0; b < dim; ++b) {
                const auto& s = totals[r * elems + static_cast<std::size_t>(a * dim + b)];
                const double mr = s.re.value() / n;
                const double mi = s.im.value() / n;
                mean(a, b) = Complex(mr, mi);
                if (spec.n_paths > 1) {
                    const double denom = (n - 1.0) * n;
                    var_re(a, b) = std::max(0.0, (s.re2.value() - n * mr * mr) / denom);
                    var_im(a, b) = std::max(0.0, (s.im2.value() - n * mi * mi) / denom);
                    cov(a, b) = (s.re_im.value() - n * mr * mi) / denom;
                } else {
                    var_re(a, b) = var_im(a, b) = cov(a, b) = 0.0;
                }
            }
        }
        EnsembleSnapshot snap{static_cast<double>(records[r]) * spec.dt,
                              DensityMatrix::unchecked(h.from_eigenbasis(mean)),
                              mean,
                              std::move(var_re),
                              std::move(var_im),
                              std::move(cov)};
        result.snapshots.push_back(std::move(snap));
    }
    return result;
}

/// Var[Delta(t)] = int_0^t int_0^t c(|t1 - t2|) dt1 dt2. Closed form for OU,
/// 2 kappa^2 (t/theta - 1 + exp(-t/theta)); otherwise 2 int_0^t (t - tau) c(tau) dtau
/// by adaptive Gauss-Kronrod quadrature.
inline double delta_variance(const ClockParams& clock, double t) {
    if (!(t >= 0.0)) {
        throw ParameterError("delta_variance: t must be non-negative");
    }
    if (clock.model() == CorrelationModel::OrnsteinUhlenbeck) {
        const double x = t / clock.theta();
        double shape = 0.0; // x - 1 + exp(-x)
        if (x < 1e-3) {
            shape = x * x * (0.5 - x * (1.0 / 6.0 - x * (1.0 / 24.0 - x / 120.0)));
        } else {
            shape = x + std::expm1(-x);
        }
        return 2.0 * clock.kappa() * clock.kappa() * shape;
    }
    if (t == 0.0) {
        return 0.0;
    }
    const auto& nodes = clock.table().tau;
    // c is linearly interpolated, so (t - tau) c(tau) is quadratic on each panel
    // and Simpson's rule is exact there.
    auto f = [&](double tau) { return (t - tau) * correlation(clock, tau); };
    CompensatedSum total;
    double lo = 0.0;
    for (std::size_t i = 1; i < nodes.size() && lo < t; ++i) {
        const double hi = std::min(nodes[i], t);
        if (hi > lo) {
            total.add((hi - lo) / 6.0 * (f(lo) + 4.0 * f(0.5 * (lo + hi)) + f(hi)));
        }
        lo = hi;
    }
    if (lo < t) {
        throw RangeError("delta_variance: t beyond tabulated correlation range");
    }
    return 2.0 * total.value();
}

/// Exact finite-time Gaussian average of exp(-i omega_nm (t + Delta(t))).
inline Complex gaussian_dephasing_factor(const ClockParams& clock, double omega_nm, double t) {
    if (!(t >= 0.0)) {
        throw ParameterError("gaussian_dephasing_factor: t must be non-negative");
    }
    if (omega_nm == 0.0) {
        return {1.0, 0.0};
    }
    const double var = delta_variance(clock, t);
    return std::polar(std::exp(-0.5 * omega_nm * omega_nm * var), -omega_nm * t);
}

struct ComparisonPoint {
    double t = 0.0;
    double mc_abs01 = 0.0;
    double stderr01 = 0.0;         // element standard error of <rho_01>
    double modulus_stderr01 = 0.0; // standard error of |<rho_01>| along the mean
    double exact_gauss_abs01 = 0.0;
    double markov_abs01 = 0.0;
    double z_gauss = 0.0;  // (mc - exact Gaussian) / stderr for |rho_01|
    double z_markov = 0.0; // (mc - Markov) / stderr for |rho_01|
    double z_gauss_modulus = 0.0;  // same, against modulus_stderr01
    double z_markov_modulus = 0.0;
    double markov_discrepancy = 0.0; // max relative |Markov - exact Gaussian| over coherences
};

struct ComparisonReport {
    std::vector<ComparisonPoint> points;
    std::size_t n_paths = 0;
    double theta = 0.0;
    double max_dev_mc_vs_gauss = 0.0;  // max element |mc - exact Gaussian|
    double max_dev_mc_vs_markov = 0.0; // max element |mc - Markov|
    double max_abs_z = 0.0;            // over re/im of every element
    double fraction_z_below_4 = 0.0;   // share of grid points with |z_gauss| < 4
    double max_abs_z_gauss_modulus = 0.0;
    double max_markov_discrepancy = 0.0;
    bool markov_breakdown = false;     // discrepancy above 5x the good-clock bound
    bool markov_questionable = false;  // theta max|omega_nm| > 1
    std::size_t causality_violations = 0;

    bool z_criterion_met() const { return fraction_z_below_4 >= 0.95; }
};

namespace detail {

inline double z_score(double deviation, double stderr) {
    if (stderr > 0.0) {
        return deviation / stderr;
    }
    return std::abs(deviation) <= 1e-12 ? 0.0 : std::numeric_limits<double>::infinity();
}

} // namespace detail

/// Runs the ensemble and both analytic references on the same grid.
/// The |rho_01| columns refer to the energy basis.
inline ComparisonReport compare_to_master(const EnsembleSpec& spec, EnsembleOptions options = {}) {
    if (spec.hamiltonian.dim() < 2) {
        throw ParameterError("compare_to_master: need at least two levels");
    }
    const EnsembleResult mc = ensemble_average(spec, options);
    const Hamiltonian& h = spec.hamiltonian;
    const int dim = h.dim();
    const double diffusion = spec.clock.diffusion();
    const Matrix rho0 = h.to_eigenbasis(spec.rho0.matrix());

    ComparisonReport report;
    report.n_paths = mc.n_paths;
    report.theta = spec.clock.theta();
    report.causality_violations = mc.causality_violations;
    report.markov_questionable = spec.clock.theta() * h.max_gap() > 1.0;

    std::size_t below = 0;
    for (const auto& snap : mc.snapshots) {
        ComparisonPoint pt;
        pt.t = snap.t;
        for (int n = 0; n < dim; ++n) {
            for (int m = 0; m < dim; ++m) {
                const double w = h.omega(n, m);
                const Complex gauss = rho0(n, m) * gaussian_dephasing_factor(spec.clock, w, snap.t);
                const Complex markov = rho0(n, m) * std::polar(std::exp(-w * w * diffusion * snap.t), -w * snap.t);
                const Complex mcv = snap.mean_energy_basis(n, m);
                report.max_dev_mc_vs_gauss = std::max(report.max_dev_mc_vs_gauss, std::abs(mcv - gauss));
                report.max_dev_mc_vs_markov = std::max(report.max_dev_mc_vs_markov, std::abs(mcv - markov));
                report.max_abs_z = std::max({report.max_abs_z,
                                             std::abs(detail::z_score(mcv.real() - gauss.real(), snap.stderr_re(n, m))),
                                             std::abs(detail::z_score(mcv.imag() - gauss.imag(), snap.stderr_im(n, m)))});
                if (n != m && std::abs(rho0(n, m)) > 0.0) {
                    pt.markov_discrepancy =
                        std::max(pt.markov_discrepancy, std::abs(markov - gauss) / std::abs(rho0(n, m)));
                }
                if (n == 0 && m == 1) {
                    pt.mc_abs01 = std::abs(mcv);
                    pt.stderr01 = snap.element_stderr(0, 1);
                    pt.modulus_stderr01 = snap.abs_stderr(0, 1);
                    pt.exact_gauss_abs01 = std::abs(gauss);
                    pt.markov_abs01 = std::abs(markov);
                    pt.z_gauss = detail::z_score(pt.mc_abs01 - pt.exact_gauss_abs01, pt.stderr01);
                    pt.z_markov = detail::z_score(pt.mc_abs01 - pt.markov_abs01, pt.stderr01);
                    pt.z_gauss_modulus = detail::z_score(pt.mc_abs01 - pt.exact_gauss_abs01, pt.modulus_stderr01);
                    pt.z_markov_modulus = detail::z_score(pt.mc_abs01 - pt.markov_abs01, pt.modulus_stderr01);
                }
            }
        }
        below += std::abs(pt.z_gauss) < 4.0 ? 1 : 0;
        report.max_abs_z_gauss_modulus = std::max(report.max_abs_z_gauss_modulus, std::abs(pt.z_gauss_modulus));
        report.max_markov_discrepancy = std::max(report.max_markov_discrepancy, pt.markov_discrepancy);
        report.points.push_back(pt);
    }
    report.fraction_z_below_4 = static_cast<double>(below) / static_cast<double>(report.points.size());
    report.markov_breakdown = report.max_markov_discrepancy > 5.0 * kGoodClockMarkovBound;
    return report;
}

/// CSV t,|rho01|_mc,stderr,|rho01|_exact_gauss,|rho01|_markov.
inline void write_comparison_csv(std::ostream& out, const ComparisonReport& report) {
    out << "t,|rho01|_mc,stderr,|rho01|_exact_gauss,|rho01|_markov\n";
    for (const auto& p : report.points) {
        const double row[] = {p.t, p.mc_abs01, p.stderr01, p.exact_gauss_abs01, p.markov_abs01};
        write_csv_row(out, row);
    }
}

/// Key-value summary block of a comparison report.
inline void write_comparison_summary(std::ostream& out, const ComparisonReport& report) {
    out << "n_paths = " << report.n_paths << '\n'
        << "grid_points = " << report.points.size() << '\n'
        << "max_dev_mc_vs_exact_gauss = " << format_double(report.max_dev_mc_vs_gauss) << '\n'
        << "max_dev_mc_vs_markov = " << format_double(report.max_dev_mc_vs_markov) << '\n'
        << "max_abs_z = " << format_double(report.max_abs_z) << '\n'
        << "fraction_z_below_4 = " << format_double(report.fraction_z_below_4) << '\n'
        << "max_abs_z_gauss_modulus = " << format_double(report.max_abs_z_gauss_modulus) << '\n'
        << "max_markov_discrepancy = " << format_double(report.max_markov_discrepancy) << '\n'
        << "markov_breakdown = " << (report.markov_breakdown ? "true" : "false") << '\n'
        << "markov_questionable = " << (report.markov_questionable ? "true" : "false") << '\n'
        << "causality_violations = " << report.causality_violations << '\n';
}

} // namespace realclock
