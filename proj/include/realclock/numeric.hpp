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

#include <charconv>
#include <cmath>
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <system_error>
#include <vector>

#include "realclock/errors.hpp"

namespace realclock {

/// Neumaier (improved Kahan) compensated summation.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }

    void add(const CompensatedSum& other) {
        add(other.sum_);
        add(other.comp_);
    }

    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
};

/// Ordinary least squares y = intercept + slope * x.
inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw ParameterError("linear_fit: need at least two (x, y) pairs of equal length");
    }
    const auto n = static_cast<double>(x.size());
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) {
        throw ParameterError("linear_fit: x values are all equal");
    }
    const double slope = sxy / sxx;
    return {slope, my - slope * mx};
}

/// Decay rate r of y ~ A exp(-r x), from a least-squares fit of log y.
inline double fit_exponential_rate(std::span<const double> x, std::span<const double> y) {
    std::vector<double> logs(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!(y[i] > 0.0)) {
            throw ParameterError("fit_exponential_rate: values must be positive");
        }
        logs[i] = std::log(y[i]);
    }
    return -linear_fit(x, logs).slope;
}

/// Shortest decimal string that parses back to exactly the same double.
inline std::string format_double(double value) {
    if (value == 0.0) {
        return "0"; // also folds -0
    }
    char buffer[32];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    if (result.ec != std::errc{}) {
        throw NumericalError("format_double: conversion failed");
    }
    return std::string(buffer, result.ptr);
}

/// Writes a row of values as comma-separated text terminated by '\n'.
template <typename Range>
void write_csv_row(std::ostream& out, const Range& values) {
    bool first = true;
    for (const double v : values) {
        if (!first) {
            out << ',';
        }
        out << format_double(v);
        first = false;
    }
    out << '\n';
}

/// Formats an optional quantity for key-value reports; absent values print
/// as "absent".
inline std::string format_optional(const std::optional<double>& value) {
    return value ? format_double(*value) : std::string("absent");
}

} // namespace realclock
