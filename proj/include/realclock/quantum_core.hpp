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

// Dense linear algebra for small Hilbert spaces (dim <= 64, hbar = 1).
// Every dynamical quantity is evaluated in the energy eigenbasis obtained once
// per Hamiltonian.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "realclock/errors.hpp"
#include "realclock/numeric.hpp"

namespace realclock {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;

inline constexpr int kMaxDim = 64;
inline constexpr double kHermiticityTol = 1e-12;
inline constexpr double kTraceTol = 1e-12;
inline constexpr double kPositivityTol = 1e-10;

/// max |A - A^dagger| relative to max |A| (0 for the zero matrix).
inline double hermiticity_error(const Matrix& m) {
    const double scale = m.cwiseAbs().maxCoeff();
    if (scale == 0.0) {
        return 0.0;
    }
    return (m - m.adjoint()).cwiseAbs().maxCoeff() / scale;
}

struct EigenDecomposition {
    RealVector values; // ascending
    Matrix vectors;    // columns are eigenvectors
    int sweeps = 0;
};

/// Cyclic Jacobi diagonalization of a hermitian matrix.
///
/// Converges when every off-diagonal magnitude is below 1e-13 times the
/// largest input entry. Eigenvalues come out ascending; each eigenvector is
/// rephased so its largest-magnitude component (first one on ties) is real
/// and positive.
inline EigenDecomposition diagonalize(const Matrix& input) {
    if (input.rows() != input.cols() || input.rows() == 0) {
        throw ParameterError("diagonalize: matrix must be square and non-empty");
    }
    if (hermiticity_error(input) > kHermiticityTol) {
        throw ParameterError("diagonalize: matrix is not hermitian");
    }
    const Eigen::Index n = input.rows();
    Matrix a = 0.5 * (input + input.adjoint());
    Matrix v = Matrix::Identity(n, n);
    const double threshold = 1e-13 * input.cwiseAbs().maxCoeff();

    auto max_offdiag = [&]() {
        double m = 0.0;
        for (Eigen::Index q = 1; q < n; ++q) {
            for (Eigen::Index p = 0; p < q; ++p) {
                m = std::max(m, std::abs(a(p, q)));
            }
        }
        return m;
    };

    constexpr int kMaxSweeps = 100;
    int sweep = 0;
    while (max_offdiag() >= threshold && threshold > 0.0) {
        if (sweep == kMaxSweeps) {
            throw NumericalError("diagonalize: Jacobi iteration did not converge in 100 sweeps");
        }
        ++sweep;
        for (Eigen::Index p = 0; p < n - 1; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const Complex apq = a(p, q);
                const double r = std::abs(apq);
                if (r == 0.0) {
                    continue;
                }
                // G = diag(1, conj(e)) * [[c, s], [-s, c]] makes (G^dagger A G)_pq = 0.
                const Complex e = apq / r;
                const double app = a(p, p).real();
                const double aqq = a(q, q).real();
                const double tau = (aqq - app) / (2.0 * r);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                const Complex gpp = c;
                const Complex gpq = s;
                const Complex gqp = -s * std::conj(e);
                const Complex gqq = c * std::conj(e);

                for (Eigen::Index k = 0; k < n; ++k) {
                    const Complex akp = a(k, p);
                    const Complex akq = a(k, q);
                    a(k, p) = akp * gpp + akq * gqp;
                    a(k, q) = akp * gpq + akq * gqq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const Complex apk = a(p, k);
                    const Complex aqk = a(q, k);
                    a(p, k) = std::conj(gpp) * apk + std::conj(gqp) * aqk;
                    a(q, k) = std::conj(gpq) * apk + std::conj(gqq) * aqk;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                a(p, p) = a(p, p).real();
                a(q, q) = a(q, q).real();
                for (Eigen::Index k = 0; k < n; ++k) {
                    const Complex vkp = v(k, p);
                    const Complex vkq = v(k, q);
                    v(k, p) = vkp * gpp + vkq * gqp;
                    v(k, q) = vkp * gpq + vkq * gqq;
                }
            }
        }
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        order[static_cast<std::size_t>(i)] = i;
    }
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index x, Eigen::Index y) {
        return a(x, x).real() < a(y, y).real();
    });

    EigenDecomposition out;
    out.sweeps = sweep;
    out.values.resize(n);
    out.vectors.resize(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const Eigen::Index src = order[static_cast<std::size_t>(j)];
        out.values(j) = a(src, src).real();
        Eigen::VectorXcd col = v.col(src);
        Eigen::Index lead = 0;
        double best = -1.0;
        for (Eigen::Index k = 0; k < n; ++k) {
            const double m = std::abs(col(k));
            if (m > best * (1.0 + 1e-12)) {
                best = m;
                lead = k;
            }
        }
        const Complex phase = std::conj(col(lead)) / std::abs(col(lead));
        col *= phase;
        col(lead) = std::abs(col(lead));
        out.vectors.col(j) = col;
    }
    return out;
}

/// Time-independent hermitian generator with its eigendecomposition.
class Hamiltonian {
public:
    explicit Hamiltonian(Matrix matrix) : matrix_(std::move(matrix)) {
        if (matrix_.rows() != matrix_.cols() || matrix_.rows() == 0) {
            throw ParameterError("Hamiltonian: matrix must be square and non-empty");
        }
        if (matrix_.rows() > kMaxDim) {
            throw ParameterError("Hamiltonian: dimension exceeds 64");
        }
        if (!matrix_.allFinite()) {
            throw ParameterError("Hamiltonian: entries must be finite");
        }
        if (hermiticity_error(matrix_) > kHermiticityTol) {
            throw ParameterError("Hamiltonian: matrix is not hermitian");
        }
        auto eig = diagonalize(matrix_);
        eigenvalues_ = std::move(eig.values);
        eigenvectors_ = std::move(eig.vectors);

        const double scale = eigenvalues_.cwiseAbs().maxCoeff();
        degeneracy_tol_ = 1e-10 * scale;
        max_gap_ = eigenvalues_(dim() - 1) - eigenvalues_(0);
        for (int i = 0; i < dim(); ++i) {
            for (int j = i + 1; j < dim(); ++j) {
                const double gap = std::abs(eigenvalues_(j) - eigenvalues_(i));
                if (gap > degeneracy_tol_ && (!min_gap_ || gap < *min_gap_)) {
                    min_gap_ = gap;
                }
            }
        }
    }

    static Hamiltonian diagonal(const std::vector<double>& energies) {
        Matrix m = Matrix::Zero(static_cast<Eigen::Index>(energies.size()),
                                static_cast<Eigen::Index>(energies.size()));
        for (std::size_t i = 0; i < energies.size(); ++i) {
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = energies[i];
        }
        return Hamiltonian(std::move(m));
    }

    int dim() const noexcept { return static_cast<int>(matrix_.rows()); }
    const Matrix& matrix() const noexcept { return matrix_; }
    const RealVector& eigenvalues() const noexcept { return eigenvalues_; }
    const Matrix& eigenvectors() const noexcept { return eigenvectors_; }

    /// Transition frequency omega_n - omega_m.
    double omega(int n, int m) const { return eigenvalues_(n) - eigenvalues_(m); }

    /// Largest |omega_n - omega_m|.
    double max_gap() const noexcept { return max_gap_; }

    /// Smallest non-degenerate gap; absent for a fully degenerate spectrum.
    std::optional<double> min_gap() const noexcept { return min_gap_; }

    /// Characteristic evolution time 1 / min_gap.
    std::optional<double> zeta() const {
        if (!min_gap_) {
            return std::nullopt;
        }
        return 1.0 / *min_gap_;
    }

    /// Levels closer than this are treated as degenerate.
    double degeneracy_tolerance() const noexcept { return degeneracy_tol_; }

    Matrix to_eigenbasis(const Matrix& m) const { return eigenvectors_.adjoint() * m * eigenvectors_; }
    Matrix from_eigenbasis(const Matrix& m) const { return eigenvectors_ * m * eigenvectors_.adjoint(); }

private:
    Matrix matrix_;
    RealVector eigenvalues_;
    Matrix eigenvectors_;
    std::optional<double> min_gap_;
    double max_gap_ = 0.0;
    double degeneracy_tol_ = 0.0;
};

struct StateDiagnostics {
    double trace_error = 0.0;       // |tr rho - 1|
    double hermiticity_error = 0.0; // max |rho - rho^dagger| (absolute)
    double min_eigenvalue = 0.0;
};

/// Density matrix in a fixed basis.
///
/// from_matrix() validates hermiticity, unit trace and positivity; unchecked()
/// wraps integrator output whose invariants are monitored rather than enforced.
class DensityMatrix {
public:
    static DensityMatrix from_matrix(Matrix m) {
        if (m.rows() != m.cols() || m.rows() == 0 || m.rows() > kMaxDim) {
            throw ParameterError("DensityMatrix: matrix must be square with 1 <= dim <= 64");
        }
        if (!m.allFinite()) {
            throw ParameterError("DensityMatrix: entries must be finite");
        }
        DensityMatrix rho(std::move(m));
        const auto d = rho.diagnostics();
        if (d.hermiticity_error > kHermiticityTol) {
            throw ParameterError("DensityMatrix: matrix is not hermitian");
        }
        if (d.trace_error > kTraceTol) {
            throw ParameterError("DensityMatrix: trace differs from 1");
        }
        if (d.min_eigenvalue < -kPositivityTol) {
            throw ParameterError("DensityMatrix: matrix has a negative eigenvalue");
        }
        return rho;
    }

    static DensityMatrix unchecked(Matrix m) { return DensityMatrix(std::move(m)); }

    static DensityMatrix pure(const Eigen::VectorXcd& psi) {
        const double norm = psi.norm();
        if (!(norm > 0.0)) {
            throw ParameterError("DensityMatrix::pure: zero state vector");
        }
        const Eigen::VectorXcd u = psi / norm;
        return from_matrix(u * u.adjoint());
    }

    /// Projector on the uniform superposition of all basis states.
    static DensityMatrix plus(int dim) {
        return pure(Eigen::VectorXcd::Ones(dim));
    }

    static DensityMatrix basis_state(int dim, int k) {
        if (k < 0 || k >= dim) {
            throw ParameterError("DensityMatrix::basis_state: index out of range");
        }
        Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(dim);
        psi(k) = 1.0;
        return pure(psi);
    }

    static DensityMatrix maximally_mixed(int dim) {
        if (dim < 1 || dim > kMaxDim) {
            throw ParameterError("DensityMatrix::maximally_mixed: bad dimension");
        }
        return from_matrix(Matrix::Identity(dim, dim) / static_cast<double>(dim));
    }

    int dim() const noexcept { return static_cast<int>(matrix_.rows()); }
    const Matrix& matrix() const noexcept { return matrix_; }
    Complex operator()(int n, int m) const { return matrix_(n, m); }
    Complex trace() const { return matrix_.trace(); }

    /// Eigenvalues of the hermitian part, ascending.
    RealVector eigenvalues() const { return diagonalize(0.5 * (matrix_ + matrix_.adjoint())).values; }

    StateDiagnostics diagnostics() const {
        StateDiagnostics d;
        d.trace_error = std::abs(matrix_.trace() - Complex(1.0, 0.0));
        d.hermiticity_error = (matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff();
        d.min_eigenvalue = eigenvalues().minCoeff();
        return d;
    }

private:
    explicit DensityMatrix(Matrix m) : matrix_(std::move(m)) {}

    Matrix matrix_;
};

/// Unitary phase factors exp(-i omega_nm s) in the energy eigenbasis.
inline Matrix unitary_phases(const Hamiltonian& h, double s) {
    const int n = h.dim();
    Matrix phases(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            phases(i, j) = std::polar(1.0, -h.omega(i, j) * s);
        }
    }
    return phases;
}

/// exp(-iHs) rho exp(iHs), computed in the energy eigenbasis.
inline DensityMatrix evolve_unitary(const Hamiltonian& h, const DensityMatrix& rho0, double s) {
    if (h.dim() != rho0.dim()) {
        throw ParameterError("evolve_unitary: Hamiltonian and state dimensions differ");
    }
    const Matrix rotated = h.to_eigenbasis(rho0.matrix()).cwiseProduct(unitary_phases(h, s));
    return DensityMatrix::unchecked(h.from_eigenbasis(rotated));
}

/// -sum lambda ln lambda with 0 ln 0 = 0. Eigenvalues in [-1e-10, 0) are
/// treated as zero; anything more negative is an integrity failure.
inline double von_neumann_entropy(const DensityMatrix& rho) {
    const RealVector lambda = rho.eigenvalues();
    double s = 0.0;
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        const double l = lambda(i);
        if (l < -kPositivityTol) {
            throw IntegrityError("von_neumann_entropy: eigenvalue " + format_double(l) + " is negative");
        }
        if (l > 0.0) {
            s -= l * std::log(l);
        }
    }
    return s;
}

/// Plain-text matrix: first line dim, then dim^2 lines "row col re im"
/// (0-based indices, any order, each entry exactly once).
inline Matrix read_matrix(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    auto next_content_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++line_no;
            const auto first = line.find_first_not_of(" \t\r");
            if (first != std::string::npos && line[first] != '#') {
                return true;
            }
        }
        return false;
    };

    if (!next_content_line()) {
        throw ParseError("matrix: missing dimension line", line_no + 1, 1);
    }
    long long dim = 0;
    {
        std::istringstream ss(line);
        std::string extra;
        if (!(ss >> dim) || (ss >> extra)) {
            throw ParseError("matrix: first line must be a single integer dimension", line_no, 1);
        }
    }
    if (dim < 1 || dim > kMaxDim) {
        throw ParseError("matrix: dimension must be between 1 and 64", line_no, 1);
    }
    const auto n = static_cast<Eigen::Index>(dim);
    Matrix m = Matrix::Zero(n, n);
    std::vector<bool> seen(static_cast<std::size_t>(n * n), false);
    for (Eigen::Index e = 0; e < n * n; ++e) {
        if (!next_content_line()) {
            throw ParseError("matrix: expected " + std::to_string(n * n) + " entries, found " +
                                 std::to_string(e),
                             line_no + 1, 1);
        }
        std::istringstream ss(line);
        long long row = -1;
        long long col = -1;
        double re = 0.0;
        double im = 0.0;
        std::string extra;
        if (!(ss >> row >> col >> re >> im) || (ss >> extra)) {
            throw ParseError("matrix: entry line must be 'row col re im'", line_no, 1);
        }
        if (row < 0 || row >= dim || col < 0 || col >= dim) {
            throw ParseError("matrix: index out of range", line_no, 1);
        }
        const auto idx = static_cast<std::size_t>(row * dim + col);
        if (seen[idx]) {
            throw ParseError("matrix: duplicate entry", line_no, 1);
        }
        seen[idx] = true;
        m(row, col) = Complex(re, im);
    }
    if (next_content_line()) {
        throw ParseError("matrix: unexpected trailing content", line_no, 1);
    }
    return m;
}

inline Matrix load_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open matrix file '" + path + "'");
    }
    return read_matrix(in);
}

inline void write_matrix(std::ostream& out, const Matrix& m) {
    out << m.rows() << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            out << r << ' ' << c << ' ' << format_double(m(r, c).real()) << ' '
                << format_double(m(r, c).imag()) << '\n';
        }
    }
}

} // namespace realclock
