#pragma once

// Dense linear-algebra helpers shared by the network, equilibrium, and
// spectral modules.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "swingcert/errors.hpp"

namespace swingcert {

using Complex = std::complex<double>;

namespace linalg {

/// Reciprocal condition threshold below which a factorization is treated as singular.
inline constexpr double kSingularRcond = 1e-13;

/// Diagonal similarity scaling by powers of two (Parlett-Reinsch) so that
/// row and column norms are comparable. Eigenvalues are unchanged; scaling by
/// powers of two introduces no rounding.
inline Eigen::MatrixXd balance(Eigen::MatrixXd a) {
    constexpr double radix = 2.0;
    constexpr double radix_sq = radix * radix;
    const Eigen::Index n = a.rows();
    bool done = false;
    while (!done) {
        done = true;
        for (Eigen::Index i = 0; i < n; ++i) {
            double c = 0.0;
            double r = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) continue;
                c += std::abs(a(j, i));
                r += std::abs(a(i, j));
            }
            if (c == 0.0 || r == 0.0) continue;
            const double s = c + r;
            double f = 1.0;
            double g = r / radix;
            while (c < g) {
                f *= radix;
                c *= radix_sq;
            }
            g = r * radix;
            while (c > g) {
                f /= radix;
                c /= radix_sq;
            }
            if ((c + r) / f < 0.95 * s) {
                done = false;
                a.row(i) /= f;
                a.col(i) *= f;
            }
        }
    }
    return a;
}

/// Orders complex numbers by real part, then imaginary part.
inline bool complex_less(const Complex& x, const Complex& y) {
    if (x.real() != y.real()) return x.real() < y.real();
    return x.imag() < y.imag();
}

/// All eigenvalues of a real nonsymmetric matrix: balancing, Hessenberg
/// reduction and Francis double-shift QR. The result is sorted by real part,
/// then imaginary part.
inline std::vector<Complex> eigenvalues(const Eigen::MatrixXd& a) {
    if (a.rows() != a.cols()) throw DimensionError("eigenvalues: matrix is not square");
    if (!a.allFinite()) throw Error("eigenvalues: matrix has non-finite entries");
    if (a.rows() == 0) return {};

    Eigen::EigenSolver<Eigen::MatrixXd> solver;
    solver.setMaxIterations(static_cast<Eigen::Index>(30 * a.rows()));
    solver.compute(balance(a), /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) {
        throw ConvergenceError("eigenvalues: QR iteration did not converge");
    }
    const Eigen::VectorXcd& values = solver.eigenvalues();
    std::vector<Complex> out(values.data(), values.data() + values.size());
    std::sort(out.begin(), out.end(), complex_less);
    return out;
}

/// Smallest singular value of a complex matrix.
inline double sigma_min(const Eigen::MatrixXcd& a) {
    if (a.size() == 0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a);
    return svd.singularValues().minCoeff();
}

/// Solves a x = b with partial-pivoting LU, rejecting ill-conditioned systems.
template <typename Matrix, typename Rhs>
auto checked_solve(const Matrix& a, const Rhs& b, const char* what) {
    Eigen::PartialPivLU<Matrix> lu(a);
    const double rc = lu.rcond();
    if (!(rc >= kSingularRcond)) throw SingularMatrixError(what, rc);
    return lu.solve(b).eval();
}

}  // namespace linalg
}  // namespace swingcert
