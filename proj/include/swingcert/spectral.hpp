#pragma once

// System Jacobian J = [0 I; -M^-1 L  -M^-1 D], its spectrum, the quadratic
// pencil P(lambda) = lambda^2 M + lambda D + L, and stability verdicts.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include "swingcert/equilibrium.hpp"
#include "swingcert/errors.hpp"
#include "swingcert/linalg.hpp"
#include "swingcert/netmodel.hpp"

namespace swingcert {

struct SystemJacobian {
    std::size_t n = 0;
    Eigen::MatrixXd j;  // 2n x 2n

    auto top_left() const { return j.topLeftCorner(n, n); }
    auto top_right() const { return j.topRightCorner(n, n); }
    auto bottom_left() const { return j.bottomLeftCorner(n, n); }
    auto bottom_right() const { return j.bottomRightCorner(n, n); }
};

struct SpectrumReport {
    std::vector<Complex> eigenvalues;  // sorted by real, then imaginary part
    std::vector<std::size_t> zero_cluster;
    double zero_tol = 0.0;
    double re_tol = 0.0;
    double j_norm_fro = 0.0;
    /// Non-zero-cluster eigenvalue closest to the imaginary axis (NaN if none).
    Complex lambda2{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    double max_re_nonzero = -std::numeric_limits<double>::infinity();
    /// Normalized sigma_min of P(lambda) per eigenvalue; empty unless requested.
    std::vector<double> pencil_residuals;
};

enum class StabilityVerdict { asymptotically_stable_reduced, unstable, inconclusive_zero_cluster };

inline const char* to_string(StabilityVerdict v) {
    switch (v) {
        case StabilityVerdict::asymptotically_stable_reduced: return "asymptotically_stable_reduced";
        case StabilityVerdict::unstable: return "unstable";
        case StabilityVerdict::inconclusive_zero_cluster: return "inconclusive_zero_cluster";
    }
    return "inconclusive_zero_cluster";
}

namespace spectral {

inline constexpr double kZeroTolFactor = 1e-7;
inline constexpr double kReTolFactor = 1e-7;

/// Block assembly with M = diag(M_i)/omega_s and D = diag(D_i)/omega_s.
inline SystemJacobian build_jacobian(const ReducedSystem& sys, const FlowJacobian& l) {
    const auto n = static_cast<Eigen::Index>(sys.n);
    if (l.l.rows() != n || l.l.cols() != n) throw DimensionError("build_jacobian: L must be n x n");
    if (sys.m.size() != n || sys.d.size() != n) throw DimensionError("build_jacobian: M and D must have length n");
    for (Eigen::Index i = 0; i < n; ++i)
        if (!(sys.m(i) > 0.0)) throw ModelError("build_jacobian: inertia of machine " + std::to_string(i + 1) + " must be positive");

    SystemJacobian out;
    out.n = sys.n;
    out.j = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    out.j.topRightCorner(n, n).setIdentity();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double m_inv = sys.omega_s / sys.m(i);  // (M_i / omega_s)^-1
        for (Eigen::Index k = 0; k < n; ++k) out.j(n + i, k) = -m_inv * l.l(i, k);
        out.j(n + i, n + i) = -m_inv * (sys.d(i) / sys.omega_s);
    }
    return out;
}

using linalg::eigenvalues;

/// sigma_min(P(lambda)) / (|lambda|^2 ||M||_F + |lambda| ||D||_F + ||L||_F),
/// the backward error of lambda as an eigenvalue of the pencil; zero means singular.
inline double pencil_residual(const ReducedSystem& sys, const FlowJacobian& l, Complex lambda) {
    const auto n = static_cast<Eigen::Index>(sys.n);
    Eigen::MatrixXcd p = l.l.cast<Complex>();
    for (Eigen::Index i = 0; i < n; ++i)
        p(i, i) += (lambda * lambda * sys.m(i) + lambda * sys.d(i)) / sys.omega_s;
    const double a = std::abs(lambda);
    const double scale = a * a * sys.m.norm() / sys.omega_s + a * sys.d.norm() / sys.omega_s + l.l.norm();
    if (scale == 0.0) return 0.0;
    return linalg::sigma_min(p) / scale;
}

/// Eigenvalues of J with zero cluster, lambda_2 and the largest non-zero real
/// part. Tolerances scale with ||J||_F.
inline SpectrumReport analyze_spectrum(const SystemJacobian& jac) {
    SpectrumReport r;
    r.eigenvalues = eigenvalues(jac.j);
    r.j_norm_fro = jac.j.norm();
    r.zero_tol = kZeroTolFactor * r.j_norm_fro;
    r.re_tol = kReTolFactor * r.j_norm_fro;

    bool have_lambda2 = false;
    for (std::size_t k = 0; k < r.eigenvalues.size(); ++k) {
        const Complex lam = r.eigenvalues[k];
        if (std::abs(lam) <= r.zero_tol) {
            r.zero_cluster.push_back(k);
            continue;
        }
        r.max_re_nonzero = std::max(r.max_re_nonzero, lam.real());
        auto closer = [](const Complex& a, const Complex& b) {
            if (std::abs(a.real()) != std::abs(b.real())) return std::abs(a.real()) < std::abs(b.real());
            if (std::abs(a.imag()) != std::abs(b.imag())) return std::abs(a.imag()) < std::abs(b.imag());
            return a.imag() >= 0.0 && b.imag() < 0.0;
        };
        if (!have_lambda2 || closer(lam, r.lambda2)) {
            r.lambda2 = lam;
            have_lambda2 = true;
        }
    }
    return r;
}

/// Spectrum plus per-eigenvalue pencil residuals.
inline SpectrumReport analyze_spectrum(const ReducedSystem& sys, const FlowJacobian& l, bool with_pencil) {
    SpectrumReport r = analyze_spectrum(build_jacobian(sys, l));
    if (with_pencil) {
        r.pencil_residuals.reserve(r.eigenvalues.size());
        for (const auto& lam : r.eigenvalues) r.pencil_residuals.push_back(pencil_residual(sys, l, lam));
    }
    return r;
}

/// Stable modulo the rotation mode iff the zero cluster is a single
/// eigenvalue and everything else sits left of -re_tol.
inline StabilityVerdict stability_verdict(const SpectrumReport& spec) {
    if (spec.max_re_nonzero > spec.re_tol) return StabilityVerdict::unstable;
    if (spec.zero_cluster.size() == 1 && spec.max_re_nonzero < -spec.re_tol)
        return StabilityVerdict::asymptotically_stable_reduced;
    return StabilityVerdict::inconclusive_zero_cluster;
}

}  // namespace spectral
}  // namespace swingcert
