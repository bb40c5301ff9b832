#pragma once

// Shared fixtures and independent oracles for the test suites.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <queue>
#include <random>
#include <string>
#include <vector>

#include "swingcert/swingcert.hpp"

namespace testsupport {

using swingcert::Complex;
using swingcert::ReducedSystem;

inline std::string case_path(const std::string& name) { return std::string(SWINGCERT_CASES_DIR) + "/" + name; }

inline ReducedSystem load_reduced(const std::string& name) {
    return swingcert::report::reduce_case(swingcert::case_io::load_case(case_path(name)));
}

struct RandomOptions {
    double omega_s = 1.0;
    double extra_edge_probability = 0.4;
    double theta_lo = 0.12 * std::numbers::pi;
    double theta_hi = 0.88 * std::numbers::pi;
    double delta_spread = 0.15;
};

/// Random connected lossy system whose equilibrium is `delta` exactly
/// (P_m = P_e(delta)), with every phi_ij strictly inside (0, pi).
struct RandomCase {
    ReducedSystem sys;
    Eigen::VectorXd delta;
};

inline RandomCase random_case(std::mt19937_64& rng, std::size_t n, const RandomOptions& o = {}) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto uni = [&](double a, double b) { return a + (b - a) * u01(rng); };
    const auto nn = static_cast<Eigen::Index>(n);

    RandomCase rc;
    ReducedSystem& s = rc.sys;
    s.n = n;
    s.omega_s = o.omega_s;
    s.v_mag.resize(nn);
    s.m.resize(nn);
    s.d.resize(nn);
    s.y_mag = Eigen::MatrixXd::Zero(nn, nn);
    s.y_ang = Eigen::MatrixXd::Zero(nn, nn);
    auto link = [&](Eigen::Index i, Eigen::Index j) {
        s.y_mag(i, j) = s.y_mag(j, i) = uni(0.5, 3.0);
        s.y_ang(i, j) = s.y_ang(j, i) = uni(o.theta_lo, o.theta_hi);
    };
    for (Eigen::Index i = 1; i < nn; ++i) link(i, std::uniform_int_distribution<Eigen::Index>(0, i - 1)(rng));
    for (Eigen::Index i = 0; i < nn; ++i)
        for (Eigen::Index j = i + 1; j < nn; ++j)
            if (s.y_mag(i, j) == 0.0 && u01(rng) < o.extra_edge_probability) link(i, j);
    for (Eigen::Index i = 0; i < nn; ++i) {
        s.y_mag(i, i) = uni(0.5, 5.0);
        s.y_ang(i, i) = uni(-0.49 * std::numbers::pi, -0.05);
        s.v_mag(i) = uni(0.9, 1.1);
        s.m(i) = uni(0.5, 10.0);
        s.d(i) = uni(0.2, 5.0);
    }
    rc.delta.resize(nn);
    for (Eigen::Index i = 0; i < nn; ++i) rc.delta(i) = uni(-o.delta_spread, o.delta_spread);
    s.p_mech = swingcert::equilibrium::flow_function(s, rc.delta);
    return rc;
}

/// Damping that meets the certificate with margin factor u >= 1 at every node:
/// D_i^2 / (2 M_i) (/ omega_s for proof units) = u_i F_i.
inline void certify_damping(RandomCase& rc, std::mt19937_64& rng, swingcert::BoundUnits units, double u_lo, double u_hi) {
    std::uniform_real_distribution<double> u(u_lo, u_hi);
    const Eigen::MatrixXd l = swingcert::equilibrium::flow_jacobian(rc.sys, rc.delta).l;
    const double scale = units == swingcert::BoundUnits::proof ? rc.sys.omega_s : 1.0;
    for (Eigen::Index i = 0; i < rc.sys.d.size(); ++i)
        rc.sys.d(i) = std::sqrt(u(rng) * 2.0 * rc.sys.m(i) * scale * l(i, i));
}

inline swingcert::Equilibrium exact_equilibrium(const RandomCase& rc) {
    swingcert::Equilibrium eq;
    eq.delta_star = rc.delta;
    eq.omega_star = Eigen::VectorXd::Zero(rc.delta.size());
    eq.reference_index = swingcert::equilibrium::default_reference(rc.sys);
    return eq;
}

/// Central finite-difference Jacobian of the flow function.
inline Eigen::MatrixXd fd_jacobian(const ReducedSystem& s, const Eigen::VectorXd& delta, double h = 1e-6) {
    const auto n = delta.size();
    Eigen::MatrixXd out(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::VectorXd p = delta, m = delta;
        p(j) += h;
        m(j) -= h;
        out.col(j) = (swingcert::equilibrium::flow_function(s, p) - swingcert::equilibrium::flow_function(s, m)) / (2.0 * h);
    }
    return out;
}

/// Flow function written out term by term with complex phasors:
/// P_i = Re(E_i conj(sum_j Y_ij E_j)).
inline Eigen::VectorXd phasor_flow(const ReducedSystem& s, const Eigen::VectorXd& delta) {
    const auto n = delta.size();
    Eigen::VectorXd p(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        Complex current = 0.0;
        for (Eigen::Index j = 0; j < n; ++j)
            current += std::polar(s.y_mag(i, j), s.y_ang(i, j)) * std::polar(s.v_mag(j), delta(j));
        p(i) = (std::polar(s.v_mag(i), delta(i)) * std::conj(current)).real();
    }
    return p;
}

/// Y-bus entry by entry: each (a, b) entry sums the contribution of every
/// in-service branch touching both a and b.
inline Eigen::MatrixXcd ybus_by_summation(const std::vector<swingcert::BusRecord>& buses,
                                          const std::vector<swingcert::BranchRecord>& branches) {
    const auto n = static_cast<Eigen::Index>(buses.size());
    Eigen::MatrixXcd y(n, n);
    for (Eigen::Index a = 0; a < n; ++a)
        for (Eigen::Index b = 0; b < n; ++b) {
            Complex sum = 0.0;
            if (a == b) sum += Complex(buses[a].g_shunt, buses[a].b_shunt);
            for (const auto& br : branches) {
                if (!br.status) continue;
                const Complex ys = 1.0 / Complex(br.r, br.x);
                const Complex half_b(0.0, br.b_shunt / 2.0);
                const int ida = buses[a].id, idb = buses[b].id;
                if (a == b) {
                    if (br.from_bus == ida) sum += (ys + half_b) / (br.tap * br.tap);
                    if (br.to_bus == ida) sum += ys + half_b;
                } else if ((br.from_bus == ida && br.to_bus == idb) || (br.from_bus == idb && br.to_bus == ida)) {
                    sum -= ys / br.tap;
                }
            }
            y(a, b) = sum;
        }
    return y;
}

/// Strong connectivity by breadth-first reachability from every node over the
/// positive off-diagonal entries of an adjacency-weight matrix.
inline bool bfs_strongly_connected(const Eigen::MatrixXd& w) {
    const auto n = w.rows();
    for (Eigen::Index s = 0; s < n; ++s) {
        std::vector<bool> seen(static_cast<std::size_t>(n), false);
        std::queue<Eigen::Index> q;
        q.push(s);
        seen[static_cast<std::size_t>(s)] = true;
        Eigen::Index count = 1;
        while (!q.empty()) {
            const Eigen::Index i = q.front();
            q.pop();
            for (Eigen::Index j = 0; j < n; ++j)
                if (j != i && w(i, j) > 0.0 && !seen[static_cast<std::size_t>(j)]) {
                    seen[static_cast<std::size_t>(j)] = true;
                    ++count;
                    q.push(j);
                }
        }
        if (count != n) return false;
    }
    return true;
}

/// Roots of det P(z), P(z) = z^2 M + z D + L, by Aberth-Ehrlich iteration.
/// The Newton ratio det P / (det P)' is evaluated as 1 / tr(P^-1 P'), so no
/// polynomial coefficients or eigensolver are involved.
inline std::vector<Complex> pencil_roots(const ReducedSystem& s, const Eigen::MatrixXd& l, int max_iter = 500) {
    const auto n = static_cast<Eigen::Index>(s.n);
    const Eigen::VectorXd m = s.m / s.omega_s;
    const Eigen::VectorXd d = s.d / s.omega_s;
    const int deg = static_cast<int>(2 * n);

    // Root radius estimate from the scalar quadratics of the diagonal.
    double radius = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        radius = std::max(radius, d(i) / m(i) + std::sqrt(l.cwiseAbs().row(i).sum() / m(i)));
    radius = std::max(radius, 1.0);

    std::vector<Complex> z(static_cast<std::size_t>(deg));
    for (int k = 0; k < deg; ++k) z[k] = std::polar(radius, 2.0 * std::numbers::pi * k / deg + 0.4);

    auto newton_ratio = [&](Complex x) {
        Eigen::MatrixXcd p = l.cast<Complex>();
        Eigen::MatrixXcd dp = Eigen::MatrixXcd::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            p(i, i) += x * x * m(i) + x * d(i);
            dp(i, i) = 2.0 * x * m(i) + d(i);
        }
        // no rank threshold: near a root the trace must blow up, not be truncated
        const Complex tr = p.partialPivLu().solve(dp).trace();
        return 1.0 / tr;
    };

    for (int it = 0; it < max_iter; ++it) {
        double worst = 0.0;
        for (int k = 0; k < deg; ++k) {
            const Complex nr = newton_ratio(z[k]);
            if (!std::isfinite(nr.real()) || !std::isfinite(nr.imag())) continue;  // landed on a root
            Complex sum = 0.0;
            for (int j = 0; j < deg; ++j)
                if (j != k) sum += 1.0 / (z[k] - z[j]);
            const Complex w = nr / (1.0 - nr * sum);
            z[k] -= w;
            worst = std::max(worst, std::abs(w) / std::max(1.0, std::abs(z[k])));
        }
        if (worst < 1e-15) break;
    }
    return z;
}

/// Greedy nearest matching of two multisets; returns the largest matched
/// distance scaled by max(1, |a|), or infinity on a size mismatch.
inline double multiset_distance(std::vector<Complex> a, std::vector<Complex> b) {
    if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
    std::sort(a.begin(), a.end(), swingcert::linalg::complex_less);
    double worst = 0.0;
    std::vector<bool> used(b.size(), false);
    for (const auto& x : a) {
        std::size_t best = b.size();
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < b.size(); ++k)
            if (!used[k] && std::abs(x - b[k]) < best_d) {
                best_d = std::abs(x - b[k]);
                best = k;
            }
        used[best] = true;
        worst = std::max(worst, best_d / std::max(1.0, std::abs(x)));
    }
    return worst;
}

/// Real matrix with a prescribed spectrum: S * blockdiag(reals, 2x2 rotations) * S^-1.
inline Eigen::MatrixXd matrix_with_spectrum(std::mt19937_64& rng, const std::vector<Complex>& spectrum) {
    const auto n = static_cast<Eigen::Index>(spectrum.size());
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
    Eigen::Index k = 0;
    for (const auto& lam : spectrum) {
        if (lam.imag() < 0.0) continue;
        if (lam.imag() == 0.0) {
            b(k, k) = lam.real();
            ++k;
        } else {
            b(k, k) = b(k + 1, k + 1) = lam.real();
            b(k, k + 1) = lam.imag();
            b(k + 1, k) = -lam.imag();
            k += 2;
        }
    }
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd s(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) s(i, j) = g(rng) + (i == j ? 3.0 : 0.0);
    return s * b * s.inverse();
}

/// Two-machine system of the worked examples: V = 1, Y12 = 1 at pi/2, no
/// self admittance, M = D = 1, omega_s = 1.
inline ReducedSystem two_machine(double damping = 1.0) {
    ReducedSystem s;
    s.n = 2;
    s.v_mag = Eigen::VectorXd::Ones(2);
    s.y_mag = Eigen::MatrixXd::Zero(2, 2);
    s.y_mag(0, 1) = s.y_mag(1, 0) = 1.0;
    s.y_ang = Eigen::MatrixXd::Zero(2, 2);
    s.y_ang(0, 1) = s.y_ang(1, 0) = std::numbers::pi / 2.0;
    s.m = Eigen::VectorXd::Ones(2);
    s.d = Eigen::VectorXd::Constant(2, damping);
    s.p_mech = Eigen::VectorXd::Zero(2);
    s.omega_s = 1.0;
    return s;
}

}  // namespace testsupport
