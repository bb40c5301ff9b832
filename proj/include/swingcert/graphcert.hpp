#pragma once

// Weighted digraph induced by the flow Jacobian, Omega membership, M-matrix
// property checks and the per-node stability certificate.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "swingcert/equilibrium.hpp"
#include "swingcert/errors.hpp"
#include "swingcert/linalg.hpp"
#include "swingcert/netmodel.hpp"

namespace swingcert {

struct Arc {
    std::size_t from = 0;
    std::size_t to = 0;
    double weight = 0.0;  // V_i V_j Y_ij sin(phi_ij)
    double phi = 0.0;     // theta_ij - delta_i + delta_j
};

struct InducedDigraph {
    std::size_t n = 0;
    std::vector<Arc> arcs;

    /// D+(G) - A(G): out-degree diagonal minus the weighted adjacency.
    Eigen::MatrixXd laplacian() const {
        const auto nn = static_cast<Eigen::Index>(n);
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(nn, nn);
        for (const auto& a : arcs) {
            out(a.from, a.to) -= a.weight;
            out(a.from, a.from) += a.weight;
        }
        return out;
    }
};

struct PhiViolation {
    std::size_t from = 0;
    std::size_t to = 0;
    double phi = 0.0;
};

struct OmegaCheck {
    bool in_omega = false;
    bool omega_zero = false;
    double phi_min = std::numeric_limits<double>::quiet_NaN();
    double phi_max = std::numeric_limits<double>::quiet_NaN();
    std::vector<PhiViolation> violating_pairs;
};

enum class BoundUnits { theorem, proof };

inline const char* to_string(BoundUnits u) { return u == BoundUnits::theorem ? "theorem" : "proof"; }

struct CertificateReport {
    Eigen::VectorXd s;      // f - bound
    Eigen::VectorXd f;      // sum_{j != i} V_i V_j Y_ij sin(phi_ij)
    Eigen::VectorXd bound;  // D_i^2 / (2 M_i), optionally / omega_s
    bool certified = false;
    std::size_t worst_node = 0;
    /// Reactive power injected at each internal node; empty after a retune.
    Eigen::VectorXd q;
    BoundUnits units = BoundUnits::theorem;

    double min_s() const { return s.size() ? s.minCoeff() : 0.0; }
    double max_s() const { return s.size() ? s.maxCoeff() : 0.0; }
};

struct LaplacianProperties {
    bool applicable = true;  // evaluated inside Omega
    double row_sum_inf = 0.0;
    bool sign_pattern_ok = true;
    std::vector<std::pair<std::size_t, std::size_t>> sign_violations;
    bool gershgorin_ok = true;
    bool minors_checked = false;
    double min_principal_minor = std::numeric_limits<double>::quiet_NaN();
    bool minors_ok = true;
    std::vector<Complex> eigenvalues;
    double min_eigen_re = std::numeric_limits<double>::quiet_NaN();
    std::vector<Complex> eigen_violations;
    std::size_t zero_eigen_count = 0;

    bool ok() const {
        return sign_pattern_ok && gershgorin_ok && minors_ok && eigen_violations.empty() && zero_eigen_count >= 1;
    }
};

namespace graphcert {

inline constexpr double kPhiMargin = 1e-9;
inline constexpr double kMinorTolerance = 1e-10;
inline constexpr double kEigenReTolerance = 1e-9;
inline constexpr std::size_t kMaxMinorOrder = 8;

/// Arcs (i, j) for every i != j with Y_ij > 0, weighted per w_ij = V_i V_j Y_ij sin(phi_ij).
inline InducedDigraph induced_digraph(const ReducedSystem& sys, const Eigen::VectorXd& delta) {
    equilibrium::check_dimension(sys, delta, "induced_digraph");
    InducedDigraph g;
    g.n = sys.n;
    const auto n = static_cast<Eigen::Index>(sys.n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j || !(sys.y_mag(i, j) > 0.0)) continue;
            const double phi = sys.y_ang(i, j) - delta(i) + delta(j);
            g.arcs.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j),
                              sys.v_mag(i) * sys.v_mag(j) * sys.y_mag(i, j) * std::sin(phi), phi});
        }
    }
    return g;
}

/// Strict membership 0 < phi_ij < pi on every arc (with margin `eps`), and omega = 0.
inline OmegaCheck check_omega(const InducedDigraph& g, const Eigen::VectorXd& omega, double eps = kPhiMargin) {
    OmegaCheck out;
    out.omega_zero = (omega.array() == 0.0).all();
    for (const auto& a : g.arcs) {
        out.phi_min = std::isnan(out.phi_min) ? a.phi : std::min(out.phi_min, a.phi);
        out.phi_max = std::isnan(out.phi_max) ? a.phi : std::max(out.phi_max, a.phi);
        if (!(a.phi > eps && a.phi < std::numbers::pi - eps)) out.violating_pairs.push_back({a.from, a.to, a.phi});
    }
    out.in_omega = out.omega_zero && out.violating_pairs.empty();
    return out;
}

/// True iff every node reaches every other along positive-weight arcs.
/// Forward and reverse reachability from node 0, O(nodes + arcs).
inline bool strongly_connected(const InducedDigraph& g) {
    if (g.n <= 1) return true;
    std::vector<std::vector<std::size_t>> fwd(g.n), rev(g.n);
    for (const auto& a : g.arcs) {
        if (!(a.weight > 0.0)) continue;
        fwd[a.from].push_back(a.to);
        rev[a.to].push_back(a.from);
    }
    auto reaches_all = [&](const std::vector<std::vector<std::size_t>>& adj) {
        std::vector<bool> seen(g.n, false);
        std::vector<std::size_t> stack{0};
        seen[0] = true;
        std::size_t count = 1;
        while (!stack.empty()) {
            const std::size_t u = stack.back();
            stack.pop_back();
            for (const std::size_t v : adj[u]) {
                if (seen[v]) continue;
                seen[v] = true;
                ++count;
                stack.push_back(v);
            }
        }
        return count == g.n;
    };
    return reaches_all(fwd) && reaches_all(rev);
}

/// Sign pattern, Gershgorin containment, principal minors (n <= 8) and
/// spectrum of L. `applicable` records whether L was evaluated inside Omega;
/// violations are only expected outside it.
inline LaplacianProperties laplacian_properties(const FlowJacobian& jac, bool applicable = true) {
    const Eigen::MatrixXd& l = jac.l;
    const auto n = l.rows();
    LaplacianProperties p;
    p.applicable = applicable;
    const double norm_inf = n ? l.cwiseAbs().rowwise().sum().maxCoeff() : 0.0;
    const double scale = norm_inf > 0.0 ? norm_inf : 1.0;

    p.row_sum_inf = n ? l.rowwise().sum().cwiseAbs().maxCoeff() : 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (l(i, i) < 0.0) {
            p.sign_pattern_ok = false;
            p.sign_violations.emplace_back(i, i);
        }
        double radius = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            radius += std::abs(l(i, j));
            if (l(i, j) > 0.0) {
                p.sign_pattern_ok = false;
                p.sign_violations.emplace_back(i, j);
            }
        }
        // disc centred at L_ii with this radius lies in Re >= 0
        if (l(i, i) - radius < -1e-12 * scale) p.gershgorin_ok = false;
    }

    if (static_cast<std::size_t>(n) <= kMaxMinorOrder && n > 0) {
        p.minors_checked = true;
        // Extended precision with the diagonal rebuilt as minus the off-diagonal
        // row sum whenever L already has zero row sums to working precision: the
        // full minor is then exactly zero instead of O(eps * prod lambda_k).
        Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> lx = l.cast<long double>();
        if (p.row_sum_inf <= 1e-12 * scale)
            for (Eigen::Index i = 0; i < n; ++i) {
                long double off = 0.0L;
                for (Eigen::Index j = 0; j < n; ++j)
                    if (j != i) off += lx(i, j);
                lx(i, i) = -off;
            }
        p.min_principal_minor = std::numeric_limits<double>::infinity();
        const std::uint32_t subsets = 1u << n;
        for (std::uint32_t mask = 1; mask < subsets; ++mask) {
            std::vector<Eigen::Index> idx;
            for (Eigen::Index k = 0; k < n; ++k)
                if (mask & (1u << k)) idx.push_back(k);
            Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic> sub(idx.size(), idx.size());
            for (std::size_t a = 0; a < idx.size(); ++a)
                for (std::size_t b = 0; b < idx.size(); ++b) sub(a, b) = lx(idx[a], idx[b]);
            p.min_principal_minor = std::min(p.min_principal_minor, static_cast<double>(sub.determinant()));
        }
        p.minors_ok = p.min_principal_minor >= -kMinorTolerance;
    }

    p.eigenvalues = linalg::eigenvalues(l);
    const double zero_tol = 1e-7 * scale;
    p.min_eigen_re = std::numeric_limits<double>::infinity();
    for (const auto& lam : p.eigenvalues) {
        p.min_eigen_re = std::min(p.min_eigen_re, lam.real());
        if (lam.real() < -kEigenReTolerance) p.eigen_violations.push_back(lam);
        if (std::abs(lam) <= zero_tol) ++p.zero_eigen_count;
    }
    return p;
}

/// D_i^2 / (2 M_i) as printed in the theorem, or D_i^2 / (2 M_i omega_s) to
/// match the omega_s-scaled inertia and damping matrices of the Jacobian.
inline double node_bound(double m, double d, BoundUnits units, double omega_s) {
    const double b = d * d / (2.0 * m);
    return units == BoundUnits::theorem ? b : b / omega_s;
}

namespace detail {

inline void finish(CertificateReport& r, const Eigen::VectorXd& m, const Eigen::VectorXd& d, double omega_s) {
    const auto n = r.f.size();
    r.bound.resize(n);
    r.s.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        r.bound(i) = node_bound(m(i), d(i), r.units, omega_s);
        r.s(i) = r.f(i) - r.bound(i);
    }
    r.worst_node = 0;
    for (Eigen::Index i = 1; i < n; ++i)
        if (r.s(i) > r.s(static_cast<Eigen::Index>(r.worst_node))) r.worst_node = static_cast<std::size_t>(i);
    r.certified = n == 0 || r.s.maxCoeff() <= 0.0;
}

}  // namespace detail

/// Per-node certificate S_i = F_i - D_i^2/(2 M_i). All S_i <= 0 certifies
/// asymptotic stability of an equilibrium in Omega (modulo the rotation mode).
inline CertificateReport certificate(const ReducedSystem& sys, const Equilibrium& eq,
                                     BoundUnits units = BoundUnits::theorem) {
    const Eigen::VectorXd& delta = eq.delta_star;
    equilibrium::check_dimension(sys, delta, "certificate");
    const auto n = static_cast<Eigen::Index>(sys.n);
    CertificateReport r;
    r.units = units;
    r.f = Eigen::VectorXd::Zero(n);
    r.q = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double f = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i || sys.y_mag(i, j) == 0.0) continue;
            f += sys.v_mag(i) * sys.v_mag(j) * sys.y_mag(i, j) * std::sin(sys.y_ang(i, j) - delta(i) + delta(j));
        }
        r.f(i) = f;
        r.q(i) = -(f + sys.v_mag(i) * sys.v_mag(i) * sys.y_mag(i, i) * std::sin(sys.y_ang(i, i)));
    }
    detail::finish(r, sys.m, sys.d, sys.omega_s);
    return r;
}

/// Re-evaluates S with new inertia and damping at an unchanged operating point.
inline CertificateReport retune_certificate(const Eigen::VectorXd& flow_sums, const Eigen::VectorXd& m_new,
                                            const Eigen::VectorXd& d_new, BoundUnits units = BoundUnits::theorem,
                                            double omega_s = kDefaultOmegaS) {
    if (m_new.size() != flow_sums.size() || d_new.size() != flow_sums.size())
        throw DimensionError("retune: parameter vectors must match the number of machines");
    for (Eigen::Index i = 0; i < flow_sums.size(); ++i) {
        if (!(m_new(i) > 0.0)) throw ModelError("retune: inertia of machine " + std::to_string(i + 1) + " must be positive");
        if (!(d_new(i) > 0.0)) throw ModelError("retune: damping of machine " + std::to_string(i + 1) + " must be positive");
    }
    if (units == BoundUnits::proof && !(omega_s > 0.0)) throw ModelError("retune: omega_s must be positive");
    CertificateReport r;
    r.units = units;
    r.f = flow_sums;
    detail::finish(r, m_new, d_new, omega_s);
    return r;
}

}  // namespace graphcert
}  // namespace swingcert
