#pragma once

// Flow function P_e(delta), its Jacobian L, and a Newton solver for
// equilibrium points of the swing equations.

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "swingcert/errors.hpp"
#include "swingcert/linalg.hpp"
#include "swingcert/netmodel.hpp"

namespace swingcert {

struct FlowJacobian {
    Eigen::MatrixXd l;
    Eigen::VectorXd evaluated_at;
};

struct Equilibrium {
    Eigen::VectorXd delta_star;  // unwrapped, rad
    Eigen::VectorXd omega_star;  // identically zero
    double residual_inf = 0.0;   // max mismatch over non-reference machines
    std::size_t reference_index = 0;
    /// P_m - P_e at the reference machine; nonzero for lossy networks.
    double slack_adjustment = 0.0;
    int iterations = 0;
    std::vector<double> trace;

    /// Angles reduced modulo 2 pi into (-pi, pi].
    Eigen::VectorXd wrapped_delta() const {
        return delta_star.unaryExpr([](double a) {
            double w = std::remainder(a, 2.0 * std::numbers::pi);
            if (w <= -std::numbers::pi) w += 2.0 * std::numbers::pi;
            return w;
        });
    }
};

struct EquilibriumOptions {
    double tolerance = 1e-10;
    int max_iterations = 50;
    int max_halvings = 8;
    /// Reference (slack) machine; defaults to the largest inertia.
    std::optional<std::size_t> reference;
};

namespace equilibrium {

inline void check_dimension(const ReducedSystem& sys, const Eigen::VectorXd& delta, const char* op) {
    if (static_cast<std::size_t>(delta.size()) != sys.n)
        throw DimensionError(std::string(op) + ": angle vector has length " + std::to_string(delta.size()) +
                             ", expected " + std::to_string(sys.n));
}

/// P_e_i = sum_j V_i V_j Y_ij cos(theta_ij - delta_i + delta_j), including j = i.
inline Eigen::VectorXd flow_function(const ReducedSystem& sys, const Eigen::VectorXd& delta) {
    check_dimension(sys, delta, "flow_function");
    const auto n = static_cast<Eigen::Index>(sys.n);
    Eigen::VectorXd pe = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double acc = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (sys.y_mag(i, j) == 0.0) continue;
            acc += sys.v_mag(i) * sys.v_mag(j) * sys.y_mag(i, j) * std::cos(sys.y_ang(i, j) - delta(i) + delta(j));
        }
        pe(i) = acc;
    }
    return pe;
}

/// L_ij = -V_i V_j Y_ij sin(theta_ij - delta_i + delta_j) for j != i, and
/// L_ii = -sum_{j != i} L_ij, so rows sum to zero by construction.
inline FlowJacobian flow_jacobian(const ReducedSystem& sys, const Eigen::VectorXd& delta) {
    check_dimension(sys, delta, "flow_jacobian");
    const auto n = static_cast<Eigen::Index>(sys.n);
    FlowJacobian out{Eigen::MatrixXd::Zero(n, n), delta};
    for (Eigen::Index i = 0; i < n; ++i) {
        double diag = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i || sys.y_mag(i, j) == 0.0) continue;
            const double w = sys.v_mag(i) * sys.v_mag(j) * sys.y_mag(i, j) * std::sin(sys.y_ang(i, j) - delta(i) + delta(j));
            out.l(i, j) = -w;
            diag += w;
        }
        out.l(i, i) = diag;
    }
    return out;
}

inline std::size_t default_reference(const ReducedSystem& sys) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < sys.n; ++i)
        if (sys.m(static_cast<Eigen::Index>(i)) > sys.m(static_cast<Eigen::Index>(best))) best = i;
    return best;
}

/// L with the reference row and column removed.
inline Eigen::MatrixXd reduced_newton_matrix(const Eigen::MatrixXd& l, std::size_t ref) {
    const auto n = l.rows();
    const auto r = static_cast<Eigen::Index>(ref);
    Eigen::MatrixXd out(n - 1, n - 1);
    for (Eigen::Index i = 0, a = 0; i < n; ++i) {
        if (i == r) continue;
        for (Eigen::Index j = 0, b = 0; j < n; ++j) {
            if (j == r) continue;
            out(a, b++) = l(i, j);
        }
        ++a;
    }
    return out;
}

namespace detail {

inline double mismatch_norm(const Eigen::VectorXd& mismatch, std::size_t ref) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < mismatch.size(); ++i)
        if (static_cast<std::size_t>(i) != ref) worst = std::max(worst, std::abs(mismatch(i)));
    return worst;
}

}  // namespace detail

/// Newton iteration on the n-1 angles relative to the reference machine,
/// whose angle stays at its initial value. Lossy networks leave a power
/// mismatch at the reference; it is reported as `slack_adjustment`.
inline Equilibrium solve_equilibrium(const ReducedSystem& sys, const Eigen::VectorXd& delta_init,
                                     const EquilibriumOptions& opts = {}) {
    check_dimension(sys, delta_init, "solve_equilibrium");
    if (sys.n == 0) throw DimensionError("solve_equilibrium: empty system");
    const std::size_t ref = opts.reference.value_or(default_reference(sys));
    if (ref >= sys.n) throw DimensionError("solve_equilibrium: reference machine out of range");
    const auto n = static_cast<Eigen::Index>(sys.n);

    Equilibrium eq;
    eq.reference_index = ref;
    Eigen::VectorXd delta = delta_init;
    Eigen::VectorXd mismatch = sys.p_mech - flow_function(sys, delta);
    double norm = detail::mismatch_norm(mismatch, ref);
    eq.trace.push_back(norm);

    int it = 0;
    while (norm > opts.tolerance) {
        if (it >= opts.max_iterations)
            throw ConvergenceError("equilibrium solver did not converge in " + std::to_string(opts.max_iterations) + " iterations", eq.trace);
        const Eigen::MatrixXd jac = reduced_newton_matrix(flow_jacobian(sys, delta).l, ref);
        Eigen::VectorXd rhs(n - 1);
        for (Eigen::Index i = 0, a = 0; i < n; ++i)
            if (static_cast<std::size_t>(i) != ref) rhs(a++) = mismatch(i);
        // P_m - P_e(delta + step) ~ mismatch - L step
        const Eigen::VectorXd step = linalg::checked_solve(jac, rhs, "equilibrium solver: singular reduced Newton matrix");

        double scale = 1.0;
        Eigen::VectorXd trial;
        Eigen::VectorXd trial_mismatch;
        double trial_norm = 0.0;
        for (int h = 0; h <= opts.max_halvings; ++h) {
            trial = delta;
            for (Eigen::Index i = 0, a = 0; i < n; ++i)
                if (static_cast<std::size_t>(i) != ref) trial(i) += scale * step(a++);
            trial_mismatch = sys.p_mech - flow_function(sys, trial);
            trial_norm = detail::mismatch_norm(trial_mismatch, ref);
            if (trial_norm <= norm) break;
            scale *= 0.5;
        }
        delta = trial;
        mismatch = trial_mismatch;
        norm = trial_norm;
        eq.trace.push_back(norm);
        ++it;
        if (!std::isfinite(norm)) throw ConvergenceError("equilibrium solver diverged", eq.trace);
    }

    eq.delta_star = delta;
    eq.omega_star = Eigen::VectorXd::Zero(n);
    eq.residual_inf = norm;
    eq.slack_adjustment = mismatch(static_cast<Eigen::Index>(ref));
    eq.iterations = it;
    return eq;
}

/// Equilibrium starting from the reduction angles when available, zero otherwise.
inline Equilibrium solve_equilibrium(const ReducedSystem& sys, const EquilibriumOptions& opts = {}) {
    const Eigen::VectorXd init = sys.delta0.size() == static_cast<Eigen::Index>(sys.n)
                                     ? sys.delta0
                                     : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sys.n));
    return solve_equilibrium(sys, init, opts);
}

}  // namespace equilibrium
}  // namespace swingcert
