#pragma once

// Time-domain integration of the swing equations (fixed-step RK4) and a
// seeded perturbation experiment around an equilibrium.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "swingcert/equilibrium.hpp"
#include "swingcert/errors.hpp"
#include "swingcert/netmodel.hpp"
#include "swingcert/parallel.hpp"

namespace swingcert {

struct State {
    Eigen::VectorXd delta;  // rad
    Eigen::VectorXd omega;  // elec. rad/s deviation
};

enum class TrajectoryClass { converged, diverged, undecided };

inline const char* to_string(TrajectoryClass c) {
    switch (c) {
        case TrajectoryClass::converged: return "converged";
        case TrajectoryClass::diverged: return "diverged";
        case TrajectoryClass::undecided: return "undecided";
    }
    return "undecided";
}

struct Trajectory {
    std::vector<double> times;
    std::vector<State> states;
    TrajectoryClass classification = TrajectoryClass::undecided;
    /// Distance to the supplied equilibrium at the last step (NaN without one).
    double final_distance = std::numeric_limits<double>::quiet_NaN();
    double halt_time = 0.0;
};

struct IntegrateOptions {
    double t_end = 20.0;
    double dt = 1e-3;
    /// Equilibrium used for the converged test.
    std::optional<State> equilibrium;
    double divergence_factor = 1e3;
    double angle_limit = 1e3;
    /// Store every k-th state; 0 keeps only the first and last.
    std::size_t record_stride = 1;
};

struct ExperimentOptions {
    std::size_t n_samples = 32;
    double radius = 0.01;
    std::uint64_t seed = 20240501;
    double t_end = 20.0;
    double dt = 1e-3;
};

struct ExperimentSummary {
    std::size_t n_samples = 0;
    double radius = 0.0;
    std::uint64_t seed = 0;
    std::size_t converged = 0;
    std::size_t diverged = 0;
    std::size_t undecided = 0;
    double fraction_converged = 0.0;
    std::size_t worst_sample = 0;
    double worst_final_distance = 0.0;
    std::vector<TrajectoryClass> classifications;
    std::vector<double> final_distances;
};

namespace simulate {

/// delta' = omega;  omega'_i = (omega_s / M_i)(P_m_i - P_e_i(delta)) - (D_i / M_i) omega_i.
inline State swing_rhs(const ReducedSystem& sys, const State& x) {
    const auto n = static_cast<Eigen::Index>(sys.n);
    if (x.delta.size() != n || x.omega.size() != n) throw DimensionError("swing_rhs: state dimension must be 2n");
    const Eigen::VectorXd pe = equilibrium::flow_function(sys, x.delta);
    State dx{x.omega, Eigen::VectorXd(n)};
    for (Eigen::Index i = 0; i < n; ++i)
        dx.omega(i) = sys.omega_s / sys.m(i) * (sys.p_mech(i) - pe(i)) - sys.d(i) / sys.m(i) * x.omega(i);
    return dx;
}

inline double state_norm(const State& x) { return std::sqrt(x.delta.squaredNorm() + x.omega.squaredNorm()); }

/// Distance to `eq` modulo the rotation mode: the common angle offset is
/// removed from delta - delta* before taking the 2-norm.
inline double distance_to(const State& x, const State& eq) {
    Eigen::VectorXd dd = x.delta - eq.delta;
    if (dd.size() > 0) dd.array() -= dd.mean();
    return std::sqrt(dd.squaredNorm() + (x.omega - eq.omega).squaredNorm());
}

inline State rk4_step(const ReducedSystem& sys, const State& x, double h) {
    const State k1 = swing_rhs(sys, x);
    const State k2 = swing_rhs(sys, {x.delta + 0.5 * h * k1.delta, x.omega + 0.5 * h * k1.omega});
    const State k3 = swing_rhs(sys, {x.delta + 0.5 * h * k2.delta, x.omega + 0.5 * h * k2.omega});
    const State k4 = swing_rhs(sys, {x.delta + h * k3.delta, x.omega + h * k3.omega});
    return {x.delta + h / 6.0 * (k1.delta + 2.0 * k2.delta + 2.0 * k3.delta + k4.delta),
            x.omega + h / 6.0 * (k1.omega + 2.0 * k2.omega + 2.0 * k3.omega + k4.omega)};
}

/// Classic fixed-step RK4 from t = 0 to t_end. Halts early on divergence
/// (state norm beyond divergence_factor * max(|x0|, 1), |angle| beyond
/// angle_limit, or a non-finite state).
inline Trajectory integrate(const ReducedSystem& sys, const State& x0, const IntegrateOptions& opts = {}) {
    if (!(opts.dt > 0.0)) throw ModelError("integrate: dt must be positive");
    if (!(opts.t_end >= opts.dt)) throw ModelError("integrate: t_end must be at least dt");
    const auto steps = static_cast<std::size_t>(std::llround(opts.t_end / opts.dt));
    const double limit = opts.divergence_factor * std::max(state_norm(x0), 1.0);

    Trajectory traj;
    traj.times.push_back(0.0);
    traj.states.push_back(x0);
    State x = x0;
    double t = 0.0;
    bool diverged = false;
    for (std::size_t k = 1; k <= steps; ++k) {
        x = rk4_step(sys, x, opts.dt);
        t = static_cast<double>(k) * opts.dt;
        const bool finite = x.delta.allFinite() && x.omega.allFinite();
        diverged = !finite || state_norm(x) > limit ||
                   (x.delta.size() > 0 && x.delta.cwiseAbs().maxCoeff() > opts.angle_limit);
        const bool last = diverged || k == steps;
        if (last || (opts.record_stride > 0 && k % opts.record_stride == 0)) {
            traj.times.push_back(t);
            traj.states.push_back(x);
        }
        if (diverged) break;
    }
    traj.halt_time = t;
    if (opts.equilibrium) {
        const double d0 = distance_to(x0, *opts.equilibrium);
        traj.final_distance = diverged ? std::numeric_limits<double>::infinity() : distance_to(x, *opts.equilibrium);
        if (diverged) traj.classification = TrajectoryClass::diverged;
        // absolute floor so a start exactly at the equilibrium counts as converged
        else if (traj.final_distance <= std::max(0.1 * d0, 1e-12)) traj.classification = TrajectoryClass::converged;
        else traj.classification = TrajectoryClass::undecided;
    } else {
        traj.classification = diverged ? TrajectoryClass::diverged : TrajectoryClass::undecided;
    }
    return traj;
}

/// Angle-only perturbation of the given norm, orthogonal to the all-ones
/// direction, drawn from a generator seeded per sample.
inline Eigen::VectorXd sample_perturbation(std::size_t n, double radius, std::uint64_t seed, std::size_t sample) {
    std::mt19937_64 rng(seed ^ (0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(sample) + 1)));
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = normal(rng);
    if (v.size() > 0) v.array() -= v.mean();
    const double norm = v.norm();
    if (radius == 0.0 || norm == 0.0) return Eigen::VectorXd::Zero(v.size());
    return v * (radius / norm);
}

/// Copy of `sys` whose reference machine absorbs the lossy slack mismatch,
/// so that `eq` is an exact rest point of the dynamics.
inline ReducedSystem balanced_system(const ReducedSystem& sys, const Equilibrium& eq) {
    ReducedSystem out = sys;
    if (sys.n > 0) out.p_mech(static_cast<Eigen::Index>(eq.reference_index)) -= eq.slack_adjustment;
    return out;
}

/// Integrates n_samples perturbed starts around `eq` (sample k uses its own
/// seed, so results do not depend on the thread schedule).
inline ExperimentSummary perturbation_experiment(const ReducedSystem& sys_in, const Equilibrium& eq,
                                                 const ExperimentOptions& opts = {}) {
    const ReducedSystem sys = balanced_system(sys_in, eq);
    if (!(opts.radius >= 0.0)) throw ModelError("perturbation_experiment: radius must be non-negative");
    ExperimentSummary out;
    out.n_samples = opts.n_samples;
    out.radius = opts.radius;
    out.seed = opts.seed;
    out.classifications.assign(opts.n_samples, TrajectoryClass::undecided);
    out.final_distances.assign(opts.n_samples, 0.0);

    const State eq_state{eq.delta_star, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sys.n))};
    IntegrateOptions io;
    io.t_end = opts.t_end;
    io.dt = opts.dt;
    io.equilibrium = eq_state;
    io.record_stride = 0;

    parallel_for(opts.n_samples, [&](std::size_t k) {
        const State x0{eq.delta_star + sample_perturbation(sys.n, opts.radius, opts.seed, k), eq_state.omega};
        const Trajectory traj = integrate(sys, x0, io);
        out.classifications[k] = traj.classification;
        out.final_distances[k] = traj.final_distance;
    });

    for (std::size_t k = 0; k < opts.n_samples; ++k) {
        switch (out.classifications[k]) {
            case TrajectoryClass::converged: ++out.converged; break;
            case TrajectoryClass::diverged: ++out.diverged; break;
            case TrajectoryClass::undecided: ++out.undecided; break;
        }
        if (k == 0 || out.final_distances[k] > out.worst_final_distance) {
            out.worst_sample = k;
            out.worst_final_distance = out.final_distances[k];
        }
    }
    out.fraction_converged = opts.n_samples ? static_cast<double>(out.converged) / static_cast<double>(opts.n_samples) : 1.0;
    return out;
}

/// Trajectory CSV with header t,delta_1..delta_n,omega_1..omega_n.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj, std::size_t n) {
    os << "t";
    for (std::size_t i = 1; i <= n; ++i) os << ",delta_" << i;
    for (std::size_t i = 1; i <= n; ++i) os << ",omega_" << i;
    os << "\n";
    const auto old_precision = os.precision(17);
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        os << traj.times[k];
        for (Eigen::Index i = 0; i < traj.states[k].delta.size(); ++i) os << "," << traj.states[k].delta(i);
        for (Eigen::Index i = 0; i < traj.states[k].omega.size(); ++i) os << "," << traj.states[k].omega(i);
        os << "\n";
    }
    os.precision(old_precision);
}

}  // namespace simulate
}  // namespace swingcert
