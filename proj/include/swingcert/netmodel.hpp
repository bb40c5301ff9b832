#pragma once

// Network data model: bus/branch/generator records, bus admittance matrix,
// Kron reduction and the classical-model reduction to generator internal
// nodes.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "swingcert/errors.hpp"
#include "swingcert/linalg.hpp"

namespace swingcert {

enum class BusType { slack, pv, pq };

inline const char* to_string(BusType t) {
    switch (t) {
        case BusType::slack: return "slack";
        case BusType::pv: return "pv";
        case BusType::pq: return "pq";
    }
    return "pq";
}

struct BusRecord {
    int id = 0;
    BusType type = BusType::pq;
    double p_load = 0.0;  // p.u.
    double q_load = 0.0;  // p.u.
    double v_mag = 1.0;   // p.u.
    double v_ang = 0.0;   // rad
    double base_kv = 0.0;
    double g_shunt = 0.0;  // p.u. at 1 p.u. voltage
    double b_shunt = 0.0;
};

struct BranchRecord {
    int from_bus = 0;
    int to_bus = 0;
    double r = 0.0;
    double x = 0.0;
    double b_shunt = 0.0;  // total line charging
    double tap = 1.0;      // off-nominal ratio at the from side
    bool status = true;
};

struct GeneratorDynamics {
    int bus = 0;
    double inertia_m = 0.0;  // s
    double damping_d = 0.0;
    double xd_prime = 0.0;  // p.u.
    double p_mech = 0.0;    // p.u.
};

inline constexpr double kDefaultOmegaS = 2.0 * std::numbers::pi * 60.0;

/// Classical n-machine model on generator internal nodes.
struct ReducedSystem {
    std::size_t n = 0;
    Eigen::VectorXd v_mag;  // internal EMF magnitudes
    Eigen::MatrixXd y_mag;  // |Y_ij| of the reduced admittance matrix
    Eigen::MatrixXd y_ang;  // arg Y_ij
    Eigen::VectorXd m;      // inertia constants, s
    Eigen::VectorXd d;      // damping coefficients
    Eigen::VectorXd p_mech;
    double omega_s = kDefaultOmegaS;
    /// Internal angles from the reduction, or empty.
    Eigen::VectorXd delta0;
    /// Bus label of each machine, or empty for direct reduced inputs.
    std::vector<int> machine_bus;

    /// Builds magnitude/angle matrices from a complex admittance matrix.
    void set_admittance(const Eigen::MatrixXcd& y) {
        y_mag = y.cwiseAbs();
        y_ang = y.unaryExpr([](const Complex& z) { return std::arg(z); }).real();
    }

    Eigen::MatrixXcd admittance() const {
        Eigen::MatrixXcd y(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) y(i, j) = std::polar(y_mag(i, j), y_ang(i, j));
        return y;
    }

    /// Throws ModelError when dimensions or parameter signs are invalid.
    void validate() const {
        const auto nn = static_cast<Eigen::Index>(n);
        if (v_mag.size() != nn || m.size() != nn || d.size() != nn || p_mech.size() != nn)
            throw ModelError("reduced system: vector length does not match n");
        if (y_mag.rows() != nn || y_mag.cols() != nn || y_ang.rows() != nn || y_ang.cols() != nn)
            throw ModelError("reduced system: admittance matrices must be n x n");
        if (delta0.size() != 0 && delta0.size() != nn)
            throw ModelError("reduced system: delta0 length does not match n");
        if (!(omega_s > 0.0)) throw ModelError("reduced system: omega_s must be positive");
        if ((y_mag.array() < 0.0).any()) throw ModelError("reduced system: negative admittance magnitude");
        for (Eigen::Index i = 0; i < nn; ++i) {
            if (!(m(i) > 0.0)) throw ModelError("reduced system: inertia of machine " + std::to_string(i + 1) + " must be positive");
            if (!(d(i) > 0.0)) throw ModelError("reduced system: damping of machine " + std::to_string(i + 1) + " must be positive");
        }
        if (!v_mag.allFinite() || !y_mag.allFinite() || !y_ang.allFinite() || !p_mech.allFinite())
            throw ModelError("reduced system: non-finite entries");
    }
};

/// Everything read from a case file.
struct CaseData {
    std::string name;
    double base_mva = 100.0;
    double omega_s = kDefaultOmegaS;
    std::vector<BusRecord> buses;
    std::vector<BranchRecord> branches;
    std::vector<GeneratorDynamics> generators;
    /// False when generator M, D, x'_d have not been supplied (MATPOWER input
    /// without a dynamics sidecar).
    bool has_dynamics = false;
    /// Direct reduced model; when present the network sections may be empty.
    std::optional<ReducedSystem> reduced;
    std::vector<std::string> warnings;
};

namespace netmodel {

/// Maps bus labels to dense indices.
inline std::unordered_map<int, std::size_t> bus_index(const std::vector<BusRecord>& buses) {
    std::unordered_map<int, std::size_t> index;
    for (std::size_t k = 0; k < buses.size(); ++k) {
        if (!index.emplace(buses[k].id, k).second)
            throw ModelError("duplicate bus id " + std::to_string(buses[k].id));
    }
    return index;
}

/// Checks cross references and record invariants.
inline void validate_network(const CaseData& c) {
    const auto index = bus_index(c.buses);
    std::size_t slack_count = 0;
    for (const auto& b : c.buses) {
        if (b.type == BusType::slack) ++slack_count;
        if (!(b.v_mag > 0.0)) throw ModelError("bus " + std::to_string(b.id) + ": voltage magnitude must be positive");
    }
    if (!c.buses.empty() && slack_count != 1)
        throw ModelError("case must contain exactly one slack bus, found " + std::to_string(slack_count));
    for (const auto& br : c.branches) {
        if (!index.contains(br.from_bus) || !index.contains(br.to_bus))
            throw ModelError("branch " + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus) + " references an unknown bus");
        if (br.from_bus == br.to_bus) throw ModelError("branch endpoints must differ (bus " + std::to_string(br.from_bus) + ")");
        if (br.r < 0.0) throw ModelError("branch " + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus) + ": negative resistance");
        if (br.r == 0.0 && br.x == 0.0)
            throw ModelError("branch " + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus) + ": zero impedance");
        if (!(br.tap > 0.0)) throw ModelError("branch tap ratio must be positive");
    }
    std::unordered_map<int, int> gen_count;
    for (const auto& g : c.generators) {
        if (!index.contains(g.bus)) throw ModelError("generator references unknown bus " + std::to_string(g.bus));
        if (++gen_count[g.bus] > 1) throw ModelError("more than one generator on bus " + std::to_string(g.bus));
    }
}

/// Bus admittance matrix, buses in record order. Shunts from bus records are
/// included; loads are not.
inline Eigen::MatrixXcd assemble_ybus(const std::vector<BusRecord>& buses, const std::vector<BranchRecord>& branches) {
    const auto index = bus_index(buses);
    const auto nb = static_cast<Eigen::Index>(buses.size());
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(nb, nb);
    bool any_in_service = false;
    for (const auto& br : branches) {
        if (!br.status) continue;
        const auto f = index.find(br.from_bus);
        const auto t = index.find(br.to_bus);
        if (f == index.end() || t == index.end())
            throw ModelError("branch " + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus) + " references an unknown bus");
        if (br.r == 0.0 && br.x == 0.0)
            throw ModelError("branch " + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus) + ": zero impedance");
        any_in_service = true;
        const Complex ys = 1.0 / Complex(br.r, br.x);
        const Complex half_charging(0.0, br.b_shunt / 2.0);
        const double tap = br.tap;
        const auto i = static_cast<Eigen::Index>(f->second);
        const auto j = static_cast<Eigen::Index>(t->second);
        y(i, i) += (ys + half_charging) / (tap * tap);
        y(j, j) += ys + half_charging;
        y(i, j) -= ys / tap;
        y(j, i) -= ys / tap;
    }
    if (!any_in_service && !branches.empty()) throw ModelError("no branch in service");
    for (Eigen::Index k = 0; k < nb; ++k) y(k, k) += Complex(buses[k].g_shunt, buses[k].b_shunt);
    return y;
}

/// Schur complement Y_rr - Y_re Y_ee^-1 Y_er onto `retained` (in the given order).
inline Eigen::MatrixXcd kron_reduce(const Eigen::MatrixXcd& y_full, const std::vector<std::size_t>& retained) {
    if (y_full.rows() != y_full.cols()) throw DimensionError("kron_reduce: matrix is not square");
    const auto n = static_cast<std::size_t>(y_full.rows());
    std::vector<bool> keep(n, false);
    for (auto r : retained) {
        if (r >= n) throw DimensionError("kron_reduce: retained index out of range");
        if (keep[r]) throw DimensionError("kron_reduce: duplicate retained index");
        keep[r] = true;
    }
    std::vector<std::size_t> eliminated;
    for (std::size_t k = 0; k < n; ++k)
        if (!keep[k]) eliminated.push_back(k);

    const auto nr = static_cast<Eigen::Index>(retained.size());
    const auto ne = static_cast<Eigen::Index>(eliminated.size());
    Eigen::MatrixXcd yrr(nr, nr), yre(nr, ne), yer(ne, nr), yee(ne, ne);
    for (Eigen::Index a = 0; a < nr; ++a) {
        for (Eigen::Index b = 0; b < nr; ++b) yrr(a, b) = y_full(retained[a], retained[b]);
        for (Eigen::Index b = 0; b < ne; ++b) yre(a, b) = y_full(retained[a], eliminated[b]);
    }
    for (Eigen::Index a = 0; a < ne; ++a) {
        for (Eigen::Index b = 0; b < nr; ++b) yer(a, b) = y_full(eliminated[a], retained[b]);
        for (Eigen::Index b = 0; b < ne; ++b) yee(a, b) = y_full(eliminated[a], eliminated[b]);
    }
    if (ne == 0) return yrr;
    const Eigen::MatrixXcd x = linalg::checked_solve(yee, yer, "kron_reduce: eliminated block is singular");
    return yrr - yre * x;
}

/// Complex power injected at each bus by the network: S = V conj(Y V).
inline Eigen::VectorXcd injections(const Eigen::MatrixXcd& y, const Eigen::VectorXcd& v) {
    return v.cwiseProduct((y * v).conjugate());
}

struct PowerFlowOptions {
    double tolerance = 1e-10;
    int max_iterations = 30;
};

struct PowerFlowResult {
    Eigen::VectorXcd voltage;
    int iterations = 0;
    double mismatch = 0.0;
};

/// Scheduled net injections: generation p_mech at generator buses minus load.
inline Eigen::VectorXd scheduled_p(const CaseData& c, const std::unordered_map<int, std::size_t>& index) {
    Eigen::VectorXd p(c.buses.size());
    for (std::size_t k = 0; k < c.buses.size(); ++k) p(k) = -c.buses[k].p_load;
    for (const auto& g : c.generators) p(index.at(g.bus)) += g.p_mech;
    return p;
}

/// Largest active/reactive mismatch of the bus voltages stored in the case.
inline double power_flow_mismatch(const CaseData& c, const Eigen::MatrixXcd& ybus) {
    const auto index = bus_index(c.buses);
    Eigen::VectorXcd v(c.buses.size());
    for (std::size_t k = 0; k < c.buses.size(); ++k) v(k) = std::polar(c.buses[k].v_mag, c.buses[k].v_ang);
    const Eigen::VectorXcd s = injections(ybus, v);
    const Eigen::VectorXd p_sched = scheduled_p(c, index);
    double worst = 0.0;
    for (std::size_t k = 0; k < c.buses.size(); ++k) {
        const auto& b = c.buses[k];
        if (b.type == BusType::slack) continue;
        worst = std::max(worst, std::abs(s(k).real() - p_sched(k)));
        if (b.type == BusType::pq) worst = std::max(worst, std::abs(s(k).imag() + b.q_load));
    }
    return worst;
}

/// Polar Newton-Raphson AC power flow. Slack bus holds V and angle, PV buses
/// hold P and |V|, PQ buses hold P and Q. Reactive limits are not enforced.
inline PowerFlowResult solve_power_flow(const CaseData& c, const Eigen::MatrixXcd& ybus, const PowerFlowOptions& opts = {}) {
    const auto index = bus_index(c.buses);
    const std::size_t nb = c.buses.size();
    Eigen::VectorXd vm(nb), va(nb);
    for (std::size_t k = 0; k < nb; ++k) {
        vm(k) = c.buses[k].v_mag;
        va(k) = c.buses[k].v_ang;
    }
    const Eigen::VectorXd p_sched = scheduled_p(c, index);

    std::vector<std::size_t> ang_idx, mag_idx;
    for (std::size_t k = 0; k < nb; ++k) {
        if (c.buses[k].type != BusType::slack) ang_idx.push_back(k);
        if (c.buses[k].type == BusType::pq) mag_idx.push_back(k);
    }
    const auto na = static_cast<Eigen::Index>(ang_idx.size());
    const auto nm = static_cast<Eigen::Index>(mag_idx.size());

    auto mismatch = [&](const Eigen::VectorXcd& s) {
        Eigen::VectorXd f(na + nm);
        for (Eigen::Index a = 0; a < na; ++a) f(a) = s(ang_idx[a]).real() - p_sched(ang_idx[a]);
        for (Eigen::Index a = 0; a < nm; ++a) f(na + a) = s(mag_idx[a]).imag() + c.buses[mag_idx[a]].q_load;
        return f;
    };
    auto voltage = [&] {
        Eigen::VectorXcd v(nb);
        for (std::size_t k = 0; k < nb; ++k) v(k) = std::polar(vm(k), va(k));
        return v;
    };

    PowerFlowResult result;
    std::vector<double> trace;
    for (int it = 0;; ++it) {
        const Eigen::VectorXcd v = voltage();
        const Eigen::VectorXcd i_inj = ybus * v;
        const Eigen::VectorXcd s = v.cwiseProduct(i_inj.conjugate());
        const Eigen::VectorXd f = mismatch(s);
        const double norm = f.size() ? f.lpNorm<Eigen::Infinity>() : 0.0;
        trace.push_back(norm);
        if (norm <= opts.tolerance) {
            result.voltage = v;
            result.iterations = it;
            result.mismatch = norm;
            return result;
        }
        if (it >= opts.max_iterations) throw ConvergenceError("power flow did not converge", trace);

        // dS/dVa = j diag(V) conj(diag(I) - Y diag(V)),  dS/dVm = diag(V) conj(Y diag(V/|V|)) + conj(diag(I)) diag(V/|V|)
        const Eigen::VectorXcd vnorm = v.cwiseQuotient(vm.cast<Complex>());
        const Eigen::MatrixXcd yv = ybus * v.asDiagonal();
        Eigen::MatrixXcd ds_dva = -yv;
        ds_dva.diagonal() += i_inj;
        ds_dva = (Complex(0.0, 1.0) * v.asDiagonal() * ds_dva.conjugate()).eval();
        Eigen::MatrixXcd ds_dvm = v.asDiagonal() * (ybus * vnorm.asDiagonal()).conjugate();
        ds_dvm.diagonal() += i_inj.conjugate().cwiseProduct(vnorm);

        Eigen::MatrixXd jac(na + nm, na + nm);
        for (Eigen::Index r = 0; r < na; ++r) {
            for (Eigen::Index q = 0; q < na; ++q) jac(r, q) = ds_dva(ang_idx[r], ang_idx[q]).real();
            for (Eigen::Index q = 0; q < nm; ++q) jac(r, na + q) = ds_dvm(ang_idx[r], mag_idx[q]).real();
        }
        for (Eigen::Index r = 0; r < nm; ++r) {
            for (Eigen::Index q = 0; q < na; ++q) jac(na + r, q) = ds_dva(mag_idx[r], ang_idx[q]).imag();
            for (Eigen::Index q = 0; q < nm; ++q) jac(na + r, na + q) = ds_dvm(mag_idx[r], mag_idx[q]).imag();
        }
        const Eigen::VectorXd dx = linalg::checked_solve(jac, f, "power flow: singular Jacobian");
        for (Eigen::Index a = 0; a < na; ++a) va(ang_idx[a]) -= dx(a);
        for (Eigen::Index a = 0; a < nm; ++a) vm(mag_idx[a]) -= dx(na + a);
    }
}

/// Returns a copy of the case whose bus voltages satisfy the power-flow
/// equations. Cases that already do are returned unchanged.
inline CaseData ensure_solved(CaseData c, double tolerance = 1e-8) {
    const Eigen::MatrixXcd ybus = assemble_ybus(c.buses, c.branches);
    if (power_flow_mismatch(c, ybus) <= tolerance) return c;
    const PowerFlowResult pf = solve_power_flow(c, ybus);
    for (std::size_t k = 0; k < c.buses.size(); ++k) {
        c.buses[k].v_mag = std::abs(pf.voltage(k));
        c.buses[k].v_ang = std::arg(pf.voltage(k));
    }
    return c;
}

/// Classical-model reduction of a solved case.
///
/// Loads become constant admittances (p - jq)/|v|^2 at the solved voltage.
/// Each generator gets an internal node behind j x'_d carrying the EMF
/// E = V + j x'_d I; every other node is Kron-eliminated. The generator
/// injection is recovered from the network at the solved point, so the
/// returned system has an exact equilibrium at the internal EMF angles.
inline ReducedSystem build_reduced_system(const CaseData& c) {
    if (c.reduced) return *c.reduced;
    validate_network(c);
    if (!c.has_dynamics) throw ModelError("generator dynamics (M, D, x'_d) are required for reduction");
    if (c.generators.empty()) throw ModelError("case has no generators");
    const auto index = bus_index(c.buses);
    const std::size_t nb = c.buses.size();
    const std::size_t ng = c.generators.size();

    Eigen::MatrixXcd ybus = assemble_ybus(c.buses, c.branches);
    Eigen::VectorXcd v(nb);
    for (std::size_t k = 0; k < nb; ++k) {
        const auto& b = c.buses[k];
        v(k) = std::polar(b.v_mag, b.v_ang);
        ybus(k, k) += Complex(b.p_load, -b.q_load) / (b.v_mag * b.v_mag);
    }
    // with load admittances folded in, the remaining injection is generation
    const Eigen::VectorXcd s_gen = injections(ybus, v);

    Eigen::MatrixXcd y_aug = Eigen::MatrixXcd::Zero(nb + ng, nb + ng);
    y_aug.topLeftCorner(nb, nb) = ybus;
    ReducedSystem sys;
    sys.n = ng;
    sys.omega_s = c.omega_s;
    sys.v_mag.resize(ng);
    sys.m.resize(ng);
    sys.d.resize(ng);
    sys.p_mech.resize(ng);
    sys.delta0.resize(ng);
    std::vector<std::size_t> retained;
    for (std::size_t g = 0; g < ng; ++g) {
        const auto& gen = c.generators[g];
        if (!(gen.xd_prime > 0.0)) throw ModelError("generator at bus " + std::to_string(gen.bus) + ": x'_d must be positive");
        const std::size_t k = index.at(gen.bus);
        const std::size_t internal = nb + g;
        const Complex y_int = 1.0 / Complex(0.0, gen.xd_prime);
        y_aug(k, k) += y_int;
        y_aug(internal, internal) += y_int;
        y_aug(k, internal) -= y_int;
        y_aug(internal, k) -= y_int;
        retained.push_back(internal);

        const Complex i_term = std::conj(s_gen(k) / v(k));
        const Complex emf = v(k) + Complex(0.0, gen.xd_prime) * i_term;
        sys.v_mag(g) = std::abs(emf);
        sys.delta0(g) = std::arg(emf);
        sys.m(g) = gen.inertia_m;
        sys.d(g) = gen.damping_d;
        sys.p_mech(g) = s_gen(k).real();
        sys.machine_bus.push_back(gen.bus);
    }
    sys.set_admittance(kron_reduce(y_aug, retained));
    sys.validate();
    return sys;
}

}  // namespace netmodel
}  // namespace swingcert
