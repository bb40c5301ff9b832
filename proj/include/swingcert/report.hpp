#pragma once

// End-to-end analysis pipeline (reduce, solve, certify, spectrum, optional
// simulation) and its JSON report.

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "swingcert/case_io.hpp"
#include "swingcert/equilibrium.hpp"
#include "swingcert/errors.hpp"
#include "swingcert/graphcert.hpp"
#include "swingcert/margin.hpp"
#include "swingcert/netmodel.hpp"
#include "swingcert/simulate.hpp"
#include "swingcert/spectral.hpp"

namespace swingcert {

inline constexpr int kReportSchema = 1;

/// Process exit codes of the certify/report commands.
enum class ExitCode : int { certified = 0, error = 1, stable_uncertified = 2, unstable = 3, inconclusive = 4 };

struct AnalysisOptions {
    BoundUnits units = BoundUnits::theorem;
    std::optional<std::size_t> reference;  // 0-based machine index
    bool pencil_check = false;
    bool simulate = false;
    ExperimentOptions experiment;
    bool timings = false;
};

struct AnalysisReport {
    std::string case_name;
    ReducedSystem system;
    Equilibrium equilibrium;
    InducedDigraph graph;
    OmegaCheck omega;
    bool strongly_connected = false;
    LaplacianProperties laplacian;
    CertificateReport certificate;
    /// In Omega with strongly connected support: the certificate's hypotheses hold.
    bool certificate_applicable = false;
    SpectrumReport spectrum;
    StabilityVerdict verdict = StabilityVerdict::inconclusive_zero_cluster;
    std::optional<ExperimentSummary> simulation;
    std::vector<std::string> warnings;
    std::vector<std::pair<std::string, double>> timings_ms;

    ExitCode exit_code() const {
        if (certificate.certified && certificate_applicable && verdict != StabilityVerdict::unstable)
            return ExitCode::certified;
        switch (verdict) {
            case StabilityVerdict::asymptotically_stable_reduced: return ExitCode::stable_uncertified;
            case StabilityVerdict::unstable: return ExitCode::unstable;
            case StabilityVerdict::inconclusive_zero_cluster: return ExitCode::inconclusive;
        }
        return ExitCode::inconclusive;
    }
};

namespace report {

/// Whether the certificate bound matches the omega_s scaling of J, so that a
/// certified-but-unstable outcome would be a genuine contradiction.
inline bool bound_consistent_with_jacobian(BoundUnits units, double omega_s) {
    return units == BoundUnits::proof || omega_s == 1.0;
}

/// Reduced system for a loaded case, solving the power flow when needed.
inline ReducedSystem reduce_case(const CaseData& c) {
    if (c.reduced) return *c.reduced;
    return netmodel::build_reduced_system(netmodel::ensure_solved(c));
}

inline AnalysisReport analyze(const CaseData& c, const AnalysisOptions& opts = {}) {
    using clock = std::chrono::steady_clock;
    AnalysisReport r;
    r.case_name = c.name;
    r.warnings = c.warnings;
    auto t0 = clock::now();
    auto lap = [&](const char* stage) {
        const auto now = clock::now();
        r.timings_ms.emplace_back(stage, std::chrono::duration<double, std::milli>(now - t0).count());
        t0 = now;
    };

    r.system = reduce_case(c);
    lap("reduce");
    EquilibriumOptions eq_opts;
    eq_opts.reference = opts.reference;
    r.equilibrium = equilibrium::solve_equilibrium(r.system, eq_opts);
    lap("equilibrium");

    const FlowJacobian l = equilibrium::flow_jacobian(r.system, r.equilibrium.delta_star);
    r.graph = graphcert::induced_digraph(r.system, r.equilibrium.delta_star);
    r.omega = graphcert::check_omega(r.graph, r.equilibrium.omega_star);
    r.strongly_connected = graphcert::strongly_connected(r.graph);
    r.certificate = graphcert::certificate(r.system, r.equilibrium, opts.units);
    r.certificate_applicable = r.omega.in_omega && r.strongly_connected;
    lap("certificate");
    r.laplacian = graphcert::laplacian_properties(l, r.omega.in_omega);
    lap("laplacian");
    r.spectrum = spectral::analyze_spectrum(r.system, l, opts.pencil_check);
    r.verdict = spectral::stability_verdict(r.spectrum);
    lap("spectrum");

    if (!r.omega.in_omega) r.warnings.push_back("equilibrium is outside Omega; the certificate does not apply");
    if (!r.strongly_connected) r.warnings.push_back("induced digraph is not strongly connected");
    if (r.certificate.certified && r.certificate_applicable && r.verdict == StabilityVerdict::unstable) {
        if (bound_consistent_with_jacobian(opts.units, r.system.omega_s))
            throw Error("internal consistency failure: certified equilibrium has an unstable spectrum");
        r.warnings.push_back("certified with the theorem bound, but the spectrum is unstable; the theorem bound omits omega_s (try --bound-units proof)");
    }

    if (opts.simulate) {
        r.simulation = simulate::perturbation_experiment(r.system, r.equilibrium, opts.experiment);
        lap("simulation");
    }
    if (!opts.timings) r.timings_ms.clear();
    return r;
}

namespace detail {

inline nlohmann::ordered_json complex_json(const Complex& z) { return nlohmann::ordered_json::array({z.real(), z.imag()}); }

inline nlohmann::ordered_json vec(const Eigen::VectorXd& v) { return case_io::detail::vector_json(v); }

}  // namespace detail

inline nlohmann::ordered_json certificate_json(const CertificateReport& c) {
    nlohmann::ordered_json j;
    j["bound_units"] = to_string(c.units);
    j["certified"] = c.certified;
    j["worst_machine"] = c.worst_node + 1;
    j["min_s"] = c.min_s();
    j["max_s"] = c.max_s();
    j["s"] = detail::vec(c.s);
    j["flow_sum"] = detail::vec(c.f);
    j["bound"] = detail::vec(c.bound);
    if (c.q.size() > 0) j["q"] = detail::vec(c.q);
    return j;
}

inline nlohmann::ordered_json experiment_json(const ExperimentSummary& s) {
    nlohmann::ordered_json j;
    j["n_samples"] = s.n_samples;
    j["radius"] = s.radius;
    j["seed"] = s.seed;
    j["converged"] = s.converged;
    j["diverged"] = s.diverged;
    j["undecided"] = s.undecided;
    j["fraction_converged"] = s.fraction_converged;
    j["worst_sample"] = s.worst_sample;
    j["worst_final_distance"] = s.worst_final_distance;
    return j;
}

inline nlohmann::ordered_json to_json(const AnalysisReport& r) {
    using nlohmann::ordered_json;
    ordered_json j;
    j["schema"] = kReportSchema;

    ordered_json meta;
    meta["name"] = r.case_name;
    meta["machines"] = r.system.n;
    meta["omega_s"] = r.system.omega_s;
    if (!r.system.machine_bus.empty()) meta["machine_bus"] = r.system.machine_bus;
    j["case"] = meta;

    ordered_json table;
    table["dom_phi_over_pi"] = ordered_json::array({r.omega.phi_min / std::numbers::pi, r.omega.phi_max / std::numbers::pi});
    table["dom_s"] = ordered_json::array({r.certificate.min_s(), r.certificate.max_s()});
    table["abs_re_lambda2"] = std::abs(r.spectrum.lambda2.real());
    j["table"] = table;

    ordered_json eq;
    eq["delta_star"] = detail::vec(r.equilibrium.wrapped_delta());
    eq["residual_inf"] = r.equilibrium.residual_inf;
    eq["reference_machine"] = r.equilibrium.reference_index + 1;
    eq["slack_adjustment"] = r.equilibrium.slack_adjustment;
    eq["iterations"] = r.equilibrium.iterations;
    j["equilibrium"] = eq;

    ordered_json om;
    om["in_omega"] = r.omega.in_omega;
    om["omega_zero"] = r.omega.omega_zero;
    om["phi_min"] = r.omega.phi_min;
    om["phi_max"] = r.omega.phi_max;
    om["violating_pairs"] = ordered_json::array();
    for (const auto& v : r.omega.violating_pairs)
        om["violating_pairs"].push_back(ordered_json::array({v.from + 1, v.to + 1, v.phi}));
    j["omega_check"] = om;
    j["strongly_connected"] = r.strongly_connected;

    ordered_json cert = certificate_json(r.certificate);
    cert["applicable"] = r.certificate_applicable;
    j["certificate"] = cert;

    ordered_json lp;
    lp["applicable"] = r.laplacian.applicable;
    lp["row_sum_inf"] = r.laplacian.row_sum_inf;
    lp["sign_pattern_ok"] = r.laplacian.sign_pattern_ok;
    lp["gershgorin_ok"] = r.laplacian.gershgorin_ok;
    lp["minors_checked"] = r.laplacian.minors_checked;
    lp["min_principal_minor"] = r.laplacian.min_principal_minor;
    lp["min_eigen_re"] = r.laplacian.min_eigen_re;
    lp["zero_eigen_count"] = r.laplacian.zero_eigen_count;
    lp["violations"] = r.laplacian.sign_violations.size() + r.laplacian.eigen_violations.size() +
                       (r.laplacian.gershgorin_ok ? 0 : 1) + (r.laplacian.minors_ok ? 0 : 1);
    j["laplacian"] = lp;

    ordered_json sp;
    sp["eigenvalues"] = ordered_json::array();
    for (const auto& z : r.spectrum.eigenvalues) sp["eigenvalues"].push_back(detail::complex_json(z));
    sp["zero_cluster_size"] = r.spectrum.zero_cluster.size();
    sp["lambda2"] = detail::complex_json(r.spectrum.lambda2);
    sp["max_re_nonzero"] = r.spectrum.max_re_nonzero;
    sp["zero_tol"] = r.spectrum.zero_tol;
    sp["re_tol"] = r.spectrum.re_tol;
    if (!r.spectrum.pencil_residuals.empty()) sp["pencil_residuals"] = r.spectrum.pencil_residuals;
    j["spectrum"] = sp;
    j["verdict"] = to_string(r.verdict);
    j["exit_code"] = static_cast<int>(r.exit_code());

    if (r.simulation) j["simulation"] = experiment_json(*r.simulation);
    j["warnings"] = r.warnings;
    if (!r.timings_ms.empty()) {
        ordered_json t;
        for (const auto& [stage, ms] : r.timings_ms) t[stage] = ms;
        j["timings_ms"] = t;
    }
    return j;
}

inline nlohmann::ordered_json error_json(const std::string& type, const std::string& message) {
    nlohmann::ordered_json j;
    j["schema"] = kReportSchema;
    j["error"] = {{"type", type}, {"message", message}};
    return j;
}

}  // namespace report
}  // namespace swingcert
