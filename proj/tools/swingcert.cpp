// swingcert command-line front end.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "swingcert/swingcert.hpp"

namespace {

using namespace swingcert;
using nlohmann::ordered_json;

struct CaseArgs {
    std::string path;
    std::string dynamics;
    std::string units = "theorem";
    std::size_t reference = 0;  // 1-based, 0 = default
    std::string out;

    CaseData load() const { return case_io::load_case(path, dynamics); }

    BoundUnits bound_units() const { return units == "proof" ? BoundUnits::proof : BoundUnits::theorem; }

    std::optional<std::size_t> reference_index() const {
        if (reference == 0) return std::nullopt;
        return reference - 1;
    }
};

void add_case_options(CLI::App* cmd, CaseArgs& a, bool with_units = true) {
    cmd->add_option("case", a.path, "Case file (.json native, .m MATPOWER subset)")->required();
    cmd->add_option("--dynamics", a.dynamics, "Dynamics sidecar JSON for MATPOWER input");
    cmd->add_option("--reference", a.reference, "Reference machine (1-based); default: largest inertia")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--out", a.out, "Write output to this file instead of stdout");
    if (with_units)
        cmd->add_option("--bound-units", a.units, "Certificate bound: theorem = D^2/(2M), proof = D^2/(2M omega_s)")
            ->check(CLI::IsMember({"theorem", "proof"}));
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        std::cout.flush();
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << text;
}

/// Shortest round-trip text of a double, with -0 printed as 0.
std::string num(double x) {
    if (x == 0.0) return "0";
    return nlohmann::json(x).dump();
}

std::string csv_row(std::initializer_list<double> xs) {
    std::string s;
    for (double x : xs) {
        if (!s.empty()) s += ',';
        s += num(x);
    }
    return s + "\n";
}

Equilibrium solve(const ReducedSystem& sys, const CaseArgs& a) {
    EquilibriumOptions opts;
    opts.reference = a.reference_index();
    return equilibrium::solve_equilibrium(sys, opts);
}

ReducedSystem checked_reduced(const CaseArgs& a) {
    ReducedSystem sys = report::reduce_case(a.load());
    sys.validate();
    if (a.reference > sys.n) throw DimensionError("--reference out of range: case has " + std::to_string(sys.n) + " machines");
    return sys;
}

ordered_json sweep_json(const std::vector<SweepPoint>& pts) {
    ordered_json arr = ordered_json::array();
    for (const auto& p : pts) {
        ordered_json e;
        e["param"] = p.param;
        e["converged"] = p.converged;
        if (p.converged) {
            e["min_s"] = p.min_s;
            e["max_s"] = p.max_s;
            e["certified"] = p.certified;
            e["re_lambda2"] = p.re_lambda2;
            e["verdict"] = to_string(p.verdict);
        } else {
            e["error"] = p.error;
        }
        arr.push_back(e);
    }
    return arr;
}

std::string certificate_csv(const AnalysisReport& r) {
    std::string s = "machine,flow_sum,bound,s,q\n";
    for (Eigen::Index i = 0; i < r.certificate.s.size(); ++i)
        s += std::to_string(i + 1) + "," +
             csv_row({r.certificate.f(i), r.certificate.bound(i), r.certificate.s(i), r.certificate.q(i)});
    return s;
}

std::vector<double> parse_list(const std::string& text, const char* what) {
    std::vector<double> out;
    std::istringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        char* end = nullptr;
        const double v = std::strtod(item.c_str(), &end);
        if (item.empty() || *end != '\0') throw ParseError(std::string(what) + ": bad number '" + item + "'");
        out.push_back(v);
    }
    return out;
}

Eigen::VectorXd to_vec(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

int run_error(const std::string& type, const std::string& message, const ordered_json& extra = {}) {
    ordered_json j = report::error_json(type, message);
    for (auto it = extra.begin(); it != extra.end(); ++it) j["error"][it.key()] = it.value();
    std::cout << j.dump(2) << "\n";
    std::cerr << "swingcert: " << message << "\n";
    return static_cast<int>(ExitCode::error);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Small-signal stability certificates for lossy multi-machine swing equations"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "swingcert 0.1.0");

    // certify / report
    CaseArgs cert_args;
    std::string format = "json";
    std::string sweep;
    bool with_sim = false, pencil = false, timings = false;
    ExperimentOptions exp;
    auto add_analysis = [&](CLI::App* cmd, bool simulate_flag) {
        add_case_options(cmd, cert_args);
        cmd->add_option("--format", format, "Output format")->check(CLI::IsMember({"json", "csv"}));
        cmd->add_option("--sweep", sweep, "Certificate margin sweep, e.g. damping:1,2,4 or loading:0.8:1.2:5");
        if (simulate_flag) cmd->add_flag("--simulate", with_sim, "Append a perturbation experiment");
        cmd->add_flag("--pencil-check", pencil, "Report pencil residuals per eigenvalue");
        cmd->add_flag("--timings", timings, "Include stage timings (non-deterministic)");
        cmd->add_option("--samples", exp.n_samples, "Perturbation samples")->check(CLI::PositiveNumber);
        cmd->add_option("--radius", exp.radius, "Perturbation norm, rad")->check(CLI::NonNegativeNumber);
        cmd->add_option("--seed", exp.seed, "Perturbation seed");
        cmd->add_option("--t-end", exp.t_end, "Simulation horizon, s")->check(CLI::PositiveNumber);
        cmd->add_option("--dt", exp.dt, "RK4 step, s")->check(CLI::PositiveNumber);
    };
    CLI::App* certify = app.add_subcommand("certify", "Certificate, Laplacian checks and spectrum (exit 0/2/3/4, 1 on error)");
    add_analysis(certify, true);
    CLI::App* report_cmd = app.add_subcommand("report", "Full report including the perturbation experiment");
    add_analysis(report_cmd, false);

    // spectrum
    CaseArgs spec_args;
    bool spec_pencil = false;
    CLI::App* spectrum = app.add_subcommand("spectrum", "Eigenvalues of J as CSV re,im");
    add_case_options(spectrum, spec_args, false);
    spectrum->add_flag("--pencil-check", spec_pencil, "Append the normalized pencil residual column");

    // retune
    CaseArgs rt_args;
    std::string m_new, d_new, flow_sums, m_old, d_old;
    double rt_omega_s = kDefaultOmegaS;
    CLI::App* retune = app.add_subcommand("retune", "Certificate under new inertia and damping at the same operating point");
    retune->add_option("case", rt_args.path, "Case file; omit when --flow-sums is given");
    retune->add_option("--dynamics", rt_args.dynamics, "Dynamics sidecar JSON for MATPOWER input");
    retune->add_option("--reference", rt_args.reference, "Reference machine (1-based)")->check(CLI::PositiveNumber);
    retune->add_option("--bound-units", rt_args.units, "theorem or proof")->check(CLI::IsMember({"theorem", "proof"}));
    retune->add_option("--out", rt_args.out, "Output file");
    retune->add_option("--m", m_new, "New inertia constants, comma separated")->required();
    retune->add_option("--d", d_new, "New damping coefficients, comma separated")->required();
    retune->add_option("--flow-sums", flow_sums, "Flow sums F_i instead of a case file");
    retune->add_option("--m-old", m_old, "Old inertia (with --flow-sums)");
    retune->add_option("--d-old", d_old, "Old damping (with --flow-sums)");
    retune->add_option("--omega-s", rt_omega_s, "Synchronous speed for proof units (with --flow-sums)");

    // reduce / normalize
    CaseArgs red_args;
    CLI::App* reduce = app.add_subcommand("reduce", "Emit the reduced system as a case document");
    add_case_options(reduce, red_args, false);
    CaseArgs norm_args;
    CLI::App* normalize = app.add_subcommand("normalize", "Emit the canonical native JSON form of a case");
    add_case_options(normalize, norm_args, false);

    // simulate
    CaseArgs sim_args;
    IntegrateOptions io;
    double sim_radius = 0.01;
    std::uint64_t sim_seed = ExperimentOptions{}.seed;
    std::size_t sim_sample = 0;
    CLI::App* simulate_cmd = app.add_subcommand("simulate", "Trajectory CSV from a perturbed equilibrium");
    add_case_options(simulate_cmd, sim_args, false);
    simulate_cmd->add_option("--t-end", io.t_end, "Horizon, s")->check(CLI::PositiveNumber);
    simulate_cmd->add_option("--dt", io.dt, "RK4 step, s")->check(CLI::PositiveNumber);
    simulate_cmd->add_option("--stride", io.record_stride, "Record every k-th step");
    simulate_cmd->add_option("--radius", sim_radius, "Angle perturbation norm, rad")->check(CLI::NonNegativeNumber);
    simulate_cmd->add_option("--seed", sim_seed, "Perturbation seed");
    simulate_cmd->add_option("--sample", sim_sample, "Sample index within the seeded sequence");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return run_error("usage_error", e.what());
    }

    try {
        if (certify->parsed() || report_cmd->parsed()) {
            const bool full = report_cmd->parsed();
            AnalysisOptions opts;
            opts.units = cert_args.bound_units();
            opts.reference = cert_args.reference_index();
            opts.pencil_check = pencil;
            opts.simulate = full || with_sim;
            opts.experiment = exp;
            opts.timings = timings;
            const CaseData c = cert_args.load();
            const AnalysisReport r = report::analyze(c, opts);
            std::vector<SweepPoint> points;
            if (!sweep.empty())
                points = graphcert::certificate_margin_search(r.system, r.equilibrium, SweepSpec::parse(sweep), opts.units);

            std::string text;
            if (format == "csv") {
                if (!sweep.empty()) {
                    std::ostringstream os;
                    graphcert::write_sweep_csv(os, points);
                    text = os.str();
                } else {
                    text = certificate_csv(r);
                }
            } else {
                ordered_json j = report::to_json(r);
                if (!sweep.empty()) j["sweep"] = sweep_json(points);
                text = j.dump(2) + "\n";
            }
            write_output(cert_args.out, text);
            return static_cast<int>(r.exit_code());
        }

        if (spectrum->parsed()) {
            const ReducedSystem sys = checked_reduced(spec_args);
            const Equilibrium eq = solve(sys, spec_args);
            const FlowJacobian l = equilibrium::flow_jacobian(sys, eq.delta_star);
            const SpectrumReport sp = spectral::analyze_spectrum(sys, l, spec_pencil);
            std::string text = spec_pencil ? "re,im,pencil_residual\n" : "re,im\n";
            // parts below the eigensolver's rounding floor print as 0
            const double floor = std::numeric_limits<double>::epsilon() * sp.j_norm_fro;
            auto snap = [floor](double x) { return std::abs(x) <= floor ? 0.0 : x; };
            for (std::size_t k = 0; k < sp.eigenvalues.size(); ++k) {
                const Complex z{snap(sp.eigenvalues[k].real()), snap(sp.eigenvalues[k].imag())};
                text += spec_pencil ? csv_row({z.real(), z.imag(), sp.pencil_residuals[k]}) : csv_row({z.real(), z.imag()});
            }
            write_output(spec_args.out, text);
            return 0;
        }

        if (retune->parsed()) {
            const BoundUnits units = rt_args.bound_units();
            const Eigen::VectorXd m = to_vec(parse_list(m_new, "--m"));
            const Eigen::VectorXd d = to_vec(parse_list(d_new, "--d"));
            ordered_json j;
            j["schema"] = kReportSchema;
            CertificateReport before, after;
            std::optional<StabilityVerdict> verdict;
            if (!flow_sums.empty()) {
                if (!rt_args.path.empty()) throw Error("retune: give either a case file or --flow-sums, not both");
                const Eigen::VectorXd f = to_vec(parse_list(flow_sums, "--flow-sums"));
                after = graphcert::retune_certificate(f, m, d, units, rt_omega_s);
                if (!m_old.empty() || !d_old.empty())
                    before = graphcert::retune_certificate(f, to_vec(parse_list(m_old, "--m-old")),
                                                           to_vec(parse_list(d_old, "--d-old")), units, rt_omega_s);
            } else {
                if (rt_args.path.empty()) throw Error("retune: a case file or --flow-sums is required");
                ReducedSystem sys = checked_reduced(rt_args);
                const Equilibrium eq = solve(sys, rt_args);
                before = graphcert::certificate(sys, eq, units);
                after = graphcert::retune_certificate(before.f, m, d, units, sys.omega_s);
                sys.m = m;
                sys.d = d;
                verdict = spectral::stability_verdict(
                    spectral::analyze_spectrum(spectral::build_jacobian(sys, equilibrium::flow_jacobian(sys, eq.delta_star))));
            }
            if (before.s.size() > 0) j["old"] = report::certificate_json(before);
            j["new"] = report::certificate_json(after);
            ordered_json rows = ordered_json::array();
            for (Eigen::Index i = 0; i < after.s.size(); ++i) {
                ordered_json row;
                row["machine"] = i + 1;
                if (before.s.size() > 0) row["s_old"] = before.s(i);
                row["s_new"] = after.s(i);
                rows.push_back(row);
            }
            j["side_by_side"] = rows;
            j["verdict"] = verdict ? ordered_json(to_string(*verdict)) : ordered_json(nullptr);
            write_output(rt_args.out, j.dump(2) + "\n");
            return 0;
        }

        if (reduce->parsed()) {
            const CaseData c = red_args.load();
            CaseData out;
            out.name = c.name;
            out.base_mva = c.base_mva;
            out.omega_s = c.omega_s;
            out.reduced = report::reduce_case(c);
            out.reduced->validate();
            ordered_json j = case_io::to_json(out);
            j.erase("buses");
            j.erase("branches");
            j.erase("generators");
            write_output(red_args.out, j.dump(2) + "\n");
            return 0;
        }

        if (normalize->parsed()) {
            write_output(norm_args.out, case_io::emit(norm_args.load()));
            return 0;
        }

        if (simulate_cmd->parsed()) {
            const ReducedSystem sys = checked_reduced(sim_args);
            const Equilibrium eq = solve(sys, sim_args);
            const ReducedSystem balanced = simulate::balanced_system(sys, eq);
            const State eq_state{eq.delta_star, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sys.n))};
            io.equilibrium = eq_state;
            const State x0{eq.delta_star + simulate::sample_perturbation(sys.n, sim_radius, sim_seed, sim_sample),
                           eq_state.omega};
            const Trajectory traj = simulate::integrate(balanced, x0, io);
            std::ostringstream os;
            simulate::write_trajectory_csv(os, traj, sys.n);
            write_output(sim_args.out, os.str());
            std::cerr << "classification: " << to_string(traj.classification) << "\n";
            return 0;
        }
    } catch (const ParseError& e) {
        ordered_json extra;
        if (e.line() > 0) {
            extra["line"] = e.line();
            extra["column"] = e.column();
        }
        return run_error("parse_error", e.what(), extra);
    } catch (const ConvergenceError& e) {
        return run_error("convergence_error", e.what(), {{"trace", e.trace()}});
    } catch (const SingularMatrixError& e) {
        return run_error("singular_matrix", e.what(), {{"rcond", e.rcond()}});
    } catch (const DimensionError& e) {
        return run_error("dimension_error", e.what());
    } catch (const ModelError& e) {
        return run_error("model_error", e.what());
    } catch (const Error& e) {
        return run_error("error", e.what());
    } catch (const std::exception& e) {
        return run_error("internal_error", e.what());
    }
    return static_cast<int>(ExitCode::error);
}
