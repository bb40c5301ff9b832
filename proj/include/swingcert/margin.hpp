#pragma once

// Sweeps of inertia, damping or loading that pair the certificate's min_i S_i
// with the spectral margin Re(lambda_2).

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "swingcert/equilibrium.hpp"
#include "swingcert/errors.hpp"
#include "swingcert/graphcert.hpp"
#include "swingcert/spectral.hpp"

namespace swingcert {

enum class SweepKind { damping, inertia, loading };

inline const char* to_string(SweepKind k) {
    switch (k) {
        case SweepKind::damping: return "damping";
        case SweepKind::inertia: return "inertia";
        case SweepKind::loading: return "loading";
    }
    return "damping";
}

/// Scale factors applied to all D_i, all M_i, or all P_m_i.
struct SweepSpec {
    SweepKind kind = SweepKind::damping;
    std::vector<double> values;

    /// "damping:1,2,4", "inertia:0.5,1", "loading:0.9,1.0,1.1", or
    /// "<kind>:start:stop:count" for an evenly spaced range.
    static SweepSpec parse(const std::string& text) {
        const auto colon = text.find(':');
        if (colon == std::string::npos) throw ParseError("sweep: expected <kind>:<values>");
        SweepSpec spec;
        const std::string kind = text.substr(0, colon);
        if (kind == "damping") spec.kind = SweepKind::damping;
        else if (kind == "inertia") spec.kind = SweepKind::inertia;
        else if (kind == "loading") spec.kind = SweepKind::loading;
        else throw ParseError("sweep: unknown kind '" + kind + "'");

        std::string rest = text.substr(colon + 1);
        auto number = [&](const std::string& s) {
            char* end = nullptr;
            const double v = std::strtod(s.c_str(), &end);
            if (s.empty() || *end != '\0' || !std::isfinite(v)) throw ParseError("sweep: bad number '" + s + "'");
            return v;
        };
        if (std::count(rest.begin(), rest.end(), ':') == 2) {
            std::istringstream ss(rest);
            std::string a, b, c;
            std::getline(ss, a, ':');
            std::getline(ss, b, ':');
            std::getline(ss, c);
            const double start = number(a), stop = number(b);
            const int count = static_cast<int>(number(c));
            if (count < 1) throw ParseError("sweep: count must be positive");
            for (int k = 0; k < count; ++k)
                spec.values.push_back(count == 1 ? start : start + (stop - start) * k / (count - 1));
        } else {
            std::istringstream ss(rest);
            std::string item;
            while (std::getline(ss, item, ',')) spec.values.push_back(number(item));
        }
        if (spec.values.empty()) throw ParseError("sweep: no values");
        for (double v : spec.values)
            if (!(v > 0.0)) throw ParseError("sweep: scale factors must be positive");
        return spec;
    }
};

struct SweepPoint {
    double param = 0.0;
    bool converged = true;  // false: equilibrium failed at this point
    std::string error;
    double min_s = std::numeric_limits<double>::quiet_NaN();
    double max_s = std::numeric_limits<double>::quiet_NaN();
    bool certified = false;
    double re_lambda2 = std::numeric_limits<double>::quiet_NaN();
    double max_re_nonzero = std::numeric_limits<double>::quiet_NaN();
    StabilityVerdict verdict = StabilityVerdict::inconclusive_zero_cluster;
};

namespace graphcert {

/// Evaluates certificate and spectrum at each sweep point. Damping and inertia
/// scaling leave the equilibrium unchanged; loading re-solves it from `eq`.
/// Points where the equilibrium solve fails are kept with converged = false.
inline std::vector<SweepPoint> certificate_margin_search(const ReducedSystem& sys, const Equilibrium& eq,
                                                         const SweepSpec& spec,
                                                         BoundUnits units = BoundUnits::theorem) {
    std::vector<SweepPoint> out;
    out.reserve(spec.values.size());
    for (const double scale : spec.values) {
        SweepPoint pt;
        pt.param = scale;
        ReducedSystem s = sys;
        Equilibrium e = eq;
        try {
            switch (spec.kind) {
                case SweepKind::damping: s.d *= scale; break;
                case SweepKind::inertia: s.m *= scale; break;
                case SweepKind::loading: {
                    s.p_mech *= scale;
                    EquilibriumOptions opts;
                    opts.reference = eq.reference_index;
                    e = equilibrium::solve_equilibrium(s, eq.delta_star, opts);
                    break;
                }
            }
            const CertificateReport cert = certificate(s, e, units);
            const SpectrumReport spectrum = spectral::analyze_spectrum(spectral::build_jacobian(s, equilibrium::flow_jacobian(s, e.delta_star)));
            pt.min_s = cert.min_s();
            pt.max_s = cert.max_s();
            pt.certified = cert.certified;
            pt.re_lambda2 = spectrum.lambda2.real();
            pt.max_re_nonzero = spectrum.max_re_nonzero;
            pt.verdict = spectral::stability_verdict(spectrum);
        } catch (const Error& err) {
            pt.converged = false;
            pt.error = err.what();
        }
        out.push_back(pt);
    }
    return out;
}

/// CSV with header sweep_param,min_S,re_lambda2; failed points are omitted.
inline void write_sweep_csv(std::ostream& os, const std::vector<SweepPoint>& points) {
    os << "sweep_param,min_S,re_lambda2\n";
    const auto old_precision = os.precision(17);
    for (const auto& p : points)
        if (p.converged) os << p.param << "," << p.min_s << "," << p.re_lambda2 << "\n";
    os.precision(old_precision);
}

}  // namespace graphcert
}  // namespace swingcert
