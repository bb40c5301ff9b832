#pragma once

// Case file readers and the canonical JSON writer.
//
// Native JSON is the interchange format; MATPOWER text (baseMVA, bus, gen,
// branch tables) is import-only and needs a dynamics sidecar before it can be
// reduced.

#include <json.hpp>

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "swingcert/errors.hpp"
#include "swingcert/netmodel.hpp"

namespace swingcert {

enum class CaseFormat { native_json, matpower_subset };

namespace case_io {

using ordered_json = nlohmann::ordered_json;

namespace detail {

inline std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t offset) {
    std::size_t line = 1, col = 1;
    for (std::size_t k = 0; k < offset && k < text.size(); ++k) {
        if (text[k] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

template <typename T>
T required(const nlohmann::json& obj, const char* key, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) throw ParseError(where + ": missing field '" + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ParseError(where + ": field '" + key + "' has the wrong type");
    }
}

template <typename T>
T optional(const nlohmann::json& obj, const char* key, T fallback, const std::string& where) {
    if (!obj.contains(key)) return fallback;
    return required<T>(obj, key, where);
}

inline Eigen::VectorXd to_vector(const nlohmann::json& j, const std::string& where) {
    if (!j.is_array()) throw ParseError(where + ": expected an array");
    Eigen::VectorXd v(j.size());
    for (std::size_t k = 0; k < j.size(); ++k) {
        if (!j[k].is_number()) throw ParseError(where + ": expected numbers");
        v(static_cast<Eigen::Index>(k)) = j[k].get<double>();
    }
    return v;
}

inline Eigen::MatrixXd to_matrix(const nlohmann::json& j, std::size_t n, const std::string& where) {
    if (!j.is_array() || j.size() != n) throw ParseError(where + ": expected " + std::to_string(n) + " rows");
    Eigen::MatrixXd m(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        const Eigen::VectorXd row = to_vector(j[r], where);
        if (static_cast<std::size_t>(row.size()) != n) throw ParseError(where + ": row " + std::to_string(r + 1) + " has wrong length");
        m.row(static_cast<Eigen::Index>(r)) = row.transpose();
    }
    return m;
}

inline BusType parse_bus_type(const std::string& s, const std::string& where) {
    if (s == "slack") return BusType::slack;
    if (s == "pv") return BusType::pv;
    if (s == "pq") return BusType::pq;
    throw ParseError(where + ": unknown bus type '" + s + "'");
}

inline ordered_json vector_json(const Eigen::VectorXd& v) {
    ordered_json a = ordered_json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v(k));
    return a;
}

inline ordered_json matrix_json(const Eigen::MatrixXd& m) {
    ordered_json a = ordered_json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vector_json(m.row(r).transpose()));
    return a;
}

}  // namespace detail

inline ReducedSystem reduced_from_json(const nlohmann::json& j) {
    const std::string where = "reduced";
    ReducedSystem s;
    s.n = detail::required<std::size_t>(j, "n", where);
    s.v_mag = detail::to_vector(detail::required<nlohmann::json>(j, "v_mag", where), where + ".v_mag");
    s.y_mag = detail::to_matrix(detail::required<nlohmann::json>(j, "y_mag", where), s.n, where + ".y_mag");
    s.y_ang = detail::to_matrix(detail::required<nlohmann::json>(j, "y_ang", where), s.n, where + ".y_ang");
    s.m = detail::to_vector(detail::required<nlohmann::json>(j, "m", where), where + ".m");
    s.d = detail::to_vector(detail::required<nlohmann::json>(j, "d", where), where + ".d");
    s.p_mech = detail::to_vector(detail::required<nlohmann::json>(j, "p_mech", where), where + ".p_mech");
    s.omega_s = detail::optional<double>(j, "omega_s", kDefaultOmegaS, where);
    if (j.contains("delta0")) s.delta0 = detail::to_vector(j.at("delta0"), where + ".delta0");
    if (j.contains("machine_bus")) s.machine_bus = detail::required<std::vector<int>>(j, "machine_bus", where);
    try {
        s.validate();
    } catch (const ModelError& e) {
        throw ParseError(e.what());
    }
    return s;
}

inline ordered_json reduced_to_json(const ReducedSystem& s) {
    ordered_json j;
    j["n"] = s.n;
    j["omega_s"] = s.omega_s;
    j["v_mag"] = detail::vector_json(s.v_mag);
    j["y_mag"] = detail::matrix_json(s.y_mag);
    j["y_ang"] = detail::matrix_json(s.y_ang);
    j["m"] = detail::vector_json(s.m);
    j["d"] = detail::vector_json(s.d);
    j["p_mech"] = detail::vector_json(s.p_mech);
    if (s.delta0.size() > 0) j["delta0"] = detail::vector_json(s.delta0);
    if (!s.machine_bus.empty()) j["machine_bus"] = s.machine_bus;
    return j;
}

/// Parses the native JSON case document.
inline CaseData parse_native_json(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        const auto [line, col] = detail::line_column(text, e.byte > 0 ? e.byte - 1 : 0);
        throw ParseError(std::string("invalid JSON: ") + e.what(), line, col);
    }
    if (!doc.is_object()) throw ParseError("case document must be a JSON object", 1, 1);

    CaseData c;
    c.name = detail::optional<std::string>(doc, "name", "", "case");
    c.base_mva = detail::optional<double>(doc, "base_mva", 100.0, "case");
    c.omega_s = detail::optional<double>(doc, "omega_s", kDefaultOmegaS, "case");
    if (!(c.base_mva > 0.0)) throw ParseError("case: base_mva must be positive");

    if (doc.contains("buses")) {
        std::size_t k = 0;
        for (const auto& b : doc.at("buses")) {
            const std::string where = "buses[" + std::to_string(k++) + "]";
            BusRecord r;
            r.id = detail::required<int>(b, "id", where);
            r.type = detail::parse_bus_type(detail::required<std::string>(b, "bus_type", where), where);
            r.p_load = detail::optional<double>(b, "p_load", 0.0, where);
            r.q_load = detail::optional<double>(b, "q_load", 0.0, where);
            r.v_mag = detail::optional<double>(b, "v_mag", 1.0, where);
            r.v_ang = detail::optional<double>(b, "v_ang", 0.0, where);
            r.base_kv = detail::optional<double>(b, "base_kv", 0.0, where);
            r.g_shunt = detail::optional<double>(b, "g_shunt", 0.0, where);
            r.b_shunt = detail::optional<double>(b, "b_shunt", 0.0, where);
            c.buses.push_back(r);
        }
    }
    if (doc.contains("branches")) {
        std::size_t k = 0;
        for (const auto& b : doc.at("branches")) {
            const std::string where = "branches[" + std::to_string(k++) + "]";
            BranchRecord r;
            r.from_bus = detail::required<int>(b, "from_bus", where);
            r.to_bus = detail::required<int>(b, "to_bus", where);
            r.r = detail::required<double>(b, "r", where);
            r.x = detail::required<double>(b, "x", where);
            r.b_shunt = detail::optional<double>(b, "b_shunt", 0.0, where);
            r.tap = detail::optional<double>(b, "tap", 1.0, where);
            r.status = detail::optional<bool>(b, "status", true, where);
            c.branches.push_back(r);
        }
    }
    if (doc.contains("generators")) {
        std::size_t k = 0;
        bool all_dynamic = true;
        for (const auto& g : doc.at("generators")) {
            const std::string where = "generators[" + std::to_string(k++) + "]";
            GeneratorDynamics r;
            r.bus = detail::required<int>(g, "bus", where);
            r.p_mech = detail::optional<double>(g, "p_mech", 0.0, where);
            if (g.contains("inertia_m") && g.contains("damping_d") && g.contains("xd_prime")) {
                r.inertia_m = detail::required<double>(g, "inertia_m", where);
                r.damping_d = detail::required<double>(g, "damping_d", where);
                r.xd_prime = detail::required<double>(g, "xd_prime", where);
                if (!(r.inertia_m > 0.0) || !(r.damping_d > 0.0) || !(r.xd_prime > 0.0))
                    throw ParseError(where + ": inertia_m, damping_d and xd_prime must be positive");
            } else {
                all_dynamic = false;
            }
            c.generators.push_back(r);
        }
        c.has_dynamics = all_dynamic && !c.generators.empty();
    }
    if (doc.contains("solution")) {
        const auto& sol = doc.at("solution");
        const Eigen::VectorXd vm = detail::to_vector(detail::required<nlohmann::json>(sol, "v_mag", "solution"), "solution.v_mag");
        const Eigen::VectorXd va = detail::to_vector(detail::required<nlohmann::json>(sol, "v_ang", "solution"), "solution.v_ang");
        if (static_cast<std::size_t>(vm.size()) != c.buses.size() || static_cast<std::size_t>(va.size()) != c.buses.size())
            throw ParseError("solution: voltage vectors must have one entry per bus");
        for (std::size_t k = 0; k < c.buses.size(); ++k) {
            c.buses[k].v_mag = vm(static_cast<Eigen::Index>(k));
            c.buses[k].v_ang = va(static_cast<Eigen::Index>(k));
        }
    }
    if (doc.contains("reduced")) c.reduced = reduced_from_json(doc.at("reduced"));
    if (!c.buses.empty() || !c.branches.empty() || !c.generators.empty()) netmodel::validate_network(c);
    if (c.buses.empty() && !c.reduced) throw ParseError("case has neither buses nor a reduced system");
    return c;
}

namespace detail {

/// Minimal scanner for MATPOWER case files.
class MatpowerScanner {
public:
    explicit MatpowerScanner(std::string_view text) : text_(text) {}

    bool at_end() {
        skip_space(true);
        return pos_ >= text_.size();
    }

    /// Skips blanks and comments; newlines too when `newlines` is set.
    void skip_space(bool newlines) {
        while (pos_ < text_.size()) {
            const char ch = text_[pos_];
            if (ch == '%') {
                while (pos_ < text_.size() && text_[pos_] != '\n') advance();
            } else if (ch == ' ' || ch == '\t' || ch == '\r' || (newlines && ch == '\n')) {
                advance();
            } else if (ch == '.' && text_.substr(pos_, 3) == "...") {
                while (pos_ < text_.size() && text_[pos_] != '\n') advance();
                if (pos_ < text_.size()) advance();
            } else {
                break;
            }
        }
    }

    char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

    void advance() {
        if (text_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    std::string identifier() {
        std::string out;
        while (pos_ < text_.size()) {
            const char ch = text_[pos_];
            if (std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '.') {
                out.push_back(ch);
                advance();
            } else {
                break;
            }
        }
        return out;
    }

    void skip_line() {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
    }

    void expect(char ch) {
        skip_space(true);
        if (peek() != ch) fail(std::string("expected '") + ch + "'");
        advance();
    }

    double number() {
        const std::string s(text_.substr(pos_, std::min<std::size_t>(64, text_.size() - pos_)));
        char* end = nullptr;
        const double value = std::strtod(s.c_str(), &end);
        if (end == s.c_str()) fail("expected a number");
        for (auto k = end - s.c_str(); k > 0; --k) advance();
        return value;
    }

    /// Reads a bracketed matrix. Each row remembers its source line.
    std::vector<std::pair<std::size_t, std::vector<double>>> matrix() {
        expect('[');
        std::vector<std::pair<std::size_t, std::vector<double>>> rows;
        std::vector<double> row;
        std::size_t row_line = line_;
        auto flush = [&] {
            if (!row.empty()) rows.emplace_back(row_line, std::move(row));
            row.clear();
        };
        for (;;) {
            skip_space(false);
            const char ch = peek();
            if (ch == '\0') fail("unterminated matrix");
            if (ch == ']') {
                advance();
                flush();
                break;
            }
            if (ch == ';' || ch == '\n') {
                advance();
                flush();
                continue;
            }
            if (ch == ',') {
                advance();
                continue;
            }
            if (row.empty()) row_line = line_;
            row.push_back(number());
            const char next = peek();
            if (!(next == ' ' || next == '\t' || next == '\r' || next == '\n' || next == ',' || next == ';' ||
                  next == ']' || next == '%'))
                fail("unexpected character in matrix");
        }
        return rows;
    }

    /// Skips a value we do not interpret (string, cell array, scalar).
    void skip_value() {
        skip_space(true);
        const char open = peek();
        if (open == '\'' || open == '"') {
            advance();
            while (peek() != open) {
                if (peek() == '\0' || peek() == '\n') fail("unterminated string");
                advance();
            }
            advance();
        } else if (open == '{' || open == '[') {
            const char close = open == '{' ? '}' : ']';
            int depth = 0;
            do {
                if (peek() == '\0') fail("unterminated block");
                if (peek() == open) ++depth;
                if (peek() == close) --depth;
                advance();
            } while (depth > 0);
        } else {
            while (peek() != ';' && peek() != '\n' && peek() != '\0') advance();
        }
    }

    [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, line_, col_); }

    std::size_t line() const { return line_; }
    std::size_t column() const { return col_; }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t col_ = 1;
};

}  // namespace detail

/// Parses the MATPOWER subset (mpc.baseMVA, mpc.bus, mpc.gen, mpc.branch).
/// Generators carry p_mech only; dynamics come from a sidecar.
inline CaseData parse_matpower(std::string_view text) {
    detail::MatpowerScanner sc(text);
    CaseData c;
    using Rows = std::vector<std::pair<std::size_t, std::vector<double>>>;
    Rows bus_rows, gen_rows, branch_rows;
    bool have_base = false;

    while (!sc.at_end()) {
        const std::size_t stmt_line = sc.line();
        const std::size_t stmt_col = sc.column();
        const std::string ident = sc.identifier();
        if (ident.empty()) sc.fail("unexpected character");
        if (ident == "function" || ident == "end") {
            if (ident == "function") {
                std::string rest;
                while (sc.peek() != '\n' && sc.peek() != '\0') {
                    rest.push_back(sc.peek());
                    sc.advance();
                }
                const auto eq = rest.find('=');
                c.name = rest.substr(eq == std::string::npos ? 0 : eq + 1);
                c.name.erase(0, c.name.find_first_not_of(" \t"));
                c.name.erase(c.name.find_last_not_of(" \t\r;") + 1);
            } else {
                sc.skip_line();
            }
            continue;
        }
        sc.expect('=');
        sc.skip_space(true);
        if (ident == "mpc.baseMVA") {
            c.base_mva = sc.number();
            have_base = true;
        } else if (ident == "mpc.bus") {
            bus_rows = sc.matrix();
        } else if (ident == "mpc.gen") {
            gen_rows = sc.matrix();
        } else if (ident == "mpc.branch") {
            branch_rows = sc.matrix();
        } else if (ident.rfind("mpc.", 0) == 0) {
            if (ident != "mpc.version") c.warnings.push_back("ignored table " + ident);
            sc.skip_value();
        } else {
            throw ParseError("unexpected statement '" + ident + "'", stmt_line, stmt_col);
        }
        sc.skip_space(false);
        if (sc.peek() == ';') sc.advance();
    }
    if (!have_base) throw ParseError("missing mpc.baseMVA");
    if (!(c.base_mva > 0.0)) throw ParseError("mpc.baseMVA must be positive");
    if (bus_rows.empty()) throw ParseError("missing mpc.bus");
    if (gen_rows.empty()) throw ParseError("missing mpc.gen");
    if (branch_rows.empty()) throw ParseError("missing mpc.branch");

    auto check_width = [&](const Rows& rows, std::size_t min_cols, std::size_t std_cols, const char* table) {
        bool warned = false;
        for (const auto& [line, row] : rows) {
            if (row.size() < min_cols)
                throw ParseError(std::string(table) + " row needs at least " + std::to_string(min_cols) + " columns", line, 1);
            if (row.size() > std_cols && !warned) {
                c.warnings.push_back(std::string(table) + ": unknown columns beyond " + std::to_string(std_cols) + " ignored");
                warned = true;
            }
        }
    };
    check_width(bus_rows, 10, 17, "mpc.bus");
    check_width(gen_rows, 8, 25, "mpc.gen");
    check_width(branch_rows, 11, 21, "mpc.branch");

    constexpr double deg = std::numbers::pi / 180.0;
    std::unordered_map<int, std::size_t> seen;
    for (const auto& [line, row] : bus_rows) {
        const int type = static_cast<int>(row[1]);
        BusRecord b;
        b.id = static_cast<int>(row[0]);
        if (seen.contains(b.id)) throw ParseError("duplicate bus id " + std::to_string(b.id), line, 1);
        seen.emplace(b.id, c.buses.size());
        if (type == 4) {
            c.warnings.push_back("isolated bus " + std::to_string(b.id) + " dropped");
            continue;
        }
        if (type == 3) b.type = BusType::slack;
        else if (type == 2) b.type = BusType::pv;
        else if (type == 1) b.type = BusType::pq;
        else throw ParseError("unknown bus type " + std::to_string(type), line, 1);
        b.p_load = row[2] / c.base_mva;
        b.q_load = row[3] / c.base_mva;
        b.g_shunt = row[4] / c.base_mva;
        b.b_shunt = row[5] / c.base_mva;
        b.v_mag = row[7];
        b.v_ang = row[8] * deg;
        b.base_kv = row[9];
        c.buses.push_back(b);
    }
    const auto index = netmodel::bus_index(c.buses);
    for (const auto& [line, row] : gen_rows) {
        if (row[7] <= 0.0) continue;
        const int bus = static_cast<int>(row[0]);
        const auto it = index.find(bus);
        if (it == index.end()) throw ParseError("generator references unknown bus " + std::to_string(bus), line, 1);
        GeneratorDynamics g;
        g.bus = bus;
        g.p_mech = row[1] / c.base_mva;
        c.buses[it->second].v_mag = row[5];
        c.generators.push_back(g);
    }
    for (const auto& [line, row] : branch_rows) {
        BranchRecord br;
        br.from_bus = static_cast<int>(row[0]);
        br.to_bus = static_cast<int>(row[1]);
        if (!index.contains(br.from_bus) || !index.contains(br.to_bus))
            throw ParseError("branch references unknown bus", line, 1);
        br.r = row[2];
        br.x = row[3];
        br.b_shunt = row[4];
        br.tap = row[8] == 0.0 ? 1.0 : row[8];
        if (row[9] != 0.0) c.warnings.push_back("phase shift on branch " + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus) + " ignored");
        br.status = row[10] > 0.0;
        c.branches.push_back(br);
    }
    netmodel::validate_network(c);
    return c;
}

/// Attaches M, D, x'_d from a dynamics sidecar document:
/// {"omega_s": ..., "generators": [{"bus", "inertia_m", "damping_d", "xd_prime"}]}.
inline void attach_dynamics(CaseData& c, std::string_view sidecar_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(sidecar_text);
    } catch (const nlohmann::json::parse_error& e) {
        const auto [line, col] = detail::line_column(sidecar_text, e.byte > 0 ? e.byte - 1 : 0);
        throw ParseError(std::string("invalid dynamics JSON: ") + e.what(), line, col);
    }
    c.omega_s = detail::optional<double>(doc, "omega_s", c.omega_s, "dynamics");
    std::unordered_map<int, nlohmann::json> by_bus;
    for (const auto& g : detail::required<nlohmann::json>(doc, "generators", "dynamics"))
        by_bus[detail::required<int>(g, "bus", "dynamics.generators")] = g;
    for (auto& g : c.generators) {
        const auto it = by_bus.find(g.bus);
        if (it == by_bus.end()) throw ModelError("missing dynamics for generator at bus " + std::to_string(g.bus));
        const std::string where = "dynamics for bus " + std::to_string(g.bus);
        g.inertia_m = detail::required<double>(it->second, "inertia_m", where);
        g.damping_d = detail::required<double>(it->second, "damping_d", where);
        g.xd_prime = detail::required<double>(it->second, "xd_prime", where);
        if (!(g.inertia_m > 0.0) || !(g.damping_d > 0.0) || !(g.xd_prime > 0.0))
            throw ModelError(where + ": inertia_m, damping_d and xd_prime must be positive");
    }
    c.has_dynamics = !c.generators.empty();
}

inline CaseData parse_case(std::string_view source, CaseFormat format) {
    return format == CaseFormat::native_json ? parse_native_json(source) : parse_matpower(source);
}

/// Canonical JSON document for a case. Emitting a parsed document and parsing
/// it again is a fixed point.
inline ordered_json to_json(const CaseData& c) {
    ordered_json j;
    if (!c.name.empty()) j["name"] = c.name;
    j["base_mva"] = c.base_mva;
    j["omega_s"] = c.omega_s;
    j["buses"] = ordered_json::array();
    for (const auto& b : c.buses) {
        ordered_json e;
        e["id"] = b.id;
        e["bus_type"] = to_string(b.type);
        e["p_load"] = b.p_load;
        e["q_load"] = b.q_load;
        e["v_mag"] = b.v_mag;
        e["v_ang"] = b.v_ang;
        e["base_kv"] = b.base_kv;
        e["g_shunt"] = b.g_shunt;
        e["b_shunt"] = b.b_shunt;
        j["buses"].push_back(e);
    }
    j["branches"] = ordered_json::array();
    for (const auto& br : c.branches) {
        ordered_json e;
        e["from_bus"] = br.from_bus;
        e["to_bus"] = br.to_bus;
        e["r"] = br.r;
        e["x"] = br.x;
        e["b_shunt"] = br.b_shunt;
        e["tap"] = br.tap;
        e["status"] = br.status;
        j["branches"].push_back(e);
    }
    j["generators"] = ordered_json::array();
    for (const auto& g : c.generators) {
        ordered_json e;
        e["bus"] = g.bus;
        if (c.has_dynamics) {
            e["inertia_m"] = g.inertia_m;
            e["damping_d"] = g.damping_d;
            e["xd_prime"] = g.xd_prime;
        }
        e["p_mech"] = g.p_mech;
        j["generators"].push_back(e);
    }
    if (c.reduced) j["reduced"] = reduced_to_json(*c.reduced);
    return j;
}

inline std::string emit(const CaseData& c) { return to_json(c).dump(2) + "\n"; }

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline CaseFormat detect_format(const std::string& path) {
    return path.size() >= 2 && path.compare(path.size() - 2, 2, ".m") == 0 ? CaseFormat::matpower_subset
                                                                           : CaseFormat::native_json;
}

/// Loads a case by path; MATPOWER input picks up dynamics from `dynamics_path`
/// when given.
inline CaseData load_case(const std::string& path, const std::string& dynamics_path = {}) {
    CaseData c = parse_case(read_file(path), detect_format(path));
    if (!dynamics_path.empty()) attach_dynamics(c, read_file(dynamics_path));
    return c;
}

}  // namespace case_io
}  // namespace swingcert
