#include <gtest/gtest.h>

#include <string>

#include "support.hpp"

using namespace swingcert;

namespace {

const char* kThreeBus = R"({
  "name": "three-bus",
  "base_mva": 100,
  "buses": [
    {"id": 1, "bus_type": "slack", "v_mag": 1.05},
    {"id": 2, "bus_type": "pv", "v_mag": 1.02},
    {"id": 3, "bus_type": "pq", "p_load": 0.9, "q_load": 0.3}
  ],
  "branches": [
    {"from_bus": 1, "to_bus": 2, "r": 0.01, "x": 0.1},
    {"from_bus": 2, "to_bus": 3, "r": 0.02, "x": 0.12, "b_shunt": 0.05},
    {"from_bus": 3, "to_bus": 1, "r": 0.01, "x": 0.08, "tap": 0.98}
  ],
  "generators": [
    {"bus": 1, "inertia_m": 10, "damping_d": 2, "xd_prime": 0.1, "p_mech": 0.4},
    {"bus": 2, "inertia_m": 6, "damping_d": 1.5, "xd_prime": 0.15, "p_mech": 0.5},
    {"bus": 3, "inertia_m": 3, "damping_d": 1, "xd_prime": 0.2, "p_mech": 0.0}
  ]
}
)";

std::string matpower(const std::string& extra_bus_cols = "", const std::string& branch_tail = "0\t0\t1") {
    return "function mpc = tiny\n"
           "mpc.version = '2';\n"
           "mpc.baseMVA = 100;\n"
           "mpc.bus = [\n"
           "\t1\t3\t0\t0\t0\t0\t1\t1.0\t0\t230" + extra_bus_cols + ";\n"
           "\t2\t1\t50\t10\t0\t0\t1\t1.0\t0\t230" + extra_bus_cols + ";\n"
           "];\n"
           "mpc.gen = [\n"
           "\t1\t50\t0\t100\t-100\t1.02\t100\t1;\n"
           "];\n"
           "mpc.branch = [\n"
           "\t1\t2\t0.01\t0.1\t0\t0\t0\t0\t" + branch_tail + ";\n"
           "];\n";
}

}  // namespace

TEST(NativeJson, ExplicitThreeBus) {
    const CaseData c = case_io::parse_case(kThreeBus, CaseFormat::native_json);
    EXPECT_EQ(c.name, "three-bus");
    ASSERT_EQ(c.buses.size(), 3u);
    ASSERT_EQ(c.branches.size(), 3u);
    ASSERT_EQ(c.generators.size(), 3u);
    EXPECT_TRUE(c.has_dynamics);
    EXPECT_EQ(c.buses[2].type, BusType::pq);
    EXPECT_DOUBLE_EQ(c.buses[2].p_load, 0.9);
    EXPECT_DOUBLE_EQ(c.branches[1].b_shunt, 0.05);
    EXPECT_DOUBLE_EQ(c.branches[2].tap, 0.98);
    EXPECT_DOUBLE_EQ(c.branches[0].tap, 1.0);
    EXPECT_DOUBLE_EQ(c.generators[1].inertia_m, 6.0);
}

TEST(NativeJson, EmitParseIsFixedPoint) {
    const CaseData c = case_io::parse_case(kThreeBus, CaseFormat::native_json);
    const std::string once = case_io::emit(c);
    const std::string twice = case_io::emit(case_io::parse_case(once, CaseFormat::native_json));
    EXPECT_EQ(once, twice);
}

TEST(NativeJson, SyntaxErrorHasLineAndColumn) {
    const std::string bad = "{\n  \"base_mva\": 100,\n  \"buses\": [ {\"id\": 1,, } ]\n}\n";
    try {
        case_io::parse_case(bad, CaseFormat::native_json);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
        EXPECT_GT(e.column(), 0u);
    }
}

TEST(NativeJson, DanglingAndDuplicateReferences) {
    std::string dangling = kThreeBus;
    dangling.replace(dangling.find("\"to_bus\": 3"), 11, "\"to_bus\": 9");
    EXPECT_THROW(case_io::parse_case(dangling, CaseFormat::native_json), ModelError);
    std::string dup = kThreeBus;
    dup.replace(dup.find("\"id\": 3"), 7, "\"id\": 2");
    EXPECT_THROW(case_io::parse_case(dup, CaseFormat::native_json), ModelError);
}

TEST(NativeJson, MissingFieldAndBadType) {
    EXPECT_THROW(case_io::parse_case(R"({"buses": [{"bus_type": "pq"}]})", CaseFormat::native_json), ParseError);
    EXPECT_THROW(case_io::parse_case(R"({"buses": [{"id": 1, "bus_type": "swing"}]})", CaseFormat::native_json), ParseError);
    EXPECT_THROW(case_io::parse_case(R"([1, 2])", CaseFormat::native_json), ParseError);
    EXPECT_THROW(case_io::parse_case(R"({"base_mva": 100})", CaseFormat::native_json), ParseError);
}

TEST(NativeJson, ReducedOnlyDocument) {
    const CaseData c = case_io::load_case(testsupport::case_path("two_machine.json"));
    ASSERT_TRUE(c.reduced.has_value());
    EXPECT_TRUE(c.buses.empty());
    EXPECT_EQ(c.reduced->n, 2u);
    const ReducedSystem& s = *c.reduced;
    EXPECT_DOUBLE_EQ(s.y_mag(0, 1), 1.0);
    EXPECT_DOUBLE_EQ(s.omega_s, 1.0);
    // round trip of the reduced block
    const auto again = case_io::parse_case(case_io::emit(c), CaseFormat::native_json);
    EXPECT_EQ(case_io::emit(again), case_io::emit(c));
}

TEST(NativeJson, ReducedRejectsInvalidParameters) {
    const std::string doc = R"({"reduced": {"n": 1, "v_mag": [1], "y_mag": [[0]], "y_ang": [[0]],
                                "m": [0], "d": [1], "p_mech": [0]}})";
    EXPECT_THROW(case_io::parse_case(doc, CaseFormat::native_json), ParseError);
    const std::string wrong_shape = R"({"reduced": {"n": 2, "v_mag": [1, 1], "y_mag": [[0, 1]], "y_ang": [[0, 1]],
                                "m": [1, 1], "d": [1, 1], "p_mech": [0, 0]}})";
    EXPECT_THROW(case_io::parse_case(wrong_shape, CaseFormat::native_json), ParseError);
}

TEST(NativeJson, SolutionBlockOverridesVoltages) {
    std::string doc = kThreeBus;
    doc.insert(doc.rfind('}'), R"(, "solution": {"v_mag": [1.05, 1.02, 0.97], "v_ang": [0, 0.01, -0.05]})");
    const CaseData c = case_io::parse_case(doc, CaseFormat::native_json);
    EXPECT_DOUBLE_EQ(c.buses[2].v_mag, 0.97);
    EXPECT_DOUBLE_EQ(c.buses[2].v_ang, -0.05);
}

TEST(Matpower, BranchRowMapping) {
    const CaseData c = case_io::parse_case(matpower(), CaseFormat::matpower_subset);
    EXPECT_EQ(c.name, "tiny");
    ASSERT_EQ(c.branches.size(), 1u);
    EXPECT_EQ(c.branches[0].from_bus, 1);
    EXPECT_EQ(c.branches[0].to_bus, 2);
    EXPECT_DOUBLE_EQ(c.branches[0].r, 0.01);
    EXPECT_DOUBLE_EQ(c.branches[0].x, 0.1);
    EXPECT_DOUBLE_EQ(c.branches[0].tap, 1.0);
    EXPECT_TRUE(c.branches[0].status);
    EXPECT_DOUBLE_EQ(c.buses[1].p_load, 0.5);
    EXPECT_DOUBLE_EQ(c.buses[1].q_load, 0.1);
    EXPECT_DOUBLE_EQ(c.generators[0].p_mech, 0.5);
    EXPECT_DOUBLE_EQ(c.buses[0].v_mag, 1.02);  // generator set point
    EXPECT_TRUE(c.warnings.empty());
}

TEST(Matpower, UnknownColumnsWarn) {
    const CaseData c = case_io::parse_case(matpower("\t1\t1.1\t0.9\t7\t7\t7\t7\t7\t7\t7\t7"), CaseFormat::matpower_subset);
    ASSERT_EQ(c.warnings.size(), 1u);
    EXPECT_NE(c.warnings[0].find("mpc.bus"), std::string::npos);
}

TEST(Matpower, PhaseShiftWarnsAndStatusZeroDropsFromService) {
    const CaseData shifted = case_io::parse_case(matpower("", "0\t30\t1"), CaseFormat::matpower_subset);
    ASSERT_EQ(shifted.warnings.size(), 1u);
    EXPECT_NE(shifted.warnings[0].find("phase shift"), std::string::npos);
    const CaseData off = case_io::parse_case(matpower("", "0\t0\t0"), CaseFormat::matpower_subset);
    EXPECT_FALSE(off.branches[0].status);
}

TEST(Matpower, CommentsContinuationAndUnknownTables) {
    std::string text = matpower();
    text += "% trailing comment\nmpc.gencost = [\n\t2\t0\t0\t3\t0.11\t5\t150; ...\n];\n";
    const CaseData c = case_io::parse_case(text, CaseFormat::matpower_subset);
    ASSERT_EQ(c.warnings.size(), 1u);
    EXPECT_NE(c.warnings[0].find("mpc.gencost"), std::string::npos);
}

TEST(Matpower, SyntaxErrorsCarryLocation) {
    std::string text = matpower();
    text.replace(text.find("0.01\t0.1"), 4, "0.0x");
    try {
        case_io::parse_case(text, CaseFormat::matpower_subset);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 12u);
        EXPECT_GT(e.column(), 0u);
    }
    EXPECT_THROW(case_io::parse_case("mpc.baseMVA = 100;\nmpc.bus = [\n1 3 0 0 0 0 1 1 0 230\n", CaseFormat::matpower_subset),
                 ParseError);
    EXPECT_THROW(case_io::parse_case("mpc.baseMVA = 100;\n", CaseFormat::matpower_subset), ParseError);
}

TEST(Matpower, DanglingGeneratorAndShortRows) {
    std::string text = matpower();
    text.replace(text.find("\t1\t50\t0\t100"), 4, "\t7\t50");
    EXPECT_THROW(case_io::parse_case(text, CaseFormat::matpower_subset), ParseError);
    std::string shorter = matpower();
    const std::string tail = "\t0\t0\t0\t0\t0\t1;";
    shorter.replace(shorter.find(tail), tail.size(), ";");
    EXPECT_THROW(case_io::parse_case(shorter, CaseFormat::matpower_subset), ParseError);
}

TEST(Matpower, Case9NormalizesToCommittedJson) {
    const CaseData c = case_io::load_case(testsupport::case_path("case9.m"), testsupport::case_path("case9_dynamics.json"));
    EXPECT_EQ(c.buses.size(), 9u);
    EXPECT_EQ(c.branches.size(), 9u);
    EXPECT_EQ(c.generators.size(), 3u);
    const std::string committed = case_io::read_file(testsupport::case_path("case9.json"));
    EXPECT_EQ(case_io::emit(c), committed);
    // parse -> emit -> parse is a fixed point
    EXPECT_EQ(case_io::emit(case_io::parse_case(committed, CaseFormat::native_json)), committed);
}

TEST(Dynamics, SidecarMissingGenerator) {
    CaseData c = case_io::load_case(testsupport::case_path("case9.m"));
    EXPECT_THROW(case_io::attach_dynamics(c, R"({"generators": [{"bus": 1, "inertia_m": 1, "damping_d": 1, "xd_prime": 0.1}]})"),
                 ModelError);
    EXPECT_THROW(case_io::attach_dynamics(c, R"({"generators": [)"), ParseError);
}

TEST(Dynamics, FormatDetection) {
    EXPECT_EQ(case_io::detect_format("grid/case9.m"), CaseFormat::matpower_subset);
    EXPECT_EQ(case_io::detect_format("grid/case9.json"), CaseFormat::native_json);
    EXPECT_THROW(case_io::load_case("/nonexistent/case.json"), Error);
}
