#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <sstream>

#include "nonunif/experiments.hpp"

using namespace nonunif;

namespace {

std::string csv_of(const std::vector<SweepRecord>& recs) {
    std::ostringstream os;
    write_records_csv(os, recs);
    write_plotdata_csv(os, recs);
    return os.str();
}

Scenario quick(const std::string& id) {
    Scenario sc;
    sc.id = id;
    sc.seed = 3;
    return sc;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) out.push_back(line);
    return out;
}

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("nonunif_exp_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

}  // namespace

TEST(ScenarioConfig, ParsesAllFields) {
    const auto sc = parse_scenario(
        "[scenario]\nid = stein_sweep\nseed = 11\nmesh_levels = 17, 33\nworkers = 2\n[parameters]\nstability = 0.2\n");
    EXPECT_EQ(sc.id, "stein_sweep");
    EXPECT_EQ(sc.seed, 11u);
    EXPECT_EQ(sc.mesh_levels, (std::vector<int>{17, 33}));
    EXPECT_EQ(sc.workers, 2);
    EXPECT_DOUBLE_EQ(sc.parameters.number("stability"), 0.2);
}

TEST(ScenarioConfig, RejectsBadInput) {
    EXPECT_THROW(parse_scenario("[scenario]\nid = nothing_here\n"), ValidationError);
    EXPECT_THROW(parse_scenario("[scenario]\nid = stein_sweep\nmesh_levels = 33, 17\n"), ValidationError);
    EXPECT_THROW(parse_scenario("[scenario]\nid = stein_sweep\nmesh_levels = 33, 33\n"), ValidationError);
    EXPECT_THROW(parse_scenario("[scenario]\nid = stein_sweep\nseed = -1\n"), ParseError);
    EXPECT_THROW(parse_scenario("[parameters]\nx = 1\n"), ParseError);
    EXPECT_THROW(parse_scenario("[scenario]\nid = stein_sweep\nmesh_levels = 3.5\n"), ParseError);
}

TEST(ScenarioConfig, CheckedInConfigsLoad) {
    int count = 0;
    for (const auto& e : std::filesystem::directory_iterator(std::string(NONUNIF_CONFIGS) + "/scenarios")) {
        const auto sc = load_scenario(e.path().string());
        EXPECT_EQ(e.path().stem().string(), sc.id);
        ++count;
    }
    EXPECT_EQ(count, int(scenario_ids().size()));
}

TEST(RunScenario, RepeatedRunsAreByteIdentical) {
    for (const char* id : {"moser_reference", "fractional_suite", "caccioppoli_suite"}) {
        const auto a = csv_of(run_scenario(quick(id)));
        const auto b = csv_of(run_scenario(quick(id)));
        EXPECT_EQ(a, b) << id;
    }
}

TEST(RunScenario, WorkerCountDoesNotChangeOutput) {
    auto one = quick("fractional_suite");
    one.workers = 1;
    auto four = one;
    four.workers = 4;
    EXPECT_EQ(csv_of(run_scenario(one)), csv_of(run_scenario(four)));
}

TEST(RunScenario, SeedChangesRandomizedRecords) {
    auto a = quick("fractional_suite");
    auto b = a;
    b.seed = 4;
    EXPECT_NE(csv_of(run_scenario(a)), csv_of(run_scenario(b)));
}

TEST(RunScenario, RecordsSortedByKey) {
    const auto recs = run_scenario(quick("fractional_suite"));
    ASSERT_FALSE(recs.empty());
    for (std::size_t i = 1; i < recs.size(); ++i) EXPECT_LT(recs[i - 1].key, recs[i].key);
}

TEST(RunScenario, VerdictsMatchRecomputedClassification) {
    for (const char* id : {"moser_reference", "fractional_suite", "caccioppoli_suite", "exp_growth_probe"}) {
        for (const auto& r : run_scenario(quick(id))) {
            EXPECT_TRUE(verdict_consistent(r)) << id << ' ' << r.key;
            if (r.regime) {
                EXPECT_EQ(r.verdict, verdict_name(classify_regime(*r.regime).verdict));
            }
        }
    }
}

TEST(RunScenario, FailingPointBecomesFailedRecord) {
    Scenario sc = quick("double_phase_dichotomy");
    sc.mesh_levels = {5, 9};
    sc.parameters.set("regular", std::string("2:1.5:1"));
    sc.parameters.set("counterexample", std::string("1.5:3.8:0.5"));
    const auto recs = run_scenario(sc);
    ASSERT_EQ(recs.size(), 2u);
    const auto& bad = recs[1];
    EXPECT_EQ(bad.key.rfind("regular/", 0), 0u);
    EXPECT_FALSE(bad.pass());
    EXPECT_FALSE(bad.note.empty());
    EXPECT_EQ(bad.scenario, "double_phase_dichotomy");
    EXPECT_EQ(failure_count(recs), 1u);
}

TEST(RunScenario, MalformedParametersRefuseBeforeRunning) {
    Scenario sc = quick("double_phase_dichotomy");
    sc.parameters.set("regular", std::string("2:2.4"));
    EXPECT_THROW(run_scenario(sc), ParseError);
    Scenario sc2 = quick("double_phase_dichotomy");
    sc2.parameters.set("coefficient", std::string("bogus"));
    EXPECT_THROW(run_scenario(sc2), ParseError);
}

TEST(RunScenario, MoserScenarioChecksPass) {
    const auto recs = run_scenario(quick("moser_reference"));
    EXPECT_EQ(failure_count(recs), 0u);
    bool saw_minimizer = false;
    for (const auto& r : recs)
        if (r.key == "minimizer/p=2") {
            saw_minimizer = true;
            EXPECT_GE(r.bound, r.value);
        }
    EXPECT_TRUE(saw_minimizer);
}

TEST(EmitReport, EmptyRecordsGiveHeaderOnly) {
    const auto dir = scratch("empty");
    const auto files = emit_report({}, dir.string());
    ASSERT_EQ(files.size(), 1u);
    EXPECT_EQ(read_text_file((dir / "records.csv").string()), records_header());
}

TEST(EmitReport, HundredRecordsSortedAndComplete) {
    std::vector<SweepRecord> recs;
    for (int i = 0; i < 100; ++i) {
        SweepRecord r;
        r.scenario = "moser_reference";
        char key[16];
        std::snprintf(key, sizeof key, "k%03d", i);
        r.key = key;
        r.value = i;
        r.check("ok", i % 7 != 0);
        r.plot.push_back({"s", double(i), 2.0 * i});
        recs.push_back(r);
    }
    std::mt19937 gen(5);
    std::shuffle(recs.begin(), recs.end(), gen);
    const auto dir = scratch("hundred");
    emit_report(recs, dir.string());
    const auto rows = lines_of(read_text_file((dir / "records.csv").string()));
    ASSERT_EQ(rows.size(), 101u);
    for (std::size_t i = 2; i < rows.size(); ++i) EXPECT_LT(rows[i - 1], rows[i]);
    EXPECT_NE(rows[1].find("k000"), std::string::npos);
    EXPECT_NE(rows[1].find(",false,"), std::string::npos);
    const auto plot = lines_of(read_text_file((dir / "plotdata_moser_reference.csv").string()));
    EXPECT_EQ(plot.size(), 101u);
    EXPECT_EQ(plot[0], "key,series,x,y");
}

TEST(EmitReport, FieldsWithCommasAreQuoted) {
    SweepRecord r;
    r.scenario = "stein_sweep";
    r.key = "a,b";
    r.note = "say \"hi\", twice";
    std::ostringstream os;
    write_records_csv(os, {r});
    const auto rows = lines_of(os.str());
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_NE(rows[1].find("\"a,b\""), std::string::npos);
    EXPECT_NE(rows[1].find("\"say \"\"hi\"\", twice\""), std::string::npos);
}

TEST(EmitReport, OnePlotFilePerScenario) {
    SweepRecord a, b;
    a.scenario = "stein_sweep";
    a.key = "x";
    b.scenario = "lemma_suite";
    b.key = "y";
    const auto dir = scratch("two");
    const auto files = emit_report({a, b}, dir.string());
    EXPECT_EQ(files.size(), 3u);
    EXPECT_TRUE(std::filesystem::exists(dir / "plotdata_stein_sweep.csv"));
    EXPECT_TRUE(std::filesystem::exists(dir / "plotdata_lemma_suite.csv"));
}

TEST(SweepRecord, PassRequiresEveryCheck) {
    SweepRecord r;
    EXPECT_TRUE(r.pass());
    r.check("a", true);
    EXPECT_TRUE(r.pass());
    r.check("b", false);
    EXPECT_FALSE(r.pass());
}

TEST(BoundaryData, Descriptors) {
    const auto aff = boundary_data_from("affine(c0=1, c1=2, c2=-1)");
    EXPECT_DOUBLE_EQ(aff({0.5, 2.0}), 0.0);
    const auto quad = boundary_data_from("quadratic(c11=1, c22=-1)");
    EXPECT_DOUBLE_EQ(quad({2.0, 1.0}), 3.0);
    const auto ang = boundary_data_from("angular(amplitude=4)");
    EXPECT_NEAR(ang({1.0, 1.0}), 4.0, 1e-12);
    EXPECT_NEAR(ang({-1.0, -1.0}), 0.0, 1e-12);
    EXPECT_NEAR(ang({1.0, -1.0}), 2.0, 1e-12);
    const auto zh = boundary_data_from("zhikov(amplitude=4)");
    EXPECT_DOUBLE_EQ(zh({0.5, 0.5}), 4.0);
    EXPECT_DOUBLE_EQ(zh({-0.5, -0.5}), 0.0);
    EXPECT_NEAR(zh({1.0, -1.0}), 2.0, 1e-12);
    EXPECT_THROW(boundary_data_from("spiral(turns=2)"), ParseError);
    EXPECT_THROW(boundary_data_from("affine(c3=1)"), ParseError);
}

TEST(BoundaryData, ProblemFromConfig) {
    const auto doc = IniDocument::parse(
        "[integrand]\nfamily = p_power\np = 2\n[problem]\nid = demo\nnodes = 9\ndata = affine(c1=1)\ndensity = 2\n");
    const auto pr = problem_from(doc);
    EXPECT_EQ(pr.id, "demo");
    EXPECT_EQ(pr.grid.nx(), 9);
    ASSERT_TRUE(pr.source.has_value());
    EXPECT_DOUBLE_EQ(pr.boundary_data[0], -1.0);
    EXPECT_THROW(problem_from(IniDocument::parse("[integrand]\nfamily = p_power\np = 2\n")), ParseError);
    EXPECT_THROW(problem_from(IniDocument::parse("[integrand]\nfamily = p_power\np = 2\n[problem]\nhi = -2\n")),
                 ValidationError);
}

TEST(LemmaRows, CountsAndValidity) {
    const auto hf = detail::lemma_rows_hole_filling(9, 20);
    EXPECT_EQ(hf.size(), 20u);
    for (const auto& r : hf) EXPECT_TRUE(r.pass) << r.case_id;
    const auto ms = detail::lemma_rows_moser(9, 10);
    EXPECT_EQ(ms.size(), 10u);
    for (const auto& r : ms) EXPECT_TRUE(r.pass) << r.case_id;
}
