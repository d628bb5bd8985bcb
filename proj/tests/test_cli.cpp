#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <string>

#include "nonunif/spec_io.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("nonunif_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

Run cli(const std::string& args, const std::string& env = "") {
    static int counter = 0;
    const auto errfile = fs::temp_directory_path() / ("nonunif_cli_err_" + std::to_string(counter++));
    const std::string cmd = env + " '" + std::string(NONUNIF_CLI) + "' " + args + " 2>'" + errfile.string() + "'";
    Run r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    std::array<char, 4096> buf{};
    std::size_t got;
    while ((got = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), got);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = nonunif::read_text_file(errfile.string());
    fs::remove(errfile);
    return r;
}

std::string config(const std::string& name) { return "'" + std::string(NONUNIF_CONFIGS) + "/" + name + "'"; }

}  // namespace

TEST(Cli, RegimeFromFlags) {
    const auto r = cli("regime --n 2 --p 2 --q 2.5 --alpha 1");
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "Regular\n");
    EXPECT_EQ(cli("regime --n 2 --p 1.5 --q 3.8 --alpha 0.5").out, "CounterexampleRegime\n");
}

TEST(Cli, RegimeFromConfig) {
    const auto r = cli("regime -c " + config("regime_double_phase.ini"));
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "Regular\n");
}

TEST(Cli, MissingConfigIsUsageError) {
    for (const char* sub : {"potential", "lorentz", "minimize", "gap", "lemma", "scenario", "report"}) {
        const auto r = cli(sub);
        EXPECT_EQ(r.code, 2) << sub;
        EXPECT_NE(r.err.find("Usage"), std::string::npos) << sub;
    }
    const auto r = cli("scenario --config /nonexistent/file.ini");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("does not exist"), std::string::npos);
}

TEST(Cli, NoSubcommandOrUnknownFlagIsUsageError) {
    EXPECT_EQ(cli("").code, 2);
    EXPECT_EQ(cli("regime --bogus 1").code, 2);
    EXPECT_EQ(cli("frobnicate").code, 2);
}

TEST(Cli, MalformedConfigExitsTwoWithoutCrashing) {
    const auto dir = scratch("malformed");
    const std::vector<std::string> bodies = {"not an ini file", "[scenario]\nid = nope\n", "[scenario]\nseed = x\n",
                                             "[scenario]\nid = stein_sweep\nmesh_levels = 9, 5\n"};
    for (std::size_t i = 0; i < bodies.size(); ++i) {
        const auto path = dir / ("bad" + std::to_string(i) + ".ini");
        nonunif::write_text_file(path.string(), bodies[i]);
        const auto r = cli("scenario -c '" + path.string() + "' -o '" + (dir / "out").string() + "'");
        EXPECT_EQ(r.code, 2) << bodies[i];
        EXPECT_FALSE(r.err.empty());
    }
    nonunif::write_text_file((dir / "problem.ini").string(), "[integrand]\nfamily = p_power\np = 0.5\n[problem]\n");
    EXPECT_EQ(cli("minimize -c '" + (dir / "problem.ini").string() + "'").code, 2);
}

TEST(Cli, HelpDocumentsEveryFlag) {
    const std::vector<std::pair<std::string, std::vector<std::string>>> expect = {
        {"potential", {"--config", "--out", "--kind", "--beta", "--p", "--radius", "--dim", "--measure", "--point"}},
        {"lorentz", {"--config", "--out", "--t", "--gamma"}},
        {"minimize", {"--config", "--out"}},
        {"gap", {"--config", "--out"}},
        {"regime", {"--config", "--n", "--p", "--q", "--alpha", "--family", "--bounded"}},
        {"lemma", {"--config", "--out", "--seed"}},
        {"scenario", {"--config", "--out", "--seed", "--workers"}},
        {"report", {"--config", "--out", "--seed", "--workers"}},
    };
    for (const auto& [sub, flags] : expect) {
        const auto r = cli(sub + " --help");
        EXPECT_EQ(r.code, 0) << sub;
        for (const auto& f : flags) EXPECT_NE(r.out.find(f), std::string::npos) << sub << ' ' << f;
    }
    const auto top = cli("--help");
    EXPECT_EQ(top.code, 0);
    for (const char* sub : {"potential", "lorentz", "minimize", "gap", "regime", "lemma", "scenario", "report"})
        EXPECT_NE(top.out.find(sub), std::string::npos) << sub;
}

TEST(Cli, WolffPointMassClosedForm) {
    const auto r = cli("potential --kind wolff --beta 1 --p 2 --dim 3 --radius 1 --measure '" +
                       std::string(NONUNIF_CONFIGS) + "/dirac.csv' --point 0.25,0 --point 0.5,0");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out, "x,y,potential\n0.25,0,3\n0.5,0,1\n");
    const auto c = cli("potential -c " + config("potential_wolff_dirac.ini"));
    EXPECT_EQ(c.out, r.out);
}

TEST(Cli, LorentzIndicator) {
    const auto r = cli("lorentz -c " + config("lorentz_indicator.ini"));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NEAR(std::stod(r.out), 1.0, 1e-12);
}

TEST(Cli, MinimizeWritesSummaryAndSolution) {
    const auto dir = scratch("minimize");
    const auto r = cli("minimize -c " + config("minimize_double_phase.ini") + " -o '" + dir.string() + "'");
    ASSERT_EQ(r.code, 0) << r.err;
    const auto summary = nonunif::read_text_file((dir / "run_summary.csv").string());
    EXPECT_EQ(summary.rfind("problem_id,energy,residual,iterations,grad_sup,converged\ndouble_phase_angular,", 0), 0u);
    EXPECT_TRUE(fs::exists(dir / "solution.csv"));
}

TEST(Cli, GapFlagsZhikov) {
    const auto r = cli("gap -c " + config("gap_zhikov.ini"));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find(",true,"), std::string::npos) << r.out;
}

TEST(Cli, LemmaPassesAndCountsRows) {
    const auto r = cli("lemma -c " + config("lemma_l5.ini"));
    ASSERT_EQ(r.code, 0) << r.err;
    int rows = 0;
    for (char c : r.out) rows += c == '\n';
    EXPECT_EQ(rows, 51);
}

TEST(Cli, ScenarioRerunsAreIdenticalAndHonourWorkerEnv) {
    const auto a = scratch("scn_a"), b = scratch("scn_b");
    const auto ra = cli("scenario -c " + config("scenarios/fractional_suite.ini") + " -o '" + a.string() + "'");
    const auto rb = cli("scenario -c " + config("scenarios/fractional_suite.ini") + " -o '" + b.string() + "'",
                        "NONUNIF_WORKERS=1");
    ASSERT_EQ(ra.code, 0) << ra.err;
    ASSERT_EQ(rb.code, 0) << rb.err;
    for (const char* f : {"records.csv", "plotdata_fractional_suite.csv"})
        EXPECT_EQ(nonunif::read_text_file((a / f).string()), nonunif::read_text_file((b / f).string())) << f;
}

TEST(Cli, FailingAssertionExitsOne) {
    const auto dir = scratch("failing");
    nonunif::write_text_file((dir / "s.ini").string(),
                             "[scenario]\nid = double_phase_dichotomy\nmesh_levels = 5, 9\n[parameters]\n"
                             "regular = 2:1.5:1\ncounterexample = 1.5:3.8:0.5\n");
    const auto r = cli("scenario -c '" + (dir / "s.ini").string() + "' -o '" + (dir / "out").string() + "'");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("FAILED"), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "out" / "records.csv"));
}

TEST(Cli, SeedOverrideChangesLemmaRows) {
    const auto a = cli("lemma -c " + config("lemma_l4.ini"));
    const auto b = cli("lemma -c " + config("lemma_l4.ini") + " --seed 99");
    EXPECT_EQ(a.code, 0);
    EXPECT_EQ(b.code, 0);
    EXPECT_NE(a.out, b.out);
}
