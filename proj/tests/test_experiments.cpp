#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "tikreg/experiments.hpp"

using namespace tikreg;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("tikreg_exp_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

struct RunResult {
    int code;
    std::string out;
};

RunResult run_cli(const std::string& args) {
    const std::string cmd = std::string(TIKREG_CLI_PATH) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return {-1, ""};
    std::string out;
    char buf[4096];
    while (const std::size_t n = fread(buf, 1, sizeof(buf), pipe)) out.append(buf, n);
    const int status = pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

ExperimentConfig small_sweep() {
    ExperimentConfig c = default_config(2);
    c.n = 32;
    c.delta_count = 3;
    c.delta_min = 1e-3;
    c.delta_max = 1e-1;
    c.count = 20;
    return c;
}

} // namespace

TEST(Config, DefaultsValidate) {
    for (int id = 0; id <= 4; ++id) EXPECT_NO_THROW(validate(default_config(id)));
    EXPECT_EQ(default_config(4).problem, "blur");
    EXPECT_EQ(default_config(3).alpha_policy, AlphaPolicy::delta_scaled);
}

TEST(Config, ValidationNamesTheField) {
    auto expect_field = [](ExperimentConfig c, const std::string& field) {
        try {
            validate(c);
            ADD_FAILURE() << "no error for " << field;
        } catch (const ConfigError& e) {
            EXPECT_NE(std::string(e.what()).find("'" + field + "'"), std::string::npos) << e.what();
        }
    };
    auto c = default_config(1);
    c.q = 1.0;
    expect_field(c, "q");
    c = default_config(1);
    c.n = 100;
    expect_field(c, "n");
    c = default_config(1);
    c.tau = 0.5;
    expect_field(c, "tau");
    c = default_config(4);
    c.band = 0;
    expect_field(c, "band");
    c = default_config(1);
    c.k0 = c.count;
    expect_field(c, "k0");
}

TEST(Config, JsonRoundTripAndStrictKeys) {
    const auto c = default_config(3);
    ExperimentConfig base;
    base.experiment = 3;
    const auto back = apply_json(base, nlohmann::json::parse(to_json(c).dump()));
    EXPECT_EQ(to_json(back).dump(), to_json(c).dump());
    EXPECT_THROW(apply_json(default_config(2), nlohmann::json::parse(to_json(c).dump())), ConfigError);
    EXPECT_THROW(apply_json(c, nlohmann::json::parse(R"({"qq": 0.5})")), ConfigError);
    EXPECT_THROW(apply_json(c, nlohmann::json::parse(R"({"q": "half"})")), ConfigError);
    EXPECT_THROW(apply_json(c, nlohmann::json::parse(R"({"alpha_policy": "magic"})")), ConfigError);
    EXPECT_THROW(apply_json(c, nlohmann::json::parse("[1]")), ConfigError);
}

TEST(Config, DeltaLevelsAreGeometric) {
    auto c = default_config(2);
    const auto d = delta_levels(c);
    ASSERT_EQ(d.size(), 12u);
    EXPECT_EQ(d.front(), c.delta_min);
    EXPECT_EQ(d.back(), c.delta_max);
    for (std::size_t i = 2; i < d.size(); ++i) EXPECT_NEAR(d[i] / d[i - 1], d[1] / d[0], 1e-12);
}

TEST(Config, GridStartPolicies) {
    auto c = default_config(3);
    EXPECT_EQ(grid_for(c, 0.2, 1e-4).alpha0, 100 * 1e-4);
    EXPECT_NEAR(grid_for(c, 0.2, 0.1).alpha0, 0.04, 1e-15);  // capped at ||K||^2
    EXPECT_THROW(grid_for(c, 0.2, 0.0), ConfigError);
    c = default_config(1);
    const auto g = grid_for(c, 0.2, 0.02);
    EXPECT_EQ(g.alpha0, 1.0);
    EXPECT_NEAR(g.alpha0 * std::pow(g.q, 40), 1e-4, 1e-15);
    EXPECT_NEAR(grid_for(default_config(2), 0.2, 0.02).alpha0, 0.04, 1e-15);
}

TEST(Experiment1, SmallRunHasNoViolations) {
    auto c = default_config(1);
    c.n = 64;
    c.count = 25;
    const auto r = run_experiment1(c);
    EXPECT_EQ(r.report.rows.size(), 25u);
    EXPECT_TRUE(r.violations.empty());
    c.out = scratch("exp1").string();
    write_experiment1(c, r);
    for (const char* f : {"total_error.dat", "phi.dat", "error_report.csv", "violations.csv", "summary.json"})
        EXPECT_TRUE(fs::exists(fs::path(c.out) / f)) << f;
}

TEST(Sweep, ThreadCountDoesNotChangeResults) {
    auto c = small_sweep();
    const auto a = run_sweep(c, Rule::hanke_raus);
    c.threads = 3;
    const auto b = run_sweep(c, Rule::hanke_raus);
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        EXPECT_EQ(a.rows[i].seed, c.seed + i);
        EXPECT_EQ(a.rows[i].rule.alpha_selected, b.rows[i].rule.alpha_selected);
        EXPECT_EQ(a.rows[i].rule_error, b.rows[i].rule_error);
        EXPECT_EQ(a.rows[i].oracle_error, b.rows[i].oracle_error);
    }
}

TEST(Cli, ExitCodes) {
    const fs::path dir = scratch("codes");
    EXPECT_EQ(run_cli("--help").code, 0);
    EXPECT_EQ(run_cli("").code, 2);
    EXPECT_EQ(run_cli("frobnicate").code, 2);
    EXPECT_EQ(run_cli("experiment1 --set q=2").code, 2);
    EXPECT_EQ(run_cli("experiment1 --set nonsense=1").code, 2);
    EXPECT_EQ(run_cli("--config /nonexistent/file.json experiment1").code, 2);
    EXPECT_EQ(run_cli("select " + (dir / "missing").string() + " --rule hanke_raus").code, 2);

    const fs::path prob = dir / "prob";
    ASSERT_EQ(run_cli("synthesize --out " + prob.string() + " --set n=32 --delta 0.01").code, 0);
    EXPECT_TRUE(fs::exists(prob / "manifest.json"));
    EXPECT_EQ(run_cli("select " + prob.string() + " --rule not_a_rule").code, 2);
    // tau * delta above every reachable residual
    EXPECT_EQ(run_cli("select " + prob.string() + " --rule discrepancy --tau 1e6 --count 10").code, 1);
}

TEST(Cli, SelectPrintsCsvAndSolvePathWritesFiles) {
    const fs::path dir = scratch("select");
    const fs::path prob = dir / "prob";
    ASSERT_EQ(run_cli("--seed 3 synthesize --out " + prob.string() + " --set n=32").code, 0);
    const auto r = run_cli("select " + prob.string() + " --rule hanke_raus --q 0.7 --count 15");
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(r.out.rfind("q,count,alpha0,rule,alpha,index,criterion,delta_star,warnings\n0.69999999999999996,15,", 0),
              0u)
        << r.out;

    const auto inst = load_problem(prob);
    EXPECT_EQ(inst.seed, 3u);
    auto c = default_config(0);
    c.q = 0.7;
    c.count = 15;
    const auto direct = select_on_problem(c, inst, Rule::hanke_raus);
    EXPECT_NE(r.out.find(",hanke_raus," + format_double(direct.selection.alpha_selected) + ","), std::string::npos);

    const fs::path out = dir / "path";
    ASSERT_EQ(run_cli("--out " + out.string() + " solve-path " + prob.string() + " --count 12").code, 0);
    const std::string csv = read_text(out / "path.csv");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 13);
    EXPECT_TRUE(fs::exists(out / "phi.dat"));

    const fs::path rep = dir / "report";
    EXPECT_EQ(run_cli("--out " + rep.string() + " report " + prob.string() + " --count 12").code, 0);
    EXPECT_TRUE(fs::exists(rep / "error_report.csv"));
}

TEST(Cli, RerunsAreByteIdentical) {
    const fs::path dir = scratch("rerun");
    const std::string common = "--set n=32 --set delta_count=3 --set count=15 experiment2";
    ASSERT_EQ(run_cli("--out " + (dir / "a").string() + " --threads 1 " + common).code, 0);
    ASSERT_EQ(run_cli("--out " + (dir / "b").string() + " --threads 2 " + common).code, 0);
    for (const char* f : {"sweep.csv", "alpha_hanke_raus.dat", "error_hanke_raus.dat", "error_oracle_bregman.dat"})
        EXPECT_EQ(read_text(dir / "a" / f), read_text(dir / "b" / f)) << f;
}
