#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "smallnoise/cli.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

int run_cli(std::initializer_list<std::string> args) {
    std::vector<std::string> argv_str{"smallnoise"};
    argv_str.insert(argv_str.end(), args);
    std::vector<const char*> argv;
    for (const auto& s : argv_str) argv.push_back(s.c_str());
    return smallnoise::cli::run(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "smallnoise_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("help exits zero on the app and on every subcommand") {
    CHECK(run_cli({"--help"}) == 0);
    for (const std::string sub : {"simulate", "filter", "convergence", "forgetting",
                                  "check-assumptions", "oracle-compare"})
        CHECK(run_cli({sub, "--help"}) == 0);
}

TEST_CASE("invalid flags and values exit one") {
    CHECK(run_cli({"simulate", "--no-such-flag"}) == 1);
    CHECK(run_cli({"simulate", "--model", "unknown"}) == 1);
    CHECK(run_cli({}) == 1);  // subcommand required
}

TEST_CASE("domain validation errors exit one") {
    const auto dir = fresh_dir("validation");
    CHECK(run_cli({"--log-level", "quiet", "simulate", "--model", "sis", "--sis-beta", "-1.0",
                   "--output-dir", dir.string()}) == 1);
    CHECK(run_cli({"--log-level", "quiet", "convergence", "--model", "sis", "--output-dir",
                   dir.string()}) == 1);  // missing population grid
}

TEST_CASE("numerical failure exits two and leaves a diagnostic JSON") {
    const auto dir = fresh_dir("numfail");
    // Explosive drift with eps = 1 overflows to non-finite state.
    const int code = run_cli({"--log-level", "quiet", "simulate", "--model", "linear",
                              "--linear-a", "200.0", "--epsilon", "1.0", "--t-end", "5.0",
                              "--output-dir", dir.string()});
    CHECK(code == 2);
    REQUIRE(fs::exists(dir / "error.json"));
    const auto diag = nlohmann::json::parse(slurp(dir / "error.json"));
    CHECK(diag["schema"] == "error-v1");
    CHECK(diag["step"].get<long>() >= 1);
}

TEST_CASE("simulate twice with one seed produces identical files") {
    const auto dir = fresh_dir("determinism");
    for (const std::string name : {"a.csv", "b.csv"})
        REQUIRE(run_cli({"--log-level", "quiet", "simulate", "--model", "sis", "--t-end",
                         "0.5", "--seed", "1234", "--output-dir", dir.string(), "--out",
                         name}) == 0);
    CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
}

TEST_CASE("filter subcommand writes the run CSV and the summary JSON") {
    const auto dir = fresh_dir("filter");
    REQUIRE(run_cli({"--log-level", "quiet", "filter", "--model", "linear", "--epsilon",
                     "0.01", "--t-end", "0.5", "--seed", "3", "--q0", "1.0", "--m0-offset",
                     "0.1", "--output-dir", dir.string()}) == 0);
    const auto summary = nlohmann::json::parse(slurp(dir / "filter_summary.json"));
    CHECK(summary["schema"] == "filter-v1");
    CHECK(summary["projection_events"].get<long>() == 0);
    const std::string csv = slurp(dir / "filter_run.csv");
    CHECK(csv.rfind("t,m_1,q_11,scaled_err_norm\n", 0) == 0);
}

TEST_CASE("config file drives a run, flags override, unknown keys rejected") {
    const auto dir = fresh_dir("config");
    {
        std::ofstream cfg(dir / "run.ini");
        cfg << "schema = \"runcfg-v1\"\n\n[simulate]\nmodel = \"sis\"\nt-end = 0.5\n"
               "seed = 77\nsis-beta = 0.6\n";
    }
    REQUIRE(run_cli({"--log-level", "quiet", "simulate", "--config",
                     (dir / "run.ini").string(), "--output-dir", dir.string()}) == 0);
    const std::string base = slurp(dir / "trajectory.csv");
    // flag overrides the config horizon: shorter file
    REQUIRE(run_cli({"--log-level", "quiet", "simulate", "--config",
                     (dir / "run.ini").string(), "--t-end", "0.25", "--output-dir",
                     dir.string(), "--out", "short.csv"}) == 0);
    CHECK(slurp(dir / "short.csv").size() < base.size());
    {
        std::ofstream cfg(dir / "bad.ini");
        cfg << "[simulate]\nnot-a-key = 1\n";
    }
    CHECK(run_cli({"--log-level", "quiet", "simulate", "--config",
                   (dir / "bad.ini").string()}) == 1);
    {
        std::ofstream cfg(dir / "badschema.ini");
        cfg << "schema = \"runcfg-v0\"\n[simulate]\nt-end = 0.5\n";
    }
    CHECK(run_cli({"--log-level", "quiet", "simulate", "--config",
                   (dir / "badschema.ini").string()}) == 1);
}

TEST_CASE("check-assumptions verdicts through the CLI") {
    const auto dir = fresh_dir("assumptions");
    REQUIRE(run_cli({"--log-level", "quiet", "check-assumptions", "--model", "sis",
                     "--sis-population", "1e4", "--seed", "5", "--output-dir", dir.string()}) ==
            0);
    const auto rep = nlohmann::json::parse(slurp(dir / "assumptions.json"));
    CHECK(rep["schema"] == "diag-v1");
    CHECK(rep["verdicts"]["bounded"].get<bool>());
    CHECK(rep["verdicts"]["almost_linear"].get<bool>());
    CHECK(rep["verdicts"]["injective"].get<bool>());
    CHECK(rep["verdicts"]["elliptic"].get<bool>());

    REQUIRE(run_cli({"--log-level", "quiet", "check-assumptions", "--model", "cubic",
                     "--n-pairs", "10000", "--box-y", "1.0", "--seed", "5", "--output-dir",
                     dir.string(), "--out", "cubic.json"}) == 0);
    const auto cubic = nlohmann::json::parse(slurp(dir / "cubic.json"));
    CHECK_FALSE(cubic["verdicts"]["injective"].get<bool>());
}

TEST_CASE("oracle-compare reports small differences on the benchmark") {
    const auto dir = fresh_dir("oracle");
    REQUIRE(run_cli({"--log-level", "quiet", "oracle-compare", "--epsilon", "0.01", "--dt",
                     "0.001", "--t-end", "0.5", "--n-seeds", "5", "--seed", "11",
                     "--output-dir", dir.string()}) == 0);
    const auto rep = nlohmann::json::parse(slurp(dir / "oracle.json"));
    CHECK(rep["rms_mean_diff"].get<double>() < 5e-3);
    CHECK(rep["projection_events"].get<long>() == 0);
    CHECK(rep["config"]["epsilon"].get<double>() == 0.01);
}

TEST_CASE("no temp files survive a completed run") {
    const auto dir = fresh_dir("atomic");
    REQUIRE(run_cli({"--log-level", "quiet", "filter", "--model", "linear", "--t-end", "0.2",
                     "--output-dir", dir.string()}) == 0);
    for (const auto& entry : fs::directory_iterator(dir))
        CHECK(entry.path().extension() != ".tmp");
}

TEST_CASE("convergence study through the CLI echoes its full configuration") {
    const auto dir = fresh_dir("convergence");
    REQUIRE(run_cli({"--log-level", "quiet", "convergence", "--model", "linear", "--eps-grid",
                     "0.1", "0.01", "0.001", "--n-paths", "40", "--checkpoints", "0.5",
                     "--dt", "0.005", "--seed", "21", "--output-dir", dir.string()}) == 0);
    const auto rep = nlohmann::json::parse(slurp(dir / "report.json"));
    CHECK(rep["schema"] == "study-v1");
    CHECK(rep["kind"] == "convergence");
    CHECK(rep["status"] == "VALID");
    CHECK(rep["config"]["n_paths"].get<int>() == 40);
    CHECK(rep["config"]["dt"].get<double>() == 0.005);
    CHECK(rep["config"]["seed"].get<int>() == 21);
    CHECK(fs::exists(dir / "paths.csv"));
    const double alpha = rep["fits"][0]["alpha_hat"].get<double>();
    CHECK(alpha > 0.3);
    CHECK(alpha < 0.7);
}
