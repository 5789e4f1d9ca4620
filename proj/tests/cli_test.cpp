// End-to-end checks of the command-line tool: exit codes, output files,
// deterministic re-runs, and manifest round-trips. The binary path arrives
// via the AGORA_CLI_PATH environment variable.

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace {

using nlohmann::json;

std::string cli_path() {
  const char* p = std::getenv("AGORA_CLI_PATH");
  if (p == nullptr || *p == '\0') throw std::runtime_error("AGORA_CLI_PATH not set");
  return p;
}

std::string make_temp_dir() {
  char tmpl[] = "/tmp/agora_cli_test_XXXXXX";
  const char* d = mkdtemp(tmpl);
  if (d == nullptr) throw std::runtime_error("mkdtemp failed");
  return d;
}

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool exists(const std::string& path) { return std::ifstream(path).good(); }

RunResult run_cli(const std::string& args) {
  const std::string dir = make_temp_dir();
  const std::string cmd =
      cli_path() + " " + args + " >" + dir + "/out.txt 2>" + dir + "/err.txt";
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.code = raw < 0 ? raw : (raw >> 8) & 0xff;
  r.out = slurp(dir + "/out.txt");
  r.err = slurp(dir + "/err.txt");
  return r;
}

}  // namespace

TEST(CliNash, WritesEquilibriaCurvesAndManifest) {
  const std::string dir = make_temp_dir();
  const auto r = run_cli("nash --theta1 0.3 --pb 0.2 --out-dir " + dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("potentially_heterogeneous"), std::string::npos);
  ASSERT_TRUE(exists(dir + "/equilibria.csv"));
  ASSERT_TRUE(exists(dir + "/indifference_curves.csv"));
  ASSERT_TRUE(exists(dir + "/manifest.json"));

  const std::string csv = slurp(dir + "/equilibria.csv");
  EXPECT_NE(csv.find("0.42003"), std::string::npos) << csv;

  const json manifest = json::parse(slurp(dir + "/manifest.json"));
  EXPECT_EQ(manifest.at("subcommand"), "nash");
  EXPECT_EQ(manifest.at("config").at("params").at("theta_1").get<double>(), 0.3);
  const auto outputs = manifest.at("outputs").get<std::vector<std::string>>();
  EXPECT_EQ(outputs.size(), 2u);
}

TEST(CliErrors, BadParameterValueExitsTwo) {
  const auto r = run_cli("nash --theta1 1.5");
  EXPECT_EQ(r.code, 2);
  const json err = json::parse(r.err);
  EXPECT_EQ(err.at("error"), "config");
}

TEST(CliErrors, UnknownFlagExitsTwo) {
  const auto r = run_cli("nash --no-such-flag 1");
  EXPECT_EQ(r.code, 2);
  const json err = json::parse(r.err);
  EXPECT_EQ(err.at("error"), "usage");
}

TEST(CliErrors, MissingSubcommandExitsTwo) {
  const auto r = run_cli("");
  EXPECT_EQ(r.code, 2);
}

TEST(CliErrors, NumericalFailureExitsThree) {
  const std::string dir = make_temp_dir();
  const auto r = run_cli("critical-alphas --beta 1 --out-dir " + dir);
  EXPECT_EQ(r.code, 3);
  const json err = json::parse(r.err);
  EXPECT_EQ(err.at("error"), "numerical");
}

TEST(CliSimulate, SameSeedSameBytes) {
  const std::string args =
      "simulate --n-agents 200 --rounds 200 --stride 20 --snapshot 1 "
      "--alpha 0.075 --beta 9.0909090909090917 --r 0.01 --seed 11 --out-dir ";
  const std::string d1 = make_temp_dir(), d2 = make_temp_dir();
  ASSERT_EQ(run_cli(args + d1).code, 0);
  ASSERT_EQ(run_cli(args + d2).code, 0);
  const std::string t1 = slurp(d1 + "/trace.csv");
  ASSERT_FALSE(t1.empty());
  EXPECT_EQ(t1, slurp(d2 + "/trace.csv"));
  EXPECT_EQ(slurp(d1 + "/histograms.csv"), slurp(d2 + "/histograms.csv"));
}

TEST(CliSimulate, DifferentSeedDifferentTrace) {
  const std::string args =
      "simulate --n-agents 200 --rounds 200 --alpha 0.075 --beta 9.0909090909090917 "
      "--r 0.01 --out-dir ";
  const std::string d1 = make_temp_dir(), d2 = make_temp_dir();
  ASSERT_EQ(run_cli(args + d1 + " --seed 7").code, 0);
  ASSERT_EQ(run_cli(args + d2 + " --seed 8").code, 0);
  EXPECT_NE(slurp(d1 + "/trace.csv"), slurp(d2 + "/trace.csv"));
}

TEST(CliSimulate, ManifestRerunReproducesOutputs) {
  const std::string d1 = make_temp_dir(), d2 = make_temp_dir();
  ASSERT_EQ(run_cli("simulate --n-agents 200 --rounds 150 --stride 10 --snapshot 0.5 "
                    "--alpha 0.1 --beta 5 --r 0.01 --seed 99 --out-dir " + d1)
                .code,
            0);
  ASSERT_EQ(run_cli("simulate --config " + d1 + "/manifest.json --out-dir " + d2).code, 0);
  const std::string t1 = slurp(d1 + "/trace.csv");
  ASSERT_FALSE(t1.empty());
  EXPECT_EQ(t1, slurp(d2 + "/trace.csv"));
  EXPECT_EQ(slurp(d1 + "/histograms.csv"), slurp(d2 + "/histograms.csv"));
}

TEST(CliSimulate, MomentCheckWritesReport) {
  const std::string dir = make_temp_dir();
  const auto r = run_cli("simulate --moment-check --samples 5000 --alpha 0.05 "
                         "--beta 9.0909090909090917 --r 0.01 --seed 3 --out-dir " + dir);
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_TRUE(exists(dir + "/moment_check.json"));
  const json rep = json::parse(slurp(dir + "/moment_check.json"));
  EXPECT_EQ(rep.at("samples").get<long>(), 5000);
  EXPECT_TRUE(rep.contains("mu_z"));
  EXPECT_TRUE(rep.contains("sigma_z_max"));
}

TEST(CliSteadyState, WritesSolutionAndCurve) {
  const std::string dir = make_temp_dir();
  const auto r = run_cli("steady-state --alpha 0.075 --beta 9.0909090909090917 --r 0.01 "
                         "--out-dir " + dir);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("heterogeneous_pure"), std::string::npos);
  ASSERT_TRUE(exists(dir + "/steady_state.json"));
  ASSERT_TRUE(exists(dir + "/tilde_curve.csv"));
  const json sol = json::parse(slurp(dir + "/steady_state.json"));
  EXPECT_EQ(sol.at("kind"), "heterogeneous_pure");
  EXPECT_NEAR(sol.at("aggregates").at("pbar_1").get<double>(), 0.4208, 1e-3);
  EXPECT_EQ(sol.at("peaks").size(), 2u);
}

TEST(CliFixedPoints, WritesCsvAndJson) {
  const std::string dir = make_temp_dir();
  const auto r = run_cli("fixed-points --x 0.42 --alpha 0.075 --beta 9.0909090909090917 "
                         "--r 0.01 --out-dir " + dir);
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_TRUE(exists(dir + "/fixed_points.csv"));
  ASSERT_TRUE(exists(dir + "/fixed_points.json"));
  const json fp = json::parse(slurp(dir + "/fixed_points.json"));
  EXPECT_EQ(fp.at("points").size(), 5u);
}

TEST(CliActionPath, WritesPathWithActionComment) {
  const std::string dir = make_temp_dir();
  const auto r = run_cli("action-path --x 0.42 --from-delta -0.5 --to-delta -0.3 "
                         "--alpha 0.075 --beta 9.0909090909090917 --r 0.01 --n-steps 10 "
                         "--out-dir " + dir);
  ASSERT_EQ(r.code, 0) << r.err;
  ASSERT_TRUE(exists(dir + "/path.csv"));
  const std::string csv = slurp(dir + "/path.csv");
  EXPECT_NE(csv.find("action"), std::string::npos);
  EXPECT_NE(csv.find("t,A1,A2"), std::string::npos);
}

TEST(CliConfigFile, FlagsOverrideConfig) {
  const std::string dir = make_temp_dir();
  {
    std::ofstream cfg(dir + "/cfg.json");
    cfg << R"({"params": {"theta_1": 0.5, "theta_2": 0.5, "pb_1": 0.3, "pb_2": 0.7}})";
  }
  const auto r = run_cli("nash --config " + dir + "/cfg.json --pb 0.2 --theta1 0.3 "
                         "--out-dir " + dir);
  ASSERT_EQ(r.code, 0) << r.err;
  const json manifest = json::parse(slurp(dir + "/manifest.json"));
  EXPECT_EQ(manifest.at("config").at("params").at("pb_1").get<double>(), 0.2);
  EXPECT_EQ(manifest.at("config").at("params").at("theta_1").get<double>(), 0.3);
  EXPECT_EQ(manifest.at("config").at("params").at("theta_2").get<double>(), 0.7);
}
