#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "pfp/cli.hpp"

using namespace pfp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("pfp_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

/// 120 noisy curves on 24 points, written as a wide CSV.
fs::path sample_csv(const fs::path& dir) {
  const FunctionalSeries s = fixtures::fourier_sample(120, 5, 24, 1);
  std::mt19937_64 rng(2);
  const DiscreteSample raw(s.grid(), s.values() + fixtures::gaussian(120, 24, rng, 0.05));
  const fs::path p = dir / "data.csv";
  write_wide_csv(p.string(), raw);
  return p;
}

fs::path quick_config(const fs::path& dir, const std::string& extra = "") {
  const fs::path p = dir / "sim.cfg";
  std::ofstream(p) << "D = 5\nJ = 16\nn = 90\nburn_in = 20\nwindow = 30\nn_train = 40\nn_test = 10\n"
                      "replications = 2\nseed = 3\nthreads = 1\np_max = 1\nd_max = 3\ndx_max = 3\ndy_max = 3\n"
                      "stationarity = redraw\nsettings = 0.8:0:sigma1\n"
                   << extra;
  return p;
}

int shell(const std::string& args) {
  const std::string cmd = std::string(PFP_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

}  // namespace

TEST(CliParse, PfpPredictExample) {
  const ParseResult r = parse_args({"pfp", "predict", "--tau", "0.5", "--select", "--in", "data.csv"});
  ASSERT_TRUE(r.config);
  EXPECT_EQ(r.config->command, Command::PfpPredict);
  EXPECT_TRUE(r.config->select);
  EXPECT_DOUBLE_EQ(r.config->tau, 0.5);
  EXPECT_EQ(r.config->in, "data.csv");
}

TEST(CliParse, MissingInputIsUsageError) {
  const ParseResult r = parse_args({"pfp", "predict", "--tau", "0.5"});
  EXPECT_FALSE(r.config);
  EXPECT_EQ(r.exit_code, kExitUsage);
}

TEST(CliParse, UsageErrors) {
  EXPECT_EQ(parse_args({"pfp", "predict", "--in", "x", "--bogus"}).exit_code, kExitUsage);
  EXPECT_EQ(parse_args({"pfp", "predict", "--in", "x", "--tau", "1.5"}).exit_code, kExitUsage);
  EXPECT_EQ(parse_args({"pfp", "predict", "--in", "x", "--tau", "1"}).exit_code, kExitUsage);
  EXPECT_EQ(parse_args({"pfp", "predict", "--in", "x", "--noisy", "--bands", "200"}).exit_code, kExitUsage);
  EXPECT_EQ(parse_args({"pfp", "predict", "--in", "x", "--bands", "50"}).exit_code, kExitUsage);
  EXPECT_EQ(parse_args({"frobnicate"}).exit_code, kExitUsage);
  EXPECT_EQ(parse_args(std::vector<std::string>{}).exit_code, kExitUsage);
  EXPECT_EQ(parse_args({"simlab", "run", "--config", "/nonexistent.cfg"}).exit_code, kExitUsage);
}

TEST(CliParse, HelpExitsCleanly) {
  const ParseResult r = parse_args({"--help"});
  EXPECT_EQ(r.exit_code, kExitOk);
  EXPECT_NE(r.message.find("simlab"), std::string::npos);
}

TEST(CliParse, SimlabSeedOverride) {
  const fs::path d = scratch("seed");
  const ParseResult r = parse_args({"simlab", "run", "--config", quick_config(d).string(), "--seed", "7"});
  ASSERT_TRUE(r.config);
  EXPECT_EQ(r.config->command, Command::SimlabRun);
  ASSERT_TRUE(r.config->sim);
  EXPECT_EQ(r.config->sim->seed, 7u);
  EXPECT_EQ(r.config->sim->replications, 2);
}

TEST(CliParse, EnvironmentOverridesConfigFile) {
  const fs::path d = scratch("env");
  ::setenv("PFP_REPLICATIONS", "5", 1);
  ::setenv("PFP_SEED", "9", 1);
  const ParseResult a = parse_args({"simlab", "run", "--config", quick_config(d).string()});
  const ParseResult b = parse_args({"simlab", "run", "--config", quick_config(d).string(), "--seed", "4"});
  ::unsetenv("PFP_REPLICATIONS");
  ::unsetenv("PFP_SEED");
  ASSERT_TRUE(a.config && b.config);
  EXPECT_EQ(a.config->sim->replications, 5);
  EXPECT_EQ(a.config->sim->seed, 9u);
  EXPECT_EQ(b.config->sim->seed, 4u);
}

TEST(CliParse, BadConfigValueIsUsageError) {
  const fs::path d = scratch("badcfg");
  EXPECT_EQ(parse_args({"simlab", "run", "--config", quick_config(d, "mode = sideways\n").string()}).exit_code,
            kExitUsage);
}

TEST(CliRun, FpcaWritesTables) {
  const fs::path d = scratch("fpca");
  const ParseResult r = parse_args({"fpca", "--in", sample_csv(d).string(), "--out", (d / "o").string(), "--components", "3"});
  ASSERT_TRUE(r.config);
  std::ostringstream out, err;
  ASSERT_EQ(run(*r.config, out, err), kExitOk) << err.str();
  EXPECT_EQ(slurp(d / "o" / "eigenfunctions.csv").substr(0, 18), "t,mean,v_1,v_2,v_3");
  EXPECT_EQ(slurp(d / "o" / "eigenvalues.csv").substr(0, 42), "component,eigenvalue,explained,cumulative\n");
  EXPECT_TRUE(fs::exists(d / "o" / "scores.csv"));
}

TEST(CliRun, FarPredictAndFfr) {
  const fs::path d = scratch("farffr");
  const std::string in = sample_csv(d).string();
  std::ostringstream out, err;
  auto r = parse_args({"far-predict", "--in", in, "--out", (d / "f").string(), "--h", "3", "--select"});
  ASSERT_TRUE(r.config);
  ASSERT_EQ(run(*r.config, out, err), kExitOk) << err.str();
  EXPECT_EQ(slurp(d / "f" / "forecast.csv").substr(0, 10), "t,h1,h2,h3");
  r = parse_args({"ffr", "--in", in, "--out", (d / "k").string(), "--tau", "0.4", "--nbasis", "7", "--select"});
  ASSERT_TRUE(r.config);
  ASSERT_EQ(run(*r.config, out, err), kExitOk) << err.str();
  EXPECT_EQ(slurp(d / "k" / "kernel.csv").substr(0, 2), "s,");
}

TEST(CliRun, PfpPredictHeldOutCurve) {
  const fs::path d = scratch("pfp");
  const auto r = parse_args({"pfp", "predict", "--in", sample_csv(d).string(), "--out", (d / "o").string(), "--tau",
                             "0.5", "--p", "1", "--d", "2", "--dx", "4", "--dy", "4", "--bands", "100", "--svg"});
  ASSERT_TRUE(r.config);
  std::ostringstream out, err;
  ASSERT_EQ(run(*r.config, out, err), kExitOk) << err.str();
  const std::string csv = slurp(d / "o" / "prediction.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,far,update,combined,lower,upper,observed");
  EXPECT_TRUE(fs::exists(d / "o" / "prediction.svg"));
  EXPECT_NE(out.str().find("held-out curve MSE"), std::string::npos);
}

TEST(CliRun, PfpPredictNoisyWithPartialFile) {
  const fs::path d = scratch("noisy");
  const std::string in = sample_csv(d).string();
  std::ofstream(d / "partial.csv") << "t_1,t_2,t_3,t_4,t_5,t_6,t_7,t_8,t_9,t_10,t_11,t_12\n"
                                      "0.1,0.2,0.1,0,-0.1,0.3,0.2,0.1,0,0.1,0.2,0.3\n";
  const auto r = parse_args({"pfp", "predict", "--in", in, "--partial", (d / "partial.csv").string(), "--out",
                             (d / "o").string(), "--noisy", "--h", "3"});
  ASSERT_TRUE(r.config);
  std::ostringstream out, err;
  ASSERT_EQ(run(*r.config, out, err), kExitOk) << err.str();
  const std::string csv = slurp(d / "o" / "prediction.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,smooth,error,combined");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

TEST(CliExit, DataErrorsExitThree) {
  const fs::path d = scratch("exit3");
  EXPECT_EQ(shell("fpca --in " + (d / "missing.csv").string() + " --out " + d.string()), 3);
  std::ofstream(d / "ragged.csv") << "t_1,t_2,t_3\n1,2,3\n1,2\n";
  EXPECT_EQ(shell("fpca --in " + (d / "ragged.csv").string() + " --out " + d.string()), 3);
  EXPECT_EQ(shell("fpca --out " + d.string()), 2);
}

TEST(CliExit, NumericalFailureExitsFour) {
  // Every operator draw is explosive and no redraw is allowed.
  const fs::path d = scratch("exit4");
  const fs::path cfg = quick_config(d, "settings = 50:0:sigma1\nmax_redraws = 0\n");
  EXPECT_EQ(shell("simlab run --config " + cfg.string() + " --out " + (d / "o").string()), 4);
}

TEST(CliExit, SimlabRerunIsByteIdentical) {
  const fs::path d = scratch("rerun");
  const fs::path cfg = quick_config(d, "settings = 0.8:0:sigma1, 0.4:0.4:sigma2\n");
  ASSERT_EQ(shell("simlab run --config " + cfg.string() + " --out " + (d / "a").string() + " --svg"), 0);
  ASSERT_EQ(shell("simlab run --config " + cfg.string() + " --out " + (d / "b").string() + " --svg --threads 2"), 0);
  for (const char* f : {"report.csv", "summary.md", "trajectories.svg"}) {
    const std::string a = slurp(d / "a" / f);
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, slurp(d / "b" / f)) << f;
  }
}

TEST(CliExit, ReportHasCoreColumns) {
  const fs::path d = scratch("columns");
  ASSERT_EQ(shell("simlab run --config " + quick_config(d).string() + " --out " + (d / "o").string()), 0);
  const std::string csv = slurp(d / "o" / "report.csv");
  const std::string header = csv.substr(0, csv.find('\n'));
  for (const char* c : {"kappa1", "kappa2", "profile", "fFPE_PFP", "PMSE_PFP", "PMSE_ts", "fFPE_r", "PMSE_r"})
    EXPECT_NE(header.find(c), std::string::npos) << c;
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
}

TEST(CliExit, ShippedConfigsParse) {
  for (const char* f : {"benchmark.cfg", "joint.cfg", "noisy.cfg", "bands.cfg", "quick.cfg"}) {
    const ParseResult r =
        parse_args({"simlab", "run", "--config", (fs::path(PFP_SOURCE_DIR) / "configs" / f).string()});
    EXPECT_TRUE(r.config) << f << ": " << r.message;
  }
}
