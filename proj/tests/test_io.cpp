#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "pfp/report.hpp"

using namespace pfp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("pfp_io_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void put(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Io, Fmt6) {
  EXPECT_EQ(fmt6(1.0 / 3.0), "0.333333");
  EXPECT_EQ(fmt6(-1e-9), "0.000000");
  EXPECT_EQ(fmt6(-0.0), "0.000000");
  EXPECT_EQ(fmt6(-2.5), "-2.500000");
  EXPECT_EQ(fmt6(std::nan("")), "nan");
}

TEST(Io, WideCsvRoundTrip) {
  const fs::path d = scratch("roundtrip");
  std::mt19937_64 rng(1);
  const DiscreteSample s(make_grid(6), fixtures::gaussian(4, 6, rng));
  write_wide_csv((d / "a.csv").string(), s);
  const DiscreteSample r = read_wide_csv((d / "a.csv").string());
  EXPECT_LT((r.values - s.values).cwiseAbs().maxCoeff(), 5e-7);
  EXPECT_LT((r.grid.points() - s.grid.points()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(slurp(d / "a.csv").substr(0, 24), "t_1,t_2,t_3,t_4,t_5,t_6\n");
}

TEST(Io, NumericHeaderIsTheGrid) {
  const fs::path d = scratch("header");
  put(d / "a.csv", "0,0.25,0.5,1\n1,2,3,4\n5,6,7,8\n");
  const DiscreteSample r = read_wide_csv((d / "a.csv").string());
  EXPECT_DOUBLE_EQ(r.grid.points()[1], 0.25);
  EXPECT_DOUBLE_EQ(r.values(1, 2), 7.0);
  EXPECT_NEAR(r.grid.weights().sum(), 1.0, 1e-15);
}

TEST(Io, GridFileOverridesHeader) {
  const fs::path d = scratch("gridfile");
  put(d / "a.csv", "t_1,t_2,t_3\n1,2,3\n");
  put(d / "g.txt", "0\n0.4\n1\n");
  EXPECT_DOUBLE_EQ(read_wide_csv((d / "a.csv").string(), (d / "g.txt").string()).grid.points()[1], 0.4);
  put(d / "g2.txt", "0, 1\n");
  EXPECT_THROW(read_wide_csv((d / "a.csv").string(), (d / "g2.txt").string()), ShapeError);
}

TEST(Io, BadInput) {
  const fs::path d = scratch("bad");
  EXPECT_THROW(read_wide_csv((d / "missing.csv").string()), IoError);
  put(d / "ragged.csv", "t_1,t_2,t_3\n1,2,3\n4,5\n");
  EXPECT_THROW(read_wide_csv((d / "ragged.csv").string()), ShapeError);
  put(d / "text.csv", "t_1,t_2\n1,abc\n");
  EXPECT_THROW(read_wide_csv((d / "text.csv").string()), InvalidArgument);
  put(d / "empty.csv", "t_1,t_2\n");
  EXPECT_THROW(read_wide_csv((d / "empty.csv").string()), InvalidArgument);
}

TEST(Io, UnwritablePath) {
  const fs::path d = scratch("unwritable");
  put(d / "file", "x");
  EXPECT_THROW(write_text(d / "file" / "sub.csv", "x"), IoError);
  EXPECT_THROW(ensure_dir(d / "file" / "sub"), IoError);
}

TEST(Io, TableRejectsRaggedRows) {
  Table t;
  t.columns = {"a", "b"};
  t.add({"1", "2"});
  EXPECT_THROW(t.add({"1"}), ShapeError);
  EXPECT_EQ(t.csv(), "a,b\n1,2\n");
}

TEST(Io, EmptyReportHasHeaderOnly) {
  const EvaluationReport rep;
  EXPECT_EQ(report_table(rep).csv(), "kappa1,kappa2,profile,tau,replications,failures,explosive,redraws\n");
  EXPECT_NE(report_markdown(rep).find("No settings"), std::string::npos);
}

TEST(Io, ReportTableFormatsRows) {
  EvaluationReport rep;
  SettingRow row;
  row.setting = {1.8, 0.0, SigmaProfile::Sigma2};
  row.replications = 3;
  row.metrics = {{"PMSE_PFP", 0.25}, {"PMSE_ts", -0.0}};
  rep.rows.push_back(row);
  EXPECT_EQ(report_table(rep).csv(),
            "kappa1,kappa2,profile,tau,replications,failures,explosive,redraws,PMSE_PFP,PMSE_ts\n"
            "1.800000,0.000000,sigma2,0.500000,3,0,0,0,0.250000,0.000000\n");
}

TEST(Io, SvgIsWellFormed) {
  const Vector x = Vector::LinSpaced(5, 0.0, 1.0);
  const std::string svg = svg_plot("t", {{"a", x, x.array().square(), "#000", false}});
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_NE(svg.find("<polyline"), std::string::npos);
}

TEST(Config, ParsesKeyValues) {
  std::istringstream in("# comment\nreplications = 7  # trailing\n\n  tau=0.4\nsettings = 1.8:0:sigma1, 0.4:0.4:sigma2\n");
  const KeyValues kv = parse_key_values(in);
  EXPECT_EQ(kv.at("replications"), "7");
  const SimConfig c = sim_config_from(kv);
  EXPECT_EQ(c.replications, 7);
  EXPECT_DOUBLE_EQ(c.tau, 0.4);
  ASSERT_EQ(c.settings.size(), 2u);
  EXPECT_EQ(c.settings[1].profile, SigmaProfile::Sigma2);
  EXPECT_DOUBLE_EQ(c.settings[1].kappa2, 0.4);
}

TEST(Config, RejectsBadInput) {
  std::istringstream noeq("replications 7\n");
  EXPECT_THROW(parse_key_values(noeq), InvalidArgument);
  EXPECT_THROW(sim_config_from({{"replicatoins", "7"}}), InvalidArgument);
  EXPECT_THROW(sim_config_from({{"replications", "seven"}}), InvalidArgument);
  EXPECT_THROW(sim_config_from({{"settings", "1.8:0"}}), InvalidArgument);
  EXPECT_THROW(sim_config_from({{"settings", "1.8:0:sigma3"}}), InvalidArgument);
  EXPECT_THROW(sim_config_from({{"noise", "maybe"}}), InvalidArgument);
  EXPECT_THROW(sim_config_from({{"n", "100"}}), InvalidArgument);  // window + split > n
  EXPECT_THROW(read_key_values("/nonexistent/pfp.cfg"), IoError);
}

TEST(Config, EnvironmentOverridesFile) {
  KeyValues kv = {{"replications", "7"}, {"seed", "3"}};
  apply_env_overrides(kv, [](const char* name) -> const char* {
    if (std::string(name) == "PFP_REPLICATIONS") return " 12 ";
    if (std::string(name) == "PFP_NOISE") return "true";
    return nullptr;
  });
  EXPECT_EQ(kv.at("replications"), "12");
  EXPECT_EQ(kv.at("seed"), "3");
  EXPECT_TRUE(sim_config_from(kv).noise);
}

TEST(Config, CanonicalRenderingRoundTrips) {
  SimConfig c;
  c.replications = 9;
  c.seed = 42;
  c.mode = SelectionMode::Joint;
  c.noise = true;
  c.settings = {{0.8, 0.0, SigmaProfile::Sigma2}, {0.0, 0.8, SigmaProfile::Sigma1}};
  c.stationarity = StationarityPolicy::Redraw;
  c.ranges.dx_max = 7;
  const std::string text = to_key_values(c);
  std::istringstream in(text);
  const SimConfig back = sim_config_from(parse_key_values(in));
  EXPECT_EQ(to_key_values(back), text);
  EXPECT_EQ(back.ranges.dx_max, 7);
  EXPECT_EQ(back.mode, SelectionMode::Joint);
}

TEST(Report, PredictionTableColumns) {
  PredictionReport r;
  r.prediction.t = Vector::LinSpaced(3, 0.6, 1.0);
  r.prediction.far_part = Vector::Ones(3);
  r.prediction.residual_part = Vector::Constant(3, 0.5);
  r.prediction.combined = Vector::Constant(3, 1.5);
  EXPECT_EQ(prediction_table(r).columns, (std::vector<std::string>{"t", "far", "update", "combined"}));
  BootstrapBands b;
  b.lower = Vector::Zero(3);
  b.upper = Vector::Constant(3, 2.0);
  r.bands = b;
  r.observed = Vector::Constant(3, 1.2);
  EXPECT_EQ(prediction_table(r).columns,
            (std::vector<std::string>{"t", "far", "update", "combined", "lower", "upper", "observed"}));
  const fs::path d = scratch("prediction");
  const ReportFiles f = emit_report(r, d, true);
  EXPECT_EQ(f.written.size(), 3u);
  EXPECT_NE(slurp(d / "summary.md").find("mean squared error"), std::string::npos);
}
