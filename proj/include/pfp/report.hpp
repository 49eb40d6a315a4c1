#pragma once

// Deterministic report files: CSV tables, a markdown summary and optional SVG
// plots, for simulation reports and single predictions.

#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pfp/bootstrap.hpp"
#include "pfp/config.hpp"
#include "pfp/io.hpp"
#include "pfp/pfp.hpp"
#include "pfp/simlab.hpp"

namespace pfp {

inline const std::vector<std::string>& report_fixed_columns() {
  static const std::vector<std::string> c = {"kappa1",       "kappa2",   "profile",   "tau",
                                             "replications", "failures", "explosive", "redraws"};
  return c;
}

/// One row per setting; metric columns follow the fixed ones in report order.
inline Table report_table(const EvaluationReport& rep) {
  Table t;
  t.columns = report_fixed_columns();
  if (!rep.rows.empty())
    for (const auto& m : rep.rows.front().metrics) t.columns.push_back(m.name);
  for (const auto& r : rep.rows) {
    std::vector<std::string> row = {fmt6(r.setting.kappa1), fmt6(r.setting.kappa2), to_string(r.setting.profile),
                                    fmt6(r.tau),            std::to_string(r.replications),
                                    std::to_string(r.failures), std::to_string(r.explosive),
                                    std::to_string(r.redraws)};
    for (std::size_t c = report_fixed_columns().size(); c < t.columns.size(); ++c)
      row.push_back(r.has(t.columns[c]) ? fmt6(r.get(t.columns[c])) : "nan");
    t.add(std::move(row));
  }
  return t;
}

inline std::string report_markdown(const EvaluationReport& rep, const std::string& config_text = "") {
  std::ostringstream o;
  o << "# Simulation report\n\n"
    << "- seed: " << rep.seed << "\n- replications per setting: " << rep.replications
    << "\n- selection: " << to_string(rep.mode) << "\n\n";
  const Table t = report_table(rep);
  if (rep.rows.empty()) {
    o << "No settings were run.\n";
  } else {
    for (std::size_t c = 0; c < t.columns.size(); ++c) o << "| " << t.columns[c] << ' ';
    o << "|\n";
    for (std::size_t c = 0; c < t.columns.size(); ++c) o << "|---";
    o << "|\n";
    for (const auto& r : t.rows) {
      for (const auto& cell : r) o << "| " << cell << ' ';
      o << "|\n";
    }
  }
  bool any_err = false;
  for (const auto& r : rep.rows) any_err = any_err || !r.errors.empty();
  if (any_err) {
    o << "\n## Failed replications\n\n";
    for (const auto& r : rep.rows)
      for (const auto& e : r.errors)
        o << "- " << fmt6(r.setting.kappa1) << '/' << fmt6(r.setting.kappa2) << '/' << to_string(r.setting.profile)
          << ": " << e << '\n';
  }
  if (!rep.warnings.empty()) {
    o << "\n## Warnings\n\n";
    for (const auto& w : rep.warnings) o << "- " << w << '\n';
  }
  if (!config_text.empty()) o << "\n## Configuration\n\n```\n" << config_text << "```\n";
  return o.str();
}

/// First few simulated curves of replication 0 of the first setting.
inline std::string trajectory_svg(const SimConfig& cfg, Index curves = 5) {
  const SimulatedData data = simulate_far(cfg, cfg.settings.front(), 0);
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};
  std::vector<SvgSeries> s;
  const Matrix vals = data.series.values();
  const Vector t = data.series.grid().points();
  for (Index k = 0; k < std::min(curves, vals.rows()); ++k)
    s.push_back({"curve " + std::to_string(k + 1), t, vals.row(k).transpose(), colors[k % 6], false});
  return svg_plot("Simulated FAR trajectories", s);
}

struct ReportFiles {
  std::vector<std::filesystem::path> written;
};

/// report.csv and summary.md (plus trajectories.svg when `svg_cfg` is given).
inline ReportFiles emit_report(const EvaluationReport& rep, const std::filesystem::path& dir,
                               const std::string& config_text = "", const SimConfig* svg_cfg = nullptr) {
  ensure_dir(dir);
  ReportFiles f;
  write_text(dir / "report.csv", report_table(rep).csv());
  f.written.push_back(dir / "report.csv");
  write_text(dir / "summary.md", report_markdown(rep, config_text));
  f.written.push_back(dir / "summary.md");
  if (svg_cfg) {
    write_text(dir / "trajectories.svg", trajectory_svg(*svg_cfg));
    f.written.push_back(dir / "trajectories.svg");
  }
  return f;
}

struct PredictionReport {
  PfpPrediction prediction;
  std::optional<BootstrapBands> bands;
  std::optional<Vector> observed;    ///< truth on the response grid, when known
  std::vector<std::string> notes;    ///< model description lines for the summary
};

inline Table prediction_table(const PredictionReport& r) {
  const PfpPrediction& p = r.prediction;
  Table t;
  t.columns = {"t", "far", "update", "combined"};
  if (r.bands) {
    t.columns.push_back("lower");
    t.columns.push_back("upper");
  }
  if (r.observed) t.columns.push_back("observed");
  for (Index j = 0; j < p.t.size(); ++j) {
    std::vector<std::string> row = {fmt6(p.t[j]), fmt6(p.far_part[j]), fmt6(p.residual_part[j]), fmt6(p.combined[j])};
    if (r.bands) {
      row.push_back(fmt6(r.bands->lower[j]));
      row.push_back(fmt6(r.bands->upper[j]));
    }
    if (r.observed) row.push_back(fmt6((*r.observed)[j]));
    t.add(std::move(row));
  }
  return t;
}

inline std::string prediction_svg(const PredictionReport& r) {
  const PfpPrediction& p = r.prediction;
  std::vector<SvgSeries> s = {{"FAR", p.t, p.far_part, "#7f7f7f", true}, {"PFP", p.t, p.combined, "#1f77b4", false}};
  if (r.bands) {
    s.push_back({"lower", p.t, r.bands->lower, "#aec7e8", true});
    s.push_back({"upper", p.t, r.bands->upper, "#aec7e8", true});
  }
  if (r.observed) s.push_back({"observed", p.t, *r.observed, "#d62728", false});
  return svg_plot("Partial functional prediction", s);
}

inline ReportFiles emit_report(const PredictionReport& r, const std::filesystem::path& dir, bool svg = false) {
  ensure_dir(dir);
  ReportFiles f;
  write_text(dir / "prediction.csv", prediction_table(r).csv());
  f.written.push_back(dir / "prediction.csv");
  std::ostringstream md;
  md << "# Partial functional prediction\n\n";
  for (const auto& n : r.notes) md << "- " << n << '\n';
  md << "- response points: " << r.prediction.t.size() << '\n';
  if (r.bands)
    md << "- bootstrap bands: B = " << r.bands->replicates << ", alpha = " << fmt6(r.bands->alpha)
       << ", d_e = " << r.bands->d_e << ", mean width = " << fmt6(r.bands->mean_width()) << '\n';
  if (r.observed) {
    const Vector e = *r.observed - r.prediction.combined;
    const Vector ef = *r.observed - r.prediction.far_part;
    md << "- mean squared error: PFP " << fmt6(e.squaredNorm() / static_cast<double>(e.size())) << ", FAR "
       << fmt6(ef.squaredNorm() / static_cast<double>(ef.size())) << '\n';
  }
  if (r.bands)
    for (const auto& w : r.bands->warnings) md << "- warning: " << w << '\n';
  write_text(dir / "summary.md", md.str());
  f.written.push_back(dir / "summary.md");
  if (svg) {
    write_text(dir / "prediction.svg", prediction_svg(r));
    f.written.push_back(dir / "prediction.svg");
  }
  return f;
}

}  // namespace pfp
