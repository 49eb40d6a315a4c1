#pragma once

// Command-line front end: argument parsing into a RunConfig and the
// subcommand drivers. Exit codes: 0 success, 2 usage, 3 data, 4 numerical.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pfp/bootstrap.hpp"
#include "pfp/config.hpp"
#include "pfp/io.hpp"
#include "pfp/pfp.hpp"
#include "pfp/report.hpp"
#include "pfp/simlab.hpp"

namespace pfp {

enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitData = 3, kExitNumerical = 4 };

enum class Command { Fpca, FarPredict, Ffr, PfpPredict, SimlabRun };

struct RunConfig {
  Command command = Command::Fpca;
  std::string in, grid, partial, config;
  std::string out = ".";
  std::string basis = "fourier";
  Index nbasis = 0;  ///< 0: 15 for Fourier, 10 for B-splines, capped by J
  Index p = 1, d = 3, dx = 3, dy = 3;
  double tau = 0.5;
  Index window = 0;  ///< 0: all curves (far-predict) or half of them (pfp predict)
  Index h = 1;
  Index bands = 0;
  double alpha = 0.05;
  double var_threshold = 0.80;
  bool select = false;
  bool noisy = false;
  bool svg = false;
  Index components = 0;  ///< 0: all
  Index p_max = 2, d_max = 0, dx_max = 0, dy_max = 0;  ///< 0: default_dim_cap
  std::uint64_t seed = 1;
  bool seed_given = false;
  unsigned threads = 1;
  std::optional<SimConfig> sim;
};

struct ParseResult {
  std::optional<RunConfig> config;
  int exit_code = kExitOk;
  std::string message;
};

namespace detail {

inline void add_input(CLI::App* c, RunConfig& rc) {
  c->add_option("--in", rc.in, "wide CSV of curves, one row per curve")->required();
  c->add_option("--grid", rc.grid, "file with the J grid points");
  c->add_option("--basis", rc.basis, "fourier | bspline | nodal")
      ->check(CLI::IsMember({"fourier", "bspline", "nodal"}));
  c->add_option("--nbasis", rc.nbasis, "basis dimension")->check(CLI::NonNegativeNumber);
  c->add_option("--out", rc.out, "output directory");
}

}  // namespace detail

/// Parses argv. On success `config` holds a validated RunConfig; otherwise
/// `exit_code` is 2 (0 for --help) and `message` the usage text or error.
inline ParseResult parse_args(int argc, const char* const* argv) {
  RunConfig rc;
  CLI::App app{"Partial functional prediction of functional time series", "pfp"};
  app.set_help_flag("--help", "print this help message and exit");  // -h is the horizon
  app.require_subcommand(1);

  auto* fp = app.add_subcommand("fpca", "functional principal components of a curve sample");
  detail::add_input(fp, rc);
  fp->add_option("--components", rc.components, "eigenfunctions to write (0: all)")->check(CLI::NonNegativeNumber);

  auto* fr = app.add_subcommand("far-predict", "FAR(p) forecast of the next curves");
  detail::add_input(fr, rc);
  fr->add_option("--p", rc.p, "VAR order")->check(CLI::Range(0, 20));
  fr->add_option("--d", rc.d, "principal components")->check(CLI::Range(1, 1000));
  fr->add_option("--h", rc.h, "forecast horizon in curves")->check(CLI::Range(1, 1000));
  fr->add_option("--window", rc.window, "most recent curves to fit on (0: all)")->check(CLI::NonNegativeNumber);
  fr->add_flag("--select", rc.select, "choose (p, d) by fFPE");
  fr->add_option("--p-max", rc.p_max, "largest p searched")->check(CLI::Range(0, 20));
  fr->add_option("--d-max", rc.d_max, "largest d searched")->check(CLI::NonNegativeNumber);

  auto* ff = app.add_subcommand("ffr", "function-on-function regression of (tau,1] on [0,tau]");
  detail::add_input(ff, rc);
  ff->add_option("--tau", rc.tau, "split point")->check(CLI::Range(0.0, 1.0));
  ff->add_option("--dx", rc.dx, "predictor components")->check(CLI::Range(1, 1000));
  ff->add_option("--dy", rc.dy, "response components")->check(CLI::Range(1, 1000));
  ff->add_flag("--select", rc.select, "choose (dx, dy) by fFPE");
  ff->add_option("--dx-max", rc.dx_max, "largest dx searched")->check(CLI::NonNegativeNumber);
  ff->add_option("--dy-max", rc.dy_max, "largest dy searched")->check(CLI::NonNegativeNumber);

  auto* pf = app.add_subcommand("pfp", "partial functional prediction");
  pf->require_subcommand(1);
  auto* pp = pf->add_subcommand("predict", "update the forecast of the next curve from its partial observation");
  detail::add_input(pp, rc);
  pp->add_option("--partial", rc.partial, "CSV whose first row is the partial curve (default: hold out the last curve)");
  pp->add_option("--tau", rc.tau, "observed fraction of the day")->check(CLI::Range(0.0, 1.0));
  pp->add_option("--p", rc.p, "VAR order")->check(CLI::Range(0, 20));
  pp->add_option("--d", rc.d, "principal components")->check(CLI::Range(1, 1000));
  pp->add_option("--dx", rc.dx, "predictor components")->check(CLI::Range(1, 1000));
  pp->add_option("--dy", rc.dy, "response components")->check(CLI::Range(1, 1000));
  pp->add_option("--window", rc.window, "sliding window length n1 (0: half the curves)")->check(CLI::NonNegativeNumber);
  pp->add_flag("--select", rc.select, "choose (p, d, dx, dy) jointly by fFPE");
  pp->add_option("--p-max", rc.p_max, "largest p searched")->check(CLI::Range(0, 20));
  pp->add_option("--d-max", rc.d_max, "largest d searched")->check(CLI::NonNegativeNumber);
  pp->add_option("--dx-max", rc.dx_max, "largest dx searched")->check(CLI::NonNegativeNumber);
  pp->add_option("--dy-max", rc.dy_max, "largest dy searched")->check(CLI::NonNegativeNumber);
  pp->add_flag("--noisy", rc.noisy, "add an AR forecast of the pre-smoothing error");
  pp->add_option("--h", rc.h, "grid points after tau to predict in noisy mode")->check(CLI::Range(1, 100000));
  pp->add_option("--bands", rc.bands, "bootstrap replicates for prediction bands (0: none)")
      ->check(CLI::NonNegativeNumber);
  pp->add_option("--alpha", rc.alpha, "band level is 1 - alpha")->check(CLI::Range(0.0, 1.0));
  pp->add_option("--var-threshold", rc.var_threshold, "variance share of bootstrapped components")
      ->check(CLI::Range(0.0, 1.0));
  pp->add_option("--seed", rc.seed, "bootstrap seed");
  pp->add_option("--threads", rc.threads, "bootstrap threads")->check(CLI::Range(1, 1024));
  pp->add_flag("--svg", rc.svg, "also write prediction.svg");

  auto* sl = app.add_subcommand("simlab", "simulation protocols");
  sl->require_subcommand(1);
  auto* sr = sl->add_subcommand("run", "run a simulation configuration");
  sr->add_option("--config", rc.config, "key = value configuration file")->required();
  sr->add_option("--out", rc.out, "output directory");
  sr->add_option("--seed", rc.seed, "master seed (overrides the file)");
  sr->add_option("--threads", rc.threads, "worker threads (overrides the file)")->check(CLI::Range(0, 1024));
  sr->add_flag("--svg", rc.svg, "also write trajectories.svg");

  ParseResult res;
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream out, err;
    res.exit_code = app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
    res.message = out.str() + err.str();
    return res;
  }

  auto usage = [&](const std::string& msg) {
    res.exit_code = kExitUsage;
    res.message = "error: " + msg + "\nRun with --help for more information.\n";
    return res;
  };
  if (fp->parsed()) rc.command = Command::Fpca;
  else if (fr->parsed()) rc.command = Command::FarPredict;
  else if (ff->parsed()) rc.command = Command::Ffr;
  else if (pp->parsed()) rc.command = Command::PfpPredict;
  else rc.command = Command::SimlabRun;

  if ((ff->parsed() || pp->parsed()) && !(rc.tau > 0.0 && rc.tau < 1.0)) return usage("--tau must lie in (0, 1)");
  if (pp->parsed()) {
    if (rc.noisy && rc.bands > 0) return usage("--bands cannot be combined with --noisy");
    if (rc.bands > 0 && rc.bands < 100) return usage("--bands needs at least 100 replicates");
    if (!(rc.alpha > 0.0 && rc.alpha < 1.0)) return usage("--alpha must lie in (0, 1)");
    if (!(rc.var_threshold > 0.0)) return usage("--var-threshold must lie in (0, 1]");
  }
  if (rc.command == Command::SimlabRun) {
    rc.seed_given = sr->count("--seed") > 0;
    try {
      KeyValues kv = read_key_values(rc.config);
      apply_env_overrides(kv);
      if (rc.seed_given) kv["seed"] = std::to_string(rc.seed);
      if (sr->count("--threads") > 0) kv["threads"] = std::to_string(rc.threads);
      rc.sim = sim_config_from(kv);
      rc.seed = rc.sim->seed;
    } catch (const Error& e) {
      return usage(e.what());
    }
  }
  res.config = std::move(rc);
  return res;
}

inline ParseResult parse_args(const std::vector<std::string>& args) {
  std::vector<const char*> argv = {"pfp"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return parse_args(static_cast<int>(argv.size()), argv.data());
}

namespace detail {

inline BasisPtr make_basis(const RunConfig& rc, const Grid& grid) {
  if (rc.basis == "nodal") return nodal_basis(grid);
  if (rc.basis == "bspline") return bspline_basis(grid, rc.nbasis > 0 ? rc.nbasis : std::min<Index>(10, grid.size()));
  return fourier_basis(grid, rc.nbasis > 0 ? rc.nbasis : std::min<Index>(15, grid.size()));
}

inline Index cap_or(Index v, Index dflt) { return v > 0 ? v : dflt; }

inline int run_fpca(const RunConfig& rc, std::ostream& out) {
  const DiscreteSample raw = read_wide_csv(rc.in, rc.grid);
  const SmoothResult sm = smooth(raw, make_basis(rc, raw.grid));
  const EigenSystem es = fpca(sm.series);
  const Index k = rc.components > 0 ? std::min(rc.components, es.dim()) : es.dim();
  const std::filesystem::path dir(rc.out);
  ensure_dir(dir);

  Table ev;
  ev.columns = {"component", "eigenvalue", "explained", "cumulative"};
  const Vector ratio = es.explained_ratio();
  double cum = 0.0;
  for (Index j = 0; j < es.dim(); ++j) {
    cum += ratio[j];
    ev.add({std::to_string(j + 1), fmt6(es.eigenvalues[j]), fmt6(ratio[j]), fmt6(cum)});
  }
  write_text(dir / "eigenvalues.csv", ev.csv());

  Table ef;
  ef.columns = {"t", "mean"};
  for (Index j = 0; j < k; ++j) ef.columns.push_back("v_" + std::to_string(j + 1));
  const Matrix phi = es.eigenfunction_values();
  const Vector mu = es.mean_values();
  for (Index i = 0; i < raw.grid.size(); ++i) {
    std::vector<std::string> row = {fmt6(raw.grid.points()[i]), fmt6(mu[i])};
    for (Index j = 0; j < k; ++j) row.push_back(fmt6(phi(i, j)));
    ef.add(std::move(row));
  }
  write_text(dir / "eigenfunctions.csv", ef.csv());

  Table sc;
  sc.columns = {"curve"};
  for (Index j = 0; j < k; ++j) sc.columns.push_back("score_" + std::to_string(j + 1));
  for (Index c = 0; c < es.size(); ++c) {
    std::vector<std::string> row = {std::to_string(c + 1)};
    for (Index j = 0; j < k; ++j) row.push_back(fmt6(es.scores(c, j)));
    sc.add(std::move(row));
  }
  write_text(dir / "scores.csv", sc.csv());

  out << "curves " << raw.size() << ", grid " << raw.grid.size() << ", basis " << rc.basis << " ("
      << sm.series.dim() << ")\n";
  out << "components for 80% / 90% / 95% variance: " << es.components_for(0.8) << " / " << es.components_for(0.9)
      << " / " << es.components_for(0.95) << '\n';
  return kExitOk;
}

inline int run_far_predict(RunConfig rc, std::ostream& out) {
  const DiscreteSample raw = read_wide_csv(rc.in, rc.grid);
  const SmoothResult sm = smooth(raw, make_basis(rc, raw.grid));
  const Index n = sm.series.size();
  const Index w = rc.window > 0 ? rc.window : n;
  if (w > n) throw InvalidArgument("window exceeds the number of curves");
  const FunctionalSeries hist = sm.series.slice(n - w, w);
  if (rc.select) {
    const FarSelection sel = select_far(hist, rc.p_max, cap_or(rc.d_max, default_dim_cap(hist.dim(), w)));
    rc.p = sel.spec.p;
    rc.d = sel.spec.d;
  }
  const FarModel m = fit_far(hist, rc.p, rc.d);
  const std::filesystem::path dir(rc.out);
  ensure_dir(dir);
  Table t;
  t.columns = {"t"};
  Matrix fc(raw.grid.size(), rc.h);
  for (Index s = 1; s <= rc.h; ++s) {
    t.columns.push_back("h" + std::to_string(s));
    fc.col(s - 1) = hist.basis().eval * predict_curve(m, hist, s);
  }
  for (Index i = 0; i < raw.grid.size(); ++i) {
    std::vector<std::string> row = {fmt6(raw.grid.points()[i])};
    for (Index s = 0; s < rc.h; ++s) row.push_back(fmt6(fc(i, s)));
    t.add(std::move(row));
  }
  write_text(dir / "forecast.csv", t.csv());
  out << "FAR(" << m.p << ") on " << m.d << " components, window " << w << ", fFPE " << fmt6(ffpe_ts(m))
      << ", companion radius " << fmt6(m.spectral_radius) << '\n';
  for (const auto& wmsg : m.warnings) out << "warning: " << wmsg << '\n';
  return kExitOk;
}

inline int run_ffr(RunConfig rc, std::ostream& out) {
  const DiscreteSample raw = read_wide_csv(rc.in, rc.grid);
  const SmoothResult sm = smooth(raw, make_basis(rc, raw.grid));
  const auto [X, Y] = split_at(sm.series, rc.tau);
  const EigenSystem xes = fpca(X), yes = fpca(Y);
  if (rc.select) {
    const Index n = sm.series.size();
    const FfrSelection sel = select_dims(xes, yes, cap_or(rc.dx_max, default_dim_cap(X.dim(), n)),
                                         cap_or(rc.dy_max, default_dim_cap(Y.dim(), n)));
    rc.dx = sel.dx;
    rc.dy = sel.dy;
  }
  const FfrModel m = fit_ffr(xes, yes, rc.dx, rc.dy);
  const KernelSurface k = kernel_surface(m);
  const std::filesystem::path dir(rc.out);
  ensure_dir(dir);
  Table t;
  t.columns = {"s"};
  for (Index j = 0; j < k.t.size(); ++j) t.columns.push_back(fmt6(k.t[j]));
  for (Index i = 0; i < k.s.size(); ++i) {
    std::vector<std::string> row = {fmt6(k.s[i])};
    for (Index j = 0; j < k.t.size(); ++j) row.push_back(fmt6(k.values(i, j)));
    t.add(std::move(row));
  }
  write_text(dir / "kernel.csv", t.csv());
  out << "regression at tau " << fmt6(rc.tau) << ": dx " << m.dx << ", dy " << m.dy << ", fFPE " << fmt6(ffpe_r(m))
      << '\n';
  return kExitOk;
}

inline int run_pfp_predict(RunConfig rc, std::ostream& out) {
  const DiscreteSample all = read_wide_csv(rc.in, rc.grid);
  const Grid& g = all.grid;
  const auto head = g.indices_in(predictor_domain(rc.tau));
  const auto tail = g.indices_in(response_domain(rc.tau));
  if (head.empty() || tail.empty()) throw InvalidArgument("tau leaves no grid points on one side");

  DiscreteSample raw = all;
  Vector partial(static_cast<Index>(head.size()));
  std::optional<Vector> observed;
  if (rc.partial.empty()) {
    if (all.size() < 3) throw InvalidArgument("need at least three curves to hold one out");
    const Vector last = all.values.row(all.size() - 1).transpose();
    for (std::size_t i = 0; i < head.size(); ++i) partial[static_cast<Index>(i)] = last[head[i]];
    Vector obs(static_cast<Index>(tail.size()));
    for (std::size_t i = 0; i < tail.size(); ++i) obs[static_cast<Index>(i)] = last[tail[i]];
    observed = obs;
    raw = DiscreteSample(g, all.values.topRows(all.size() - 1));
  } else {
    std::ifstream pin(rc.partial);
    if (!pin) throw IoError("cannot open " + rc.partial);
    std::string header, line;
    std::getline(pin, header);
    while (std::getline(pin, line) && detail::trim(line).empty()) {
    }
    const auto cells = split(line, ',');
    std::vector<double> v;
    for (const auto& c : cells)
      if (!c.empty()) v.push_back(require_double(c, rc.partial));
    if (v.size() == static_cast<std::size_t>(g.size()) || v.size() == head.size()) {
      for (std::size_t i = 0; i < head.size(); ++i)
        partial[static_cast<Index>(i)] = v.size() == head.size() ? v[i] : v[static_cast<std::size_t>(head[i])];
    } else {
      throw ShapeError("partial curve has " + std::to_string(v.size()) + " values; expected " +
                       std::to_string(head.size()) + " or " + std::to_string(g.size()));
    }
  }
  if (!partial.allFinite()) throw InvalidArgument("partial curve contains non-finite values");

  const BasisPtr basis = make_basis(rc, g);
  const SmoothResult sm = smooth(raw, basis);
  const Index n = sm.series.size();
  const Index w = rc.window > 0 ? rc.window : n / 2;
  if (w < 2 || w >= n) throw InvalidArgument("window must lie in [2, number of curves)");

  PfpConfig pc{rc.tau, rc.p, rc.d, rc.dx, rc.dy, w};
  std::vector<std::string> notes;
  if (rc.select) {
    JointRanges r;
    r.p_min = 0;
    r.p_max = rc.p_max;
    r.d_min = 1;
    r.d_max = cap_or(rc.d_max, default_dim_cap(sm.series.dim(), w));
    r.dx_max = cap_or(rc.dx_max, default_dim_cap(sm.series.dim(), n - w));
    r.dy_max = cap_or(rc.dy_max, default_dim_cap(sm.series.dim(), n - w));
    const JointSelection sel = pfp_select_raw(raw, basis, rc.tau, r, w);
    pc.p = sel.p;
    pc.d = sel.d;
    pc.dx = sel.dx;
    pc.dy = sel.dy;
    notes.push_back("joint fFPE selection: " + fmt6(sel.value));
  }
  notes.push_back("p = " + std::to_string(pc.p) + ", d = " + std::to_string(pc.d) + ", dx = " + std::to_string(pc.dx) +
                  ", dy = " + std::to_string(pc.dy) + ", window = " + std::to_string(w) + ", tau = " + fmt6(rc.tau));
  const std::filesystem::path dir(rc.out);

  if (rc.noisy) {
    const PfpModel m = pfp_fit_noisy(raw, basis, pc, 5);
    const NoisyPrediction np = pfp_predict_noisy(m, raw, partial, rc.h);
    ensure_dir(dir);
    Table t;
    t.columns = {"t", "smooth", "error", "combined"};
    if (observed) t.columns.push_back("observed");
    for (Index j = 0; j < np.t.size(); ++j) {
      std::vector<std::string> row = {fmt6(np.t[j]), fmt6(np.smooth[j]), fmt6(np.error[j]), fmt6(np.combined[j])};
      if (observed) row.push_back(fmt6((*observed)[j]));
      t.add(std::move(row));
    }
    write_text(dir / "prediction.csv", t.csv());
    out << notes.back() << "\nerror model AR(" << m.error_model->order << "), horizon " << rc.h << '\n';
    return kExitOk;
  }

  const PfpModel m = pfp_fit_raw(raw, basis, pc);
  PredictionReport rep;
  rep.prediction = pfp_predict_raw(m, raw, partial);
  rep.observed = observed;
  rep.notes = notes;
  rep.notes.push_back("residual regression fFPE: " + fmt6(ffpe_r(m.residual_ffr)));
  if (rc.bands > 0) {
    BootstrapOptions bo;
    bo.replicates = rc.bands;
    bo.alpha = rc.alpha;
    bo.var_threshold = rc.var_threshold;
    bo.seed = rc.seed;
    bo.threads = rc.threads;
    rep.bands = bootstrap_bands(m, rep.prediction, bo);
  }
  emit_report(rep, dir, rc.svg);
  for (const auto& n1 : rep.notes) out << n1 << '\n';
  if (observed) {
    const Vector e = *observed - rep.prediction.combined;
    out << "held-out curve MSE on (tau,1]: " << fmt6(e.squaredNorm() / static_cast<double>(e.size())) << '\n';
  }
  return kExitOk;
}

inline int run_simlab(const RunConfig& rc, std::ostream& out) {
  const SimConfig& cfg = *rc.sim;
  const EvaluationReport rep = run_protocol(cfg);
  emit_report(rep, rc.out, to_key_values(cfg), rc.svg ? &cfg : nullptr);
  out << report_table(rep).csv();
  for (const auto& w : rep.warnings) out << "warning: " << w << '\n';
  Index ok = 0;
  for (const auto& r : rep.rows) ok += r.replications;
  return ok > 0 ? kExitOk : kExitNumerical;
}

}  // namespace detail

/// Runs a parsed configuration; library errors map to exit codes 3 and 4.
inline int run(const RunConfig& rc, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    switch (rc.command) {
      case Command::Fpca: return detail::run_fpca(rc, out);
      case Command::FarPredict: return detail::run_far_predict(rc, out);
      case Command::Ffr: return detail::run_ffr(rc, out);
      case Command::PfpPredict: return detail::run_pfp_predict(rc, out);
      case Command::SimlabRun: return detail::run_simlab(rc, out);
    }
  } catch (const IoError& e) {
    err << e.what() << '\n';
    return kExitData;
  } catch (const NumericalError& e) {
    err << e.what() << '\n';
    return kExitNumerical;
  } catch (const StateError& e) {
    err << e.what() << '\n';
    return kExitNumerical;
  } catch (const Error& e) {
    err << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitUsage;
}

inline int main_entry(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  const ParseResult pr = parse_args(argc, argv);
  if (!pr.config) {
    (pr.exit_code == kExitOk ? out : err) << pr.message;
    return pr.exit_code;
  }
  return run(*pr.config, out, err);
}

}  // namespace pfp
