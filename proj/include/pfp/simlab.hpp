#pragma once

/// @file simlab.hpp
/// Simulation laboratory: FAR(2) curve generation in a Fourier space, AR(1)
/// measurement error, prediction error metrics and the sliding-window
/// evaluation protocol behind the benchmark tables.
///
/// Per replication: generate n curves (after burn-in), compute one-step FAR
/// residuals for the last n - window curves from a sliding window, train the
/// residual regression on the first n_train of them and evaluate the last
/// n_test targets for PFP, FAR only, regression only and the moving block.

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "pfp/arma.hpp"
#include "pfp/bootstrap.hpp"
#include "pfp/parallel.hpp"
#include "pfp/pfp.hpp"
#include "pfp/rng.hpp"

namespace pfp {

enum class SigmaProfile { Sigma1, Sigma2 };

inline std::string to_string(SigmaProfile p) { return p == SigmaProfile::Sigma1 ? "sigma1" : "sigma2"; }

inline SigmaProfile parse_profile(const std::string& s) {
  if (s == "sigma1" || s == "1") return SigmaProfile::Sigma1;
  if (s == "sigma2" || s == "2") return SigmaProfile::Sigma2;
  throw InvalidArgument("unknown sigma profile: " + s);
}

/// sigma_j = 1/j (sigma1) or 1.2^-j (sigma2), j = 1..D.
inline Vector sigma_profile(SigmaProfile p, Index D) {
  Vector s(D);
  for (Index j = 1; j <= D; ++j)
    s[j - 1] = p == SigmaProfile::Sigma1 ? 1.0 / static_cast<double>(j) : std::pow(1.2, -static_cast<double>(j));
  return s;
}

/// How the raw operator draw is normalised before scaling by kappa.
enum class OperatorNorm { Spectral, Frobenius, MaxColumnSum };

inline std::string to_string(OperatorNorm n) {
  switch (n) {
    case OperatorNorm::Spectral: return "spectral";
    case OperatorNorm::Frobenius: return "frobenius";
    case OperatorNorm::MaxColumnSum: return "one";
  }
  return "?";
}

inline OperatorNorm parse_operator_norm(const std::string& s) {
  if (s == "spectral") return OperatorNorm::Spectral;
  if (s == "frobenius") return OperatorNorm::Frobenius;
  if (s == "one") return OperatorNorm::MaxColumnSum;
  throw InvalidArgument("unknown operator norm: " + s);
}

/// Entries Normal(0, sigma_j sigma_j') divided by the chosen norm and scaled by kappa.
inline Matrix gen_operator(const Vector& sigma, double kappa, std::mt19937_64& rng,
                           OperatorNorm norm = OperatorNorm::Spectral) {
  if (!(kappa >= 0.0)) throw InvalidArgument("operator scale must be non-negative");
  const Index D = sigma.size();
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix psi(D, D);
  for (Index i = 0; i < D; ++i)
    for (Index j = 0; j < D; ++j) psi(i, j) = std::sqrt(sigma[i] * sigma[j]) * z(rng);
  if (kappa == 0.0) return Matrix::Zero(D, D);
  double nrm = 0.0;
  switch (norm) {
    case OperatorNorm::Spectral: nrm = Eigen::JacobiSVD<Matrix>(psi).singularValues()[0]; break;
    case OperatorNorm::Frobenius: nrm = psi.norm(); break;
    case OperatorNorm::MaxColumnSum: nrm = psi.cwiseAbs().colwise().sum().maxCoeff(); break;
  }
  if (!(nrm > 0.0)) throw NumericalError("operator draw has zero norm");
  return psi * (kappa / nrm);
}

inline Matrix gen_operator(SigmaProfile profile, Index D, double kappa, std::uint64_t seed,
                           OperatorNorm norm = OperatorNorm::Spectral) {
  auto rng = make_stream(seed, {key(StreamPurpose::Operator)});
  return gen_operator(sigma_profile(profile, D), kappa, rng, norm);
}

/// Spectral radius of the FAR(2) companion matrix [Psi1 Psi2; I 0].
inline double far2_radius(const Matrix& psi1, const Matrix& psi2) {
  return detail::companion_radius({psi1, psi2}, psi1.rows());
}

/// Coefficient recursion c_k = Psi1 c_{k-1} + Psi2 c_{k-2} + a_k with
/// a_{k,j} ~ Normal(0, sigma_j^2) from zero initial values; the first
/// `burn_in` vectors are discarded.
inline Matrix simulate_coefficients(const Matrix& psi1, const Matrix& psi2, const Vector& sigma, Index n, Index burn_in,
                                    std::mt19937_64& rng) {
  const Index D = sigma.size();
  if (psi1.rows() != D || psi1.cols() != D || psi2.rows() != D || psi2.cols() != D)
    throw ShapeError("operators do not match the innovation dimension");
  if (n < 1 || burn_in < 0) throw InvalidArgument("curve counts must be positive");
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix out(n, D);
  Vector c1 = Vector::Zero(D), c2 = Vector::Zero(D), a(D);
  for (Index k = 0; k < burn_in + n; ++k) {
    for (Index j = 0; j < D; ++j) a[j] = sigma[j] * z(rng);
    Vector c = psi1 * c1 + psi2 * c2 + a;
    c2 = std::move(c1);
    c1 = std::move(c);
    if (k >= burn_in) out.row(k - burn_in) = c1.transpose();
  }
  return out;
}

/// Concatenated-in-time AR(1) error e_t = phi e_{t-1} + sigma_e z_t, started
/// from its stationary distribution, added to the grid values row by row.
inline DiscreteSample add_ar1_error(const DiscreteSample& sample, double phi, double sigma_e, std::mt19937_64& rng) {
  if (!(std::abs(phi) < 1.0)) throw InvalidArgument("AR(1) coefficient must satisfy |phi| < 1");
  if (!(sigma_e >= 0.0)) throw InvalidArgument("error standard deviation must be non-negative");
  DiscreteSample out = sample;
  if (sigma_e == 0.0) return out;
  std::normal_distribution<double> z(0.0, 1.0);
  double e = sigma_e / std::sqrt(1.0 - phi * phi) * z(rng);
  for (Index k = 0; k < out.values.rows(); ++k)
    for (Index j = 0; j < out.values.cols(); ++j) {
      if (k > 0 || j > 0) e = phi * e + sigma_e * z(rng);
      out.values(k, j) += e;
    }
  return out;
}

/// Quadrature of the squared error over (tau, 1]. Both vectors are given
/// either on the full grid or on its response sub-grid.
inline double pmse(const Grid& grid, const Vector& truth, const Vector& prediction, double tau) {
  if (truth.size() != prediction.size()) throw ShapeError("truth and prediction differ in length");
  const auto idx = grid.indices_in(response_domain(tau));
  const auto m = static_cast<Index>(idx.size());
  double s = 0.0;
  if (truth.size() == grid.size()) {
    for (Index j : idx) s += grid.weights()[j] * (truth[j] - prediction[j]) * (truth[j] - prediction[j]);
  } else if (truth.size() == m) {
    for (Index i = 0; i < m; ++i) {
      const double e = truth[i] - prediction[i];
      s += grid.weights()[idx[static_cast<std::size_t>(i)]] * e * e;
    }
  } else {
    throw ShapeError("curves match neither the grid nor its response sub-grid");
  }
  return s;
}

/// Mean over targets of pmse / (1 - tau).
inline double mipe(const Grid& grid, const std::vector<Vector>& truths, const std::vector<Vector>& predictions,
                   double tau) {
  if (truths.size() != predictions.size() || truths.empty()) throw ShapeError("truths and predictions differ in count");
  if (!(tau < 1.0)) throw InvalidArgument("tau must be below 1");
  double s = 0.0;
  for (std::size_t k = 0; k < truths.size(); ++k) s += pmse(grid, truths[k], predictions[k], tau);
  return s / (1.0 - tau) / static_cast<double>(truths.size());
}

/// What to do with an operator draw whose FAR companion matrix has spectral
/// radius >= 1.
enum class StationarityPolicy {
  Proceed,  ///< keep it and record a warning
  Redraw    ///< draw again from the same stream until the process is stationary
};

inline std::string to_string(StationarityPolicy p) { return p == StationarityPolicy::Proceed ? "proceed" : "redraw"; }

inline StationarityPolicy parse_stationarity_policy(const std::string& s) {
  if (s == "proceed") return StationarityPolicy::Proceed;
  if (s == "redraw") return StationarityPolicy::Redraw;
  throw InvalidArgument("unknown stationarity policy: " + s);
}

struct SimSetting {
  double kappa1 = 1.8;
  double kappa2 = 0.0;
  SigmaProfile profile = SigmaProfile::Sigma1;
};

/// Parameter choice inside a replication.
enum class SelectionMode {
  Criterion,  ///< (p, d) by the FAR criterion on the first window, (dx, dy) by the regression criterion
  Joint,      ///< (p, d, dx, dy) jointly by the regression criterion on the residuals
  Fixed       ///< the configured p, d, dx, dy
};

inline std::string to_string(SelectionMode m) {
  switch (m) {
    case SelectionMode::Criterion: return "criterion";
    case SelectionMode::Joint: return "joint";
    case SelectionMode::Fixed: return "fixed";
  }
  return "?";
}

inline SelectionMode parse_selection_mode(const std::string& s) {
  if (s == "criterion") return SelectionMode::Criterion;
  if (s == "joint") return SelectionMode::Joint;
  if (s == "fixed") return SelectionMode::Fixed;
  throw InvalidArgument("unknown selection mode: " + s);
}

struct SimConfig {
  Index D = 15;
  Index J = 48;
  Index n = 400;
  Index burn_in = 100;
  double tau = 0.5;
  Index window = 200;
  Index n_train = 180;
  Index n_test = 20;
  Index replications = 100;
  std::uint64_t seed = 1;
  unsigned threads = 0;  ///< 0: hardware concurrency
  std::vector<SimSetting> settings{SimSetting{}};
  OperatorNorm operator_norm = OperatorNorm::Spectral;
  StationarityPolicy stationarity = StationarityPolicy::Proceed;
  Index max_redraws = 1000;

  SelectionMode mode = SelectionMode::Criterion;
  Index p = 1, d = 7, dx = 12, dy = 12;  ///< used by the fixed mode
  JointRanges ranges{0, 2, 1, 15, 12, 12};

  bool moving_block = true;
  Index bootstrap_replicates = 0;  ///< 0 disables the bands
  double alpha = 0.05;
  double var_threshold = 0.80;

  bool noise = false;
  double noise_phi = 0.5;
  double noise_sigma = 0.2;
  Index horizons = 5;
  int ar_max_order = 5;
  int arima_max_order = 10;

  /// Throws InvalidArgument describing the first violated constraint.
  void validate() const {
    auto need = [](bool ok, const char* msg) {
      if (!ok) throw InvalidArgument(msg);
    };
    need(D >= 1 && J >= 4 && n >= 1 && burn_in >= 0, "D, J and n must be positive");
    need(tau > 0.0 && tau < 1.0, "tau must lie in (0, 1)");
    need(window >= 2 && n_train >= 2 && n_test >= 1, "window and split sizes must be positive");
    need(window + n_train + n_test <= n, "window + n_train + n_test exceeds the number of curves");
    need(replications >= 1, "replications must be positive");
    need(!settings.empty(), "no simulation settings");
    for (const auto& s : settings) need(s.kappa1 >= 0.0 && s.kappa2 >= 0.0, "operator scales must be non-negative");
    need(ranges.p_min >= 0 && ranges.p_min <= ranges.p_max && ranges.d_min >= 1 && ranges.d_min <= ranges.d_max,
         "invalid (p, d) search ranges");
    need(max_redraws >= 0, "max_redraws must be non-negative");
    need(ranges.dx_max >= 1 && ranges.dy_max >= 1, "dimension caps must be positive");
    need(p >= 0 && d >= 1 && dx >= 1 && dy >= 1, "fixed parameters must be positive");
    need(bootstrap_replicates == 0 || bootstrap_replicates >= 100, "bootstrap needs 0 or at least 100 replicates");
    need(alpha > 0.0 && alpha < 1.0, "alpha must lie in (0, 1)");
    need(!noise || std::abs(noise_phi) < 1.0, "noise AR coefficient must satisfy |phi| < 1");
    need(!noise || noise_sigma >= 0.0, "noise standard deviation must be non-negative");
    need(!noise || (horizons >= 1 && ar_max_order >= 0 && arima_max_order >= 0), "invalid noise protocol settings");
  }
};

/// One simulated data set: curves in the Fourier basis (smoothed if noisy)
/// and, for the noisy protocol, the raw observations.
struct SimulatedData {
  FunctionalSeries series;
  std::optional<DiscreteSample> raw;
  Matrix psi1, psi2;
  double radius = 0.0;
  Index redraws = 0;  ///< explosive operator draws rejected first
  std::vector<std::string> warnings;
};

inline SimulatedData simulate_far(const SimConfig& cfg, const SimSetting& s, Index replication) {
  const auto r = static_cast<std::uint64_t>(replication);
  const Vector sigma = sigma_profile(s.profile, cfg.D);
  auto op_rng = make_stream(cfg.seed, {r, key(StreamPurpose::Operator)});
  SimulatedData out{FunctionalSeries(fourier_basis(make_grid(cfg.J), cfg.D), Matrix::Zero(1, cfg.D)), std::nullopt,
                    Matrix(), Matrix(), 0.0, 0, {}};
  for (;;) {
    const Matrix unit = gen_operator(sigma, 1.0, op_rng, cfg.operator_norm);
    out.psi1 = s.kappa1 * unit;
    out.psi2 = s.kappa2 * unit;
    out.radius = far2_radius(out.psi1, out.psi2);
    if (out.radius < 1.0 || cfg.stationarity == StationarityPolicy::Proceed) break;
    if (++out.redraws > cfg.max_redraws) throw NumericalError("no stationary operator within the redraw limit");
  }
  if (out.radius >= 1.0) out.warnings.push_back("FAR companion spectral radius >= 1: explosive configuration");
  auto innov_rng = make_stream(cfg.seed, {r, key(StreamPurpose::Innovations)});
  Matrix c = simulate_coefficients(out.psi1, out.psi2, sigma, cfg.n, cfg.burn_in, innov_rng);
  if (!c.allFinite()) throw NumericalError("simulated curves overflow");
  const BasisPtr basis = fourier_basis(make_grid(cfg.J), cfg.D);
  out.series = FunctionalSeries(basis, std::move(c));
  if (cfg.noise) {
    auto noise_rng = make_stream(cfg.seed, {r, key(StreamPurpose::Noise)});
    DiscreteSample clean{basis->grid, out.series.values()};
    out.raw = add_ar1_error(clean, cfg.noise_phi, cfg.noise_sigma, noise_rng);
    out.series = smooth(*out.raw, basis).series;
  }
  return out;
}

/// Per-replication outcome. Tables are empty unless the mode fills them.
struct ReplicationResult {
  bool ok = false;
  std::string error;
  bool explosive = false;
  Index redraws = 0;
  Index p = 0, d = 0, dx = 0, dy = 0;
  double ffpe_pfp = 0, pmse_pfp = 0, pmse_ts = 0, ffpe_r = 0, pmse_r = 0, pmse_mb = 0;
  double width_pfp = 0, width_ffr = 0, score_pfp = 0, score_ffr = 0, cov_pfp = 0, cov_ffr = 0;
  std::vector<double> msec, msen, msea;  ///< per horizon
  std::vector<double> joint_pmse;        ///< specs x dxMax x dyMax, NaN where infeasible
  std::vector<double> joint_ffpe;
};

namespace detail {

struct EvalTargets {
  std::vector<Index> rows;  ///< residual-set rows of the evaluation targets
  std::vector<Vector> truth;
  std::vector<Vector> partial;
};

/// Evaluation-target PMSE of a residual regression on top of FAR predictions.
inline double pfp_pmse(const ResidualSet& rs, const FfrModel& f, const EvalTargets& ev, const Grid& grid, double tau) {
  PfpModel m;
  m.residual_ffr = f;
  m.tau = tau;
  double s = 0.0;
  for (std::size_t i = 0; i < ev.rows.size(); ++i) {
    const PfpPrediction pr = pfp_update(m, rs.predictions.coeffs().row(ev.rows[i]).transpose(), ev.partial[i]);
    s += pmse(grid, ev.truth[i], pr.combined, tau);
  }
  return s / static_cast<double>(ev.rows.size());
}

/// PMSE of every (dx, dy) <= caps for one residual set, dx-major.
inline std::vector<double> pmse_grid(const ResidualSet& rs, const EvalTargets& ev, const Grid& grid, const SimConfig& cfg,
                                     Index dxMax, Index dyMax) {
  std::vector<double> out(static_cast<std::size_t>(dxMax * dyMax), std::nan(""));
  const auto [X, Y] = split_at(rs.residuals.slice(0, cfg.n_train), cfg.tau);
  const EigenSystem xes = fpca(X), yes = fpca(Y);
  const Index dyEff = std::min(dyMax, yes.dim());
  const BasisSystem& pb = *xes.basis;
  const BasisSystem& rb = *yes.basis;
  const Matrix psi = rb.eval * yes.eigenfunctions.leftCols(dyEff);
  const Vector ymean = rb.eval * yes.mean;
  for (Index dx = 1; dx <= std::min(dxMax, xes.dim()); ++dx) {
    FfrModel f;
    try {
      f = fit_ffr(xes, yes, dx, dyEff);
    } catch (const Error&) {
      continue;
    }
    Vector acc = Vector::Zero(dyEff);
    for (std::size_t i = 0; i < ev.rows.size(); ++i) {
      const Vector fc = rs.predictions.coeffs().row(ev.rows[i]).transpose();
      const Vector far_resp = rb.eval * restrict_coeffs(rb, fc);
      const Vector obs = ev.partial[i] - pb.eval * restrict_coeffs(pb, fc);
      const Vector z = f.B * scores_of_values(xes, obs).head(dx);
      Vector pred = far_resp + ymean;
      for (Index dy = 1; dy <= dyEff; ++dy) {
        pred += psi.col(dy - 1) * z[dy - 1];
        acc[dy - 1] += pmse(grid, ev.truth[i], pred, cfg.tau);
      }
    }
    for (Index dy = 1; dy <= dyEff; ++dy)
      out[static_cast<std::size_t>((dx - 1) * dyMax + dy - 1)] = acc[dy - 1] / static_cast<double>(ev.rows.size());
  }
  return out;
}

}  // namespace detail

/// One replication of the protocol for one setting.
inline ReplicationResult run_replication(const SimConfig& cfg, const SimSetting& setting, Index replication) {
  ReplicationResult res;
  try {
    const SimulatedData data = simulate_far(cfg, setting, replication);
    res.explosive = data.radius >= 1.0;
    res.redraws = data.redraws;
    const FunctionalSeries& Y = data.series;
    const Grid& grid = Y.grid();
    const Index first = cfg.n - (cfg.n_train + cfg.n_test);
    const Index last = cfg.n - 1;
    const Index train = cfg.n_train;

    detail::EvalTargets ev;
    const auto head = grid.indices_in(predictor_domain(cfg.tau));
    const auto tail = grid.indices_in(response_domain(cfg.tau));
    const Matrix vals = Y.values();
    for (Index i = train; i < train + cfg.n_test; ++i) {
      const Index k = first + i;
      ev.rows.push_back(i);
      Vector tr(static_cast<Index>(tail.size())), pa(static_cast<Index>(head.size()));
      for (std::size_t j = 0; j < tail.size(); ++j) tr[static_cast<Index>(j)] = vals(k, tail[j]);
      for (std::size_t j = 0; j < head.size(); ++j) pa[static_cast<Index>(j)] = vals(k, head[j]);
      ev.truth.push_back(std::move(tr));
      ev.partial.push_back(std::move(pa));
    }

    // FAR specification and residuals.
    std::optional<ResidualSet> rs;
    const Index dxCap = std::min(cfg.ranges.dx_max, cfg.D), dyCap = std::min(cfg.ranges.dy_max, cfg.D);
    if (cfg.mode == SelectionMode::Joint) {
      std::vector<FarSpec> specs;
      for (const FarSpec& s : joint_specs(cfg.ranges))
        if (s.d <= cfg.D && cfg.window - s.p - s.p * s.d >= 1 && cfg.window > s.p * s.d + 1) specs.push_back(s);
      auto sets = sliding_residuals(Y, specs, cfg.window, first, last);
      std::vector<ResidualSet> training;
      for (const auto& s : sets)
        training.push_back({s.residuals.slice(0, train), s.predictions.slice(0, train), s.window, s.first_target, s.spec});
      const JointSelection js = ffpe_joint(training, cfg.tau, dxCap, dyCap);
      res.p = js.p;
      res.d = js.d;
      res.dx = js.dx;
      res.dy = js.dy;
      const std::size_t cell = static_cast<std::size_t>(dxCap * dyCap);
      res.joint_pmse.assign(specs.size() * cell, std::nan(""));
      res.joint_ffpe.assign(specs.size() * cell, std::nan(""));
      for (std::size_t s = 0; s < sets.size(); ++s) {
        const auto g = detail::pmse_grid(sets[s], ev, grid, cfg, dxCap, dyCap);
        std::copy(g.begin(), g.end(), res.joint_pmse.begin() + static_cast<std::ptrdiff_t>(s * cell));
        if (sets[s].spec == FarSpec{js.p, js.d}) rs = sets[s];
      }
      for (const JointCell& c : js.cells) {
        const auto it = std::find(specs.begin(), specs.end(), c.spec);
        const auto s = static_cast<std::size_t>(it - specs.begin());
        for (Index i = 0; i < c.dims.table.rows(); ++i)
          for (Index j = 0; j < c.dims.table.cols(); ++j)
            if (std::isfinite(c.dims.table(i, j)))
              res.joint_ffpe[s * cell + static_cast<std::size_t>(i * dyCap + j)] = c.dims.table(i, j);
      }
    } else {
      FarSpec spec{cfg.p, cfg.d};
      if (cfg.mode == SelectionMode::Criterion)
        spec = select_far(Y.slice(first - cfg.window, cfg.window), cfg.ranges.p_max, std::min(cfg.ranges.d_max, cfg.D))
                   .spec;
      rs = sliding_residuals(Y, spec, cfg.window, first, last);
      res.p = spec.p;
      res.d = spec.d;
      res.dx = cfg.dx;
      res.dy = cfg.dy;
      if (cfg.mode == SelectionMode::Criterion) {
        const auto [X, R] = split_at(rs->residuals.slice(0, train), cfg.tau);
        const FfrSelection sel = select_dims(X, R, dxCap, dyCap);
        res.dx = sel.dx;
        res.dy = sel.dy;
      }
    }

    const ResidualSet training{rs->residuals.slice(0, train), rs->predictions.slice(0, train), rs->window,
                               rs->first_target, rs->spec};
    const PfpModel model = pfp_model_from_residuals(training, cfg.tau, res.dx, res.dy);
    res.ffpe_pfp = ffpe_r(model.residual_ffr);

    // Regression on the raw curves, trained on the same target indices.
    const FunctionalSeries raw_train = Y.slice(first, train);
    const auto [XR, YR] = split_at(raw_train, cfg.tau);
    const EigenSystem xr = fpca(XR), yr = fpca(YR);
    Index rdx = res.dx, rdy = res.dy;
    if (cfg.mode != SelectionMode::Fixed) {
      const FfrSelection sel = select_dims(xr, yr, dxCap, dyCap);
      rdx = sel.dx;
      rdy = sel.dy;
    }
    const FfrModel ffr = fit_ffr(xr, yr, rdx, rdy);
    res.ffpe_r = ffpe_r(ffr);

    std::optional<BootstrapEnsemble> ens_pfp, ens_ffr;
    if (cfg.bootstrap_replicates > 0) {
      BootstrapOptions bo;
      bo.replicates = cfg.bootstrap_replicates;
      bo.alpha = cfg.alpha;
      bo.var_threshold = cfg.var_threshold;
      bo.seed = mix64(cfg.seed ^ mix64(static_cast<std::uint64_t>(replication) + 0x51ULL));
      ens_pfp = bootstrap_ensemble(training.residuals, cfg.tau, res.dx, res.dy, bo);
      ens_ffr = bootstrap_ensemble(raw_train, cfg.tau, rdx, rdy, bo);
    }

    std::vector<BootstrapBands> bands_pfp, bands_ffr;
    const BasisSystem& rb = *model.residual_ffr.resp_es.basis;
    const Index nt = static_cast<Index>(ev.rows.size());
    for (std::size_t i = 0; i < ev.rows.size(); ++i) {
      const Index k = first + ev.rows[i];
      const Vector fc = rs->predictions.coeffs().row(ev.rows[i]).transpose();
      const PfpPrediction pr = pfp_update(model, fc, ev.partial[i]);
      res.pmse_pfp += pmse(grid, ev.truth[i], pr.combined, cfg.tau);
      res.pmse_ts += pmse(grid, ev.truth[i], pr.far_part, cfg.tau);
      const Vector yr_pred = rb.eval * predict_ffr_values(ffr, ev.partial[i]);
      res.pmse_r += pmse(grid, ev.truth[i], yr_pred, cfg.tau);
      if (cfg.moving_block) {
        const Vector mb = moving_block_predict(Y.slice(k - cfg.window, cfg.window), cfg.tau, res.p, res.d, ev.partial[i]);
        res.pmse_mb += pmse(grid, ev.truth[i], mb, cfg.tau);
      }
      if (ens_pfp) {
        bands_pfp.push_back(bootstrap_bands(*ens_pfp, pr.far_part, pr.observed_residual, cfg.alpha));
        bands_ffr.push_back(bootstrap_bands(*ens_ffr, Vector::Zero(pr.far_part.size()), ev.partial[i], cfg.alpha));
      }
    }
    const double inv = 1.0 / static_cast<double>(nt);
    res.pmse_pfp *= inv;
    res.pmse_ts *= inv;
    res.pmse_r *= inv;
    res.pmse_mb *= inv;
    if (ens_pfp) {
      double wp = 0.0, wf = 0.0;
      for (std::size_t i = 0; i < bands_pfp.size(); ++i) {
        wp += bands_pfp[i].mean_width();
        wf += bands_ffr[i].mean_width();
      }
      res.width_pfp = wp * inv;
      res.width_ffr = wf * inv;
      res.score_pfp = averaged_score(bands_pfp, ev.truth, cfg.alpha);
      res.score_ffr = averaged_score(bands_ffr, ev.truth, cfg.alpha);
      res.cov_pfp = coverage(bands_pfp, ev.truth);
      res.cov_ffr = coverage(bands_ffr, ev.truth);
    }

    if (cfg.noise) {
      // Pre-smoothing residuals and raw values in time order.
      const DiscreteSample& raw = *data.raw;
      const Matrix pre = raw.values - vals;
      const Index fe = first + train;  // first evaluation curve
      // The regression for raw partial curves is trained on raw partial residuals.
      const ResidualSet mixed = raw_partial_residuals(training, raw.values.middleRows(first, train), cfg.tau);
      Index ndx = res.dx, ndy = res.dy;
      if (cfg.mode != SelectionMode::Fixed) {
        const auto [MX, MY] = split_at(mixed.residuals, cfg.tau);
        const FfrSelection sel = select_dims(MX, MY, dxCap, dyCap);
        ndx = sel.dx;
        ndy = sel.dy;
      }
      PfpModel nm = pfp_model_from_residuals(mixed, cfg.tau, ndx, ndy);
      nm.error_model = fit_ar(concat_rows(pre.topRows(fe)), cfg.ar_max_order);
      const ArModel arima = fit_ar(concat_rows(raw.values.topRows(fe)), cfg.arima_max_order);
      const Index H = std::min<Index>(cfg.horizons, static_cast<Index>(tail.size()));
      res.msec.assign(static_cast<std::size_t>(H), 0.0);
      res.msen.assign(static_cast<std::size_t>(H), 0.0);
      res.msea.assign(static_cast<std::size_t>(H), 0.0);
      for (std::size_t i = 0; i < ev.rows.size(); ++i) {
        const Index k = first + ev.rows[i];
        const Vector fc = rs->predictions.coeffs().row(ev.rows[i]).transpose();
        Vector partial_raw(static_cast<Index>(head.size()));
        for (std::size_t j = 0; j < head.size(); ++j) partial_raw[static_cast<Index>(j)] = raw.values(k, head[j]);
        const NoisyPrediction np = pfp_predict_noisy_with(nm, Y.evaluate(fc), pre.topRows(k), partial_raw, H);
        std::vector<double> hist = concat_rows(raw.values.topRows(k));
        for (Index j = 0; j < partial_raw.size(); ++j) hist.push_back(partial_raw[j]);
        const auto fa = forecast_ar(arima, hist, static_cast<int>(H));
        for (Index h = 0; h < H; ++h) {
          const double y = raw.values(k, tail[static_cast<std::size_t>(h)]);
          const auto hh = static_cast<std::size_t>(h);
          res.msec[hh] += (y - np.combined[h]) * (y - np.combined[h]) * inv;
          res.msen[hh] += (y - np.smooth[h]) * (y - np.smooth[h]) * inv;
          res.msea[hh] += (y - fa[hh]) * (y - fa[hh]) * inv;
        }
      }
    }
    res.ok = true;
  } catch (const std::exception& e) {
    res.ok = false;
    res.error = e.what();
  }
  return res;
}

struct Metric {
  std::string name;
  double value = 0.0;
};

/// Means over the successful replications of one setting.
struct SettingRow {
  SimSetting setting;
  double tau = 0.5;
  Index replications = 0;  ///< successful replications behind every mean
  Index failures = 0;
  Index explosive = 0;
  Index redraws = 0;
  std::vector<Metric> metrics;
  std::vector<std::string> errors;

  double get(const std::string& name) const {
    for (const auto& m : metrics)
      if (m.name == name) return m.value;
    throw InvalidArgument("no metric named " + name);
  }
  bool has(const std::string& name) const {
    return std::any_of(metrics.begin(), metrics.end(), [&](const Metric& m) { return m.name == name; });
  }
};

struct EvaluationReport {
  std::uint64_t seed = 0;
  Index replications = 0;
  SelectionMode mode = SelectionMode::Criterion;
  std::vector<SettingRow> rows;
  std::vector<std::string> warnings;
};

namespace detail {

template <typename Get>
double mean_over(const std::vector<ReplicationResult>& rs, Get get) {
  double s = 0.0;
  Index c = 0;
  for (const auto& r : rs)
    if (r.ok) {
      s += get(r);
      ++c;
    }
  return c > 0 ? s / static_cast<double>(c) : std::nan("");
}

/// Most frequent value; ties go to the smallest.
inline Index mode_of(const std::vector<Index>& v) {
  std::map<Index, Index> count;
  for (Index x : v) ++count[x];
  Index best = 0, hits = -1;
  for (const auto& [x, c] : count)
    if (c > hits) {
      best = x;
      hits = c;
    }
  return best;
}

inline SettingRow aggregate(const SimConfig& cfg, const SimSetting& s, const std::vector<ReplicationResult>& rs) {
  SettingRow row;
  row.setting = s;
  row.tau = cfg.tau;
  std::vector<Index> ps, ds, dxs, dys, pd;
  for (const auto& r : rs) {
    if (!r.ok) {
      ++row.failures;
      row.errors.push_back(r.error);
      continue;
    }
    ++row.replications;
    row.explosive += r.explosive ? 1 : 0;
    row.redraws += r.redraws;
    ps.push_back(r.p);
    ds.push_back(r.d);
    dxs.push_back(r.dx);
    dys.push_back(r.dy);
    pd.push_back(r.p * 1000 + r.d);
  }
  auto add = [&](const std::string& name, double v) { row.metrics.push_back({name, v}); };
  add("fFPE_PFP", mean_over(rs, [](const auto& r) { return r.ffpe_pfp; }));
  add("PMSE_PFP", mean_over(rs, [](const auto& r) { return r.pmse_pfp; }));
  add("PMSE_ts", mean_over(rs, [](const auto& r) { return r.pmse_ts; }));
  add("fFPE_r", mean_over(rs, [](const auto& r) { return r.ffpe_r; }));
  add("PMSE_r", mean_over(rs, [](const auto& r) { return r.pmse_r; }));
  if (cfg.moving_block) {
    add("PMSE_mb", mean_over(rs, [](const auto& r) { return r.pmse_mb; }));
    add("PFP_beats_mb", mean_over(rs, [](const auto& r) { return r.pmse_pfp < r.pmse_mb ? 1.0 : 0.0; }));
  }
  if (row.replications > 0) {
    const Index m = mode_of(pd);
    add("p_mode", static_cast<double>(m / 1000));
    add("d_mode", static_cast<double>(m % 1000));
    add("dx_mode", static_cast<double>(mode_of(dxs)));
    add("dy_mode", static_cast<double>(mode_of(dys)));
  }
  if (cfg.bootstrap_replicates > 0) {
    add("width_PFP", mean_over(rs, [](const auto& r) { return r.width_pfp; }));
    add("width_FFR", mean_over(rs, [](const auto& r) { return r.width_ffr; }));
    add("score_PFP", mean_over(rs, [](const auto& r) { return r.score_pfp; }));
    add("score_FFR", mean_over(rs, [](const auto& r) { return r.score_ffr; }));
    add("coverage_PFP", mean_over(rs, [](const auto& r) { return r.cov_pfp; }));
    add("coverage_FFR", mean_over(rs, [](const auto& r) { return r.cov_ffr; }));
  }
  if (cfg.noise) {
    for (Index h = 0; h < cfg.horizons; ++h) {
      const auto hh = static_cast<std::size_t>(h);
      auto at = [hh](const std::vector<double>& v) { return hh < v.size() ? v[hh] : std::nan(""); };
      const std::string sfx = "_h" + std::to_string(h + 1);
      add("MSEc" + sfx, mean_over(rs, [&](const auto& r) { return at(r.msec); }));
      add("MSEn" + sfx, mean_over(rs, [&](const auto& r) { return at(r.msen); }));
      add("MSEa" + sfx, mean_over(rs, [&](const auto& r) { return at(r.msea); }));
    }
  }
  if (cfg.mode == SelectionMode::Joint && row.replications > 0) {
    // Grid-minimal mean PMSE over cells feasible in every replication.
    std::size_t cells = 0;
    for (const auto& r : rs)
      if (r.ok) cells = r.joint_pmse.size();
    std::vector<double> mp(cells, 0.0), mf(cells, 0.0);
    std::vector<bool> feasible(cells, true);
    for (const auto& r : rs) {
      if (!r.ok) continue;
      for (std::size_t c = 0; c < cells; ++c) {
        if (!std::isfinite(r.joint_pmse[c]) || !std::isfinite(r.joint_ffpe[c])) feasible[c] = false;
        mp[c] += r.joint_pmse[c];
        mf[c] += r.joint_ffpe[c];
      }
    }
    std::size_t best = cells;
    for (std::size_t c = 0; c < cells; ++c)
      if (feasible[c] && (best == cells || mp[c] < mp[best])) best = c;
    const double nr = static_cast<double>(row.replications);
    add("fFPE_a", mean_over(rs, [](const auto& r) { return r.ffpe_pfp; }));
    add("PMSE_a", mean_over(rs, [](const auto& r) { return r.pmse_pfp; }));
    add("fFPE_b", best < cells ? mf[best] / nr : std::nan(""));
    add("PMSE_b", best < cells ? mp[best] / nr : std::nan(""));
  }
  return row;
}

}  // namespace detail

/// Runs every setting of `cfg`; replications are spread over threads and
/// aggregated in replication order, so the report does not depend on the
/// thread count.
inline EvaluationReport run_protocol(const SimConfig& cfg) {
  cfg.validate();
  EvaluationReport rep;
  rep.seed = cfg.seed;
  rep.replications = cfg.replications;
  rep.mode = cfg.mode;
  const unsigned threads = cfg.threads > 0 ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  for (const SimSetting& s : cfg.settings) {
    std::vector<ReplicationResult> rs(static_cast<std::size_t>(cfg.replications));
    parallel_for(cfg.replications, threads,
                 [&](Index r) { rs[static_cast<std::size_t>(r)] = run_replication(cfg, s, r); });
    rep.rows.push_back(detail::aggregate(cfg, s, rs));
    const SettingRow& row = rep.rows.back();
    if (row.explosive > 0)
      rep.warnings.push_back("kappa1=" + std::to_string(s.kappa1) + " kappa2=" + std::to_string(s.kappa2) + " " +
                             to_string(s.profile) + ": " + std::to_string(row.explosive) +
                             " replications with an explosive operator");
    if (row.failures > 0)
      rep.warnings.push_back(std::to_string(row.failures) + " failed replications: " + row.errors.front());
  }
  return rep;
}

}  // namespace pfp
