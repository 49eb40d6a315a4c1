#pragma once

/// @file pfp.hpp
/// Partial functional prediction.
///
/// A full-curve FAR prediction of the next curve is corrected on (tau, 1] by
/// an intraday functional regression fitted to one-step prediction residuals:
///
///   Y^u|(tau,1] = Yhat|(tau,1] + mu_e|(tau,1] + beta(partial - Yhat|[0,tau] - mu_e|[0,tau]).
///
/// For rough data the pre-smoothing residuals are additionally forecast by a
/// scalar AR model and added at the grid points.

#include <optional>
#include <vector>

#include "pfp/arma.hpp"
#include "pfp/far.hpp"
#include "pfp/ffr.hpp"

namespace pfp {

struct PfpConfig {
  double tau = 0.5;
  Index p = 1;
  Index d = 1;
  Index dx = 1;
  Index dy = 1;
  Index window = 200;
};

struct PfpModel {
  FarModel far;           ///< fitted on the final window
  FfrModel residual_ffr;  ///< residual curves split at tau
  Vector resid_mean;      ///< mean prediction residual, full-domain coefficients
  std::optional<ArModel> error_model;
  double tau = 0.5;
  Index window = 0;
  ResidualSet training;
};

struct PfpPrediction {
  Vector t;              ///< response grid points
  Vector far_part;       ///< Yhat on (tau, 1]
  Vector residual_part;  ///< intraday residual update, mean adjustment included
  Vector combined;
  Vector observed_residual;  ///< partial - Yhat on [0, tau]
};

/// Residual regression of a PFP model from training residuals.
inline PfpModel pfp_model_from_residuals(const ResidualSet& training, double tau, Index dx, Index dy) {
  PfpModel m;
  m.tau = tau;
  m.window = training.window;
  m.training = training;
  const auto [X, Y] = split_at(training.residuals, tau);
  m.residual_ffr = fit_ffr(X, Y, dx, dy);
  m.resid_mean = training.residuals.coeffs().colwise().mean().transpose();
  return m;
}

/// Steps 1-3: sliding-window residuals for every curve that has a full
/// window, their regression at tau, and the FAR model on the final window.
inline PfpModel pfp_fit(const FunctionalSeries& series, const PfpConfig& cfg) {
  const Index n = series.size();
  if (cfg.window < 2 || n - cfg.window < cfg.dx + 2)
    throw InvalidArgument("not enough curves for the window and the residual regression");
  const ResidualSet rs = sliding_residuals(series, {cfg.p, cfg.d}, cfg.window, cfg.window, n - 1);
  PfpModel m = pfp_model_from_residuals(rs, cfg.tau, cfg.dx, cfg.dy);
  m.far = fit_far(series.slice(n - cfg.window, cfg.window), cfg.p, cfg.d);
  return m;
}

/// Joint (p, d, dx, dy) selection on the training residuals of `series`.
inline JointSelection pfp_select(const FunctionalSeries& series, double tau, const JointRanges& ranges, Index window) {
  return ffpe_joint(series, tau, ranges, window, window, series.size() - 1);
}

/// Intraday update of a given full-curve prediction (coefficients in the full
/// basis) using the partial observation's values on the predictor grid.
inline PfpPrediction pfp_update(const PfpModel& m, const Vector& far_coeffs, const Vector& partial) {
  const BasisSystem& pb = *m.residual_ffr.pred_es.basis;
  const BasisSystem& rb = *m.residual_ffr.resp_es.basis;
  if (partial.size() != pb.grid.size()) throw ShapeError("partial observation does not match the predictor grid");
  if (!partial.allFinite()) throw InvalidArgument("partial observation contains non-finite values");
  PfpPrediction out;
  out.t = rb.grid.points();
  out.observed_residual = partial - pb.eval * restrict_coeffs(pb, far_coeffs);
  out.far_part = rb.eval * restrict_coeffs(rb, far_coeffs);
  out.residual_part = rb.eval * predict_ffr_values(m.residual_ffr, out.observed_residual);
  out.combined = out.far_part + out.residual_part;
  return out;
}

/// Step 4: FAR prediction of the next curve from `history` plus the update.
inline PfpPrediction pfp_predict(const PfpModel& m, const FunctionalSeries& history, const Vector& partial) {
  return pfp_update(m, predict_curve(m.far, history, 1), partial);
}

/// Smooth fit of the partial observation on the predictor grid: the FAR
/// prediction plus the residual reconstructed from its first dx components.
inline Vector partial_fit(const PfpModel& m, const Vector& far_coeffs, const Vector& partial) {
  const FfrModel& f = m.residual_ffr;
  const BasisSystem& pb = *f.pred_es.basis;
  if (partial.size() != pb.grid.size()) throw ShapeError("partial observation does not match the predictor grid");
  const Vector yhat = pb.eval * restrict_coeffs(pb, far_coeffs);
  const Vector xi = scores_of_values(f.pred_es, partial - yhat);
  return yhat + pb.eval * reconstruct(f.pred_es, xi, f.dx);
}

/// Concatenates the rows of a residual matrix in time order.
inline std::vector<double> concat_rows(const Matrix& values) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(values.size()));
  for (Index k = 0; k < values.rows(); ++k)
    for (Index j = 0; j < values.cols(); ++j) out.push_back(values(k, j));
  return out;
}

/// Residuals for a regression on raw partial observations: raw values minus
/// the FAR prediction on [0, tau] and smoothed residuals on (tau, 1], all on
/// the grid (nodal basis). Training the regression on these lets it see the
/// same measurement error in its predictor that a raw partial curve carries.
/// `raw` holds the raw curves of the targets, one row per residual.
inline ResidualSet raw_partial_residuals(const ResidualSet& rs, const Matrix& raw, double tau) {
  const Grid& g = rs.residuals.grid();
  if (raw.rows() != rs.size() || raw.cols() != g.size()) throw ShapeError("raw curves do not match the residual set");
  const Matrix pred = rs.predictions.values();
  Matrix resid = rs.residuals.values();
  for (Index j : g.indices_in(predictor_domain(tau))) resid.col(j) = raw.col(j) - pred.col(j);
  const BasisPtr nb = nodal_basis(g);
  return {FunctionalSeries(nb, std::move(resid)), FunctionalSeries(nb, pred), rs.window, rs.first_target, rs.spec};
}

/// Steps 1-3 for raw curves whose partial observations arrive unsmoothed:
/// smoothing, sliding FAR residuals of the smoothed curves and the regression
/// on raw partial residuals (see raw_partial_residuals). Predict with
/// pfp_predict_raw.
inline PfpModel pfp_fit_raw(const DiscreteSample& raw, const BasisPtr& basis, const PfpConfig& cfg) {
  const SmoothResult sm = smooth(raw, basis);
  const Index n = sm.series.size();
  if (cfg.window < 2 || n - cfg.window < cfg.dx + 2)
    throw InvalidArgument("not enough curves for the window and the residual regression");
  const ResidualSet rs = sliding_residuals(sm.series, {cfg.p, cfg.d}, cfg.window, cfg.window, n - 1);
  PfpModel m = pfp_model_from_residuals(raw_partial_residuals(rs, raw.values.bottomRows(n - cfg.window), cfg.tau),
                                        cfg.tau, cfg.dx, cfg.dy);
  m.far = fit_far(sm.series.slice(n - cfg.window, cfg.window), cfg.p, cfg.d);
  return m;
}

/// Joint (p, d, dx, dy) selection with the criterion evaluated on raw partial
/// residuals, matching pfp_fit_raw.
inline JointSelection pfp_select_raw(const DiscreteSample& raw, const BasisPtr& basis, double tau,
                                     const JointRanges& ranges, Index window) {
  const SmoothResult sm = smooth(raw, basis);
  const Index n = sm.series.size();
  std::vector<FarSpec> specs;
  for (const FarSpec& s : joint_specs(ranges))
    if (window - s.p - s.p * s.d >= 1 && window > s.p * s.d + 1 && s.d <= sm.series.dim()) specs.push_back(s);
  if (specs.empty()) throw InvalidArgument("no FAR specification fits the window");
  std::vector<ResidualSet> sets = sliding_residuals(sm.series, specs, window, window, n - 1);
  const Matrix targets = raw.values.bottomRows(n - window);
  for (ResidualSet& rs : sets) rs = raw_partial_residuals(rs, targets, tau);
  return ffpe_joint(sets, tau, ranges.dx_max, ranges.dy_max);
}

/// FAR prediction of the next curve from the smoothed `raw_history` plus the
/// update from a raw partial observation.
inline PfpPrediction pfp_predict_raw(const PfpModel& m, const DiscreteSample& raw_history, const Vector& partial_raw) {
  const SmoothResult sm = smooth(raw_history, m.far.es.basis);
  return pfp_update(m, m.far.es.basis->eval * predict_curve(m.far, sm.series, 1), partial_raw);
}

/// Steps 1-5 on raw data: pfp_fit_raw plus an AR model of the concatenated
/// pre-smoothing residuals. Predict with pfp_predict_noisy.
inline PfpModel pfp_fit_noisy(const DiscreteSample& raw, const BasisPtr& basis, const PfpConfig& cfg, int ar_max_order) {
  PfpModel m = pfp_fit_raw(raw, basis, cfg);
  m.error_model = fit_ar(concat_rows(smooth(raw, basis).residuals.values), ar_max_order);
  return m;
}

struct NoisyPrediction {
  Vector t;         ///< the h grid points after tau
  Vector smooth;    ///< smooth PFP part
  Vector error;     ///< AR forecast of the pre-smoothing residuals
  Vector combined;
};

/// Step 6 from an already separated partial observation: the smooth update
/// from `partial_smooth` at the next h grid points after tau, plus the AR
/// forecast of the pre-smoothing residual sequence `history_resid` (rows in
/// time order) continued by `partial_resid`.
inline NoisyPrediction pfp_predict_noisy_parts(const PfpModel& m, const Vector& far_coeffs, const Matrix& history_resid,
                                               const Vector& partial_smooth, const Vector& partial_resid, Index h) {
  if (!m.error_model) throw StateError("PFP model has no error model");
  if (partial_resid.size() != partial_smooth.size()) throw ShapeError("partial residuals do not match the partial curve");
  const PfpPrediction smooth = pfp_update(m, far_coeffs, partial_smooth);
  if (h < 1 || h > smooth.t.size()) throw InvalidArgument("horizon must lie within the response grid");
  std::vector<double> seq = concat_rows(history_resid);
  for (Index j = 0; j < partial_resid.size(); ++j) seq.push_back(partial_resid[j]);
  const auto fc = forecast_ar(*m.error_model, seq, static_cast<int>(h));
  NoisyPrediction out;
  out.t = smooth.t.head(h);
  out.smooth = smooth.combined.head(h);
  out.error = Eigen::Map<const Vector>(fc.data(), h);
  out.combined = out.smooth + out.error;
  return out;
}

/// Step 6 from the raw partial observation, whose smooth part is partial_fit().
inline NoisyPrediction pfp_predict_noisy_with(const PfpModel& m, const Vector& far_coeffs, const Matrix& history_resid,
                                              const Vector& partial_raw, Index h) {
  if (!m.error_model) throw StateError("PFP model has no error model");
  const Vector fit = partial_fit(m, far_coeffs, partial_raw);
  return pfp_predict_noisy_parts(m, far_coeffs, history_resid, fit, partial_raw - fit, h);
}

inline NoisyPrediction pfp_predict_noisy(const PfpModel& m, const DiscreteSample& raw_history, const Vector& partial_raw,
                                         Index h) {
  if (!m.error_model) throw StateError("PFP model has no error model");
  const SmoothResult sm = smooth(raw_history, m.far.es.basis);
  const Vector far_values = m.far.es.basis->eval * predict_curve(m.far, sm.series, 1);
  return pfp_predict_noisy_with(m, far_values, sm.residuals.values, partial_raw, h);
}

/// Curves with time support shifted by tau: the (tau,1] block of curve m
/// followed by the [0,tau] block of curve m + 1, on a nodal basis. With a
/// partial observation of the next curve the last recombined curve uses it,
/// giving n curves; without one there are n - 1.
inline FunctionalSeries moving_block_series(const FunctionalSeries& history, double tau,
                                            const std::optional<Vector>& partial = std::nullopt) {
  const Grid& g = history.grid();
  const auto head = g.indices_in(predictor_domain(tau));
  const auto tail = g.indices_in(response_domain(tau));
  if (tail.size() < 2) throw InvalidArgument("fewer than two grid points after tau");
  if (partial && partial->size() != static_cast<Index>(head.size()))
    throw ShapeError("partial observation does not match the predictor grid");
  const Index J = g.size();
  const Matrix vals = history.values();
  const Index n = history.size();
  const Index rows = partial ? n : n - 1;
  if (rows < 1) throw InvalidArgument("not enough curves to recombine");
  Matrix out(rows, J);
  for (Index m = 0; m < rows; ++m) {
    Index c = 0;
    for (Index j : tail) out(m, c++) = vals(m, j);
    for (std::size_t i = 0; i < head.size(); ++i)
      out(m, c++) = (m + 1 < n) ? vals(m + 1, head[i]) : (*partial)[static_cast<Index>(i)];
  }
  Vector pts(J), w(J);
  Index c = 0;
  for (Index j : tail) {
    pts[c] = static_cast<double>(c) / static_cast<double>(J - 1);
    w[c++] = g.weights()[j];
  }
  for (Index j : head) {
    pts[c] = static_cast<double>(c) / static_cast<double>(J - 1);
    w[c++] = g.weights()[j];
  }
  return FunctionalSeries(nodal_basis(Grid(std::move(pts), std::move(w))), std::move(out));
}

/// Moving-block competitor: FAR(p, d) on the recombined curves; the leading
/// block of the predicted recombined curve is the (tau,1] prediction.
inline Vector moving_block_predict(const FunctionalSeries& history, double tau, Index p, Index d, const Vector& partial) {
  const FunctionalSeries rec = moving_block_series(history, tau, partial);
  const FarModel m = fit_far(rec, p, d);
  const Vector next = predict_curve(m, rec, 1);
  const auto tail = history.grid().indices_in(response_domain(tau));
  return rec.basis().eval.topRows(static_cast<Index>(tail.size())) * next;
}

}  // namespace pfp
