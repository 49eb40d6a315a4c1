#pragma once

/// @file bootstrap.hpp
/// Residual bootstrap prediction bands for the intraday update, and the
/// interval score used to evaluate them.
///
/// The prediction residual curves are split into their first d_e principal
/// component score vectors and the remainder curves. Both pools are resampled
/// independently with replacement, the residual regression is refitted on
/// every bootstrap sample, and each replicate prediction adds one resampled
/// in-sample regression residual so the bands cover the next curve rather
/// than only the regression estimate.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "pfp/ffr.hpp"
#include "pfp/pfp.hpp"
#include "pfp/parallel.hpp"
#include "pfp/rng.hpp"

namespace pfp {

struct BootstrapOptions {
  Index replicates = 1000;
  double alpha = 0.05;
  double var_threshold = 0.80;
  std::uint64_t seed = 1;
  /// Add a resampled in-sample regression residual to every replicate.
  bool include_remainder = true;
  bool keep_replicates = false;
  unsigned threads = 1;
};

/// One refitted regression, reduced to what prediction needs.
struct BootstrapReplicate {
  Vector pred_mean;  ///< predictor mean on the predictor grid
  Matrix score_map;  ///< dx x Jp, maps centered predictor values to scores
  Vector resp_mean;  ///< response mean on the response grid
  Matrix resp_map;   ///< Jr x dx, maps predictor scores to response values
  Index remainder = 0;

  Vector predict(const Vector& x) const { return resp_mean + resp_map * (score_map * (x - pred_mean)); }
};

struct BootstrapEnsemble {
  double tau = 0.5;
  Index dx = 1, dy = 1, d_e = 0;
  Vector t;            ///< response grid
  Matrix remainders;   ///< n x Jr in-sample regression residual curves
  Vector fixed_update; ///< response values of the deterministic update, degenerate case
  bool degenerate = false;
  bool include_remainder = true;
  std::vector<BootstrapReplicate> replicates;
  std::vector<std::string> warnings;
};

struct BootstrapBands {
  double alpha = 0.05;
  Vector t;
  Vector lower;
  Vector upper;
  Index replicates = 0;
  Index d_e = 0;
  Matrix draws;  ///< B x Jr, kept only on request
  std::vector<std::string> warnings;

  double mean_width() const { return (upper - lower).mean(); }
};

namespace detail {

inline BootstrapReplicate compact(const FfrModel& f) {
  BootstrapReplicate r;
  const BasisSystem& pb = *f.pred_es.basis;
  const BasisSystem& rb = *f.resp_es.basis;
  r.pred_mean = pb.eval * f.pred_es.mean;
  r.score_map = (pb.eval * f.pred_es.eigenfunctions.leftCols(f.dx)).transpose() * pb.grid.weights().asDiagonal();
  r.resp_mean = rb.eval * f.resp_es.mean;
  r.resp_map = rb.eval * f.resp_es.eigenfunctions.leftCols(f.dy) * f.B;
  return r;
}

}  // namespace detail

/// Type-7 empirical quantile of a sorted sample.
inline double quantile_sorted(const std::vector<double>& x, double prob) {
  if (x.empty()) throw InvalidArgument("quantile of an empty sample");
  const double h = (static_cast<double>(x.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

/// Refits the intraday regression on B resampled residual sets.
inline BootstrapEnsemble bootstrap_ensemble(const FunctionalSeries& residuals, double tau, Index dx, Index dy,
                                            const BootstrapOptions& opt) {
  if (opt.replicates < 100) throw InvalidArgument("bootstrap needs at least 100 replicates");
  if (!(opt.alpha > 0.0 && opt.alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  if (!(opt.var_threshold > 0.0 && opt.var_threshold <= 1.0)) throw InvalidArgument("variance threshold must lie in (0, 1]");
  const Index n = residuals.size();
  BootstrapEnsemble ens;
  ens.tau = tau;
  ens.dx = dx;
  ens.dy = dy;
  ens.include_remainder = opt.include_remainder;

  const EigenSystem es = fpca(residuals);
  const BasisPtr rb = restrict_basis(residuals.basis(), response_domain(tau));
  ens.t = rb->grid.points();
  const double scale = 1.0 + es.mean.squaredNorm();
  if (es.eigenvalues.sum() <= 1e-14 * scale) {
    ens.degenerate = true;
    ens.fixed_update = rb->eval * restrict_coeffs(*rb, es.mean);
    ens.remainders = Matrix::Zero(1, rb->grid.size());
    ens.warnings.push_back("degenerate residuals: bootstrap bands have zero width");
    return ens;
  }
  ens.d_e = es.components_for(opt.var_threshold);

  const Matrix xi = es.scores.leftCols(ens.d_e);
  const Matrix phi = es.eigenfunctions.leftCols(ens.d_e);
  const Matrix centered = residuals.coeffs().rowwise() - es.mean.transpose();
  const Matrix rest = centered - xi * phi.transpose();

  // In-sample regression residual curves of the original fit.
  {
    const auto [X, Y] = split_at(residuals, tau);
    const FfrModel f = fit_ffr(X, Y, dx, dy);
    const Matrix fitted_scores = f.pred_es.scores.leftCols(dx) * f.B.transpose();
    const Matrix fitted = (fitted_scores * f.resp_es.eigenfunctions.leftCols(dy).transpose()).rowwise() +
                          f.resp_es.mean.transpose();
    ens.remainders = (Y.coeffs() - fitted) * Y.basis().eval.transpose();
  }

  // A resample whose refit is singular is redrawn from the same stream.
  constexpr int kAttempts = 20;
  ens.replicates.resize(static_cast<std::size_t>(opt.replicates));
  std::vector<std::string> errors(static_cast<std::size_t>(opt.replicates));
  std::vector<int> redraws(static_cast<std::size_t>(opt.replicates), 0);
  parallel_for(opt.replicates, opt.threads, [&](Index b) {
    auto rng = make_stream(opt.seed, {key(StreamPurpose::Bootstrap), static_cast<std::uint64_t>(b)});
    std::uniform_int_distribution<Index> pick(0, n - 1);
    const auto ub = static_cast<std::size_t>(b);
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
      Matrix coeffs(n, residuals.dim());
      for (Index i = 0; i < n; ++i) {
        const Index a = pick(rng), c = pick(rng);
        coeffs.row(i) = es.mean.transpose() + xi.row(a) * phi.transpose() + rest.row(c);
      }
      const Index rem = pick(rng);
      try {
        const auto [X, Y] = split_at(FunctionalSeries(residuals.basis_ptr(), std::move(coeffs)), tau);
        BootstrapReplicate r = detail::compact(fit_ffr(X, Y, dx, dy));
        r.remainder = rem;
        ens.replicates[ub] = std::move(r);
        errors[ub].clear();
        return;
      } catch (const Error& e) {
        errors[ub] = e.what();
        ++redraws[ub];
      }
    }
  });
  for (const auto& e : errors)
    if (!e.empty()) throw NumericalError("bootstrap replicate failed: " + e);
  int total = 0;
  for (int r : redraws) total += r;
  if (total > 0) ens.warnings.push_back(std::to_string(total) + " singular bootstrap resamples were redrawn");
  return ens;
}

/// Pointwise alpha/2 and 1 - alpha/2 quantiles of replicate predictions (rows).
inline BootstrapBands bands_from_draws(const Matrix& draws, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  BootstrapBands out;
  out.alpha = alpha;
  out.replicates = draws.rows();
  out.lower.resize(draws.cols());
  out.upper.resize(draws.cols());
  std::vector<double> col(static_cast<std::size_t>(draws.rows()));
  for (Index j = 0; j < draws.cols(); ++j) {
    for (Index b = 0; b < draws.rows(); ++b) col[static_cast<std::size_t>(b)] = draws(b, j);
    std::sort(col.begin(), col.end());
    out.lower[j] = quantile_sorted(col, alpha / 2.0);
    out.upper[j] = quantile_sorted(col, 1.0 - alpha / 2.0);
  }
  return out;
}

/// Replicate predictions far_part + update_b(observed residual) [+ remainder_b].
inline Matrix bootstrap_draws(const BootstrapEnsemble& ens, const Vector& far_part, const Vector& observed_residual) {
  if (far_part.size() != ens.t.size()) throw ShapeError("full-curve part does not match the response grid");
  const auto B = static_cast<Index>(ens.replicates.size());
  if (ens.degenerate) return (far_part + ens.fixed_update).transpose();
  Matrix draws(B, ens.t.size());
  for (Index b = 0; b < B; ++b) {
    const BootstrapReplicate& r = ens.replicates[static_cast<std::size_t>(b)];
    if (observed_residual.size() != r.pred_mean.size()) throw ShapeError("observed residual does not match the predictor grid");
    Vector y = far_part + r.predict(observed_residual);
    if (ens.include_remainder) y += ens.remainders.row(r.remainder).transpose();
    draws.row(b) = y.transpose();
  }
  return draws;
}

inline BootstrapBands bootstrap_bands(const BootstrapEnsemble& ens, const Vector& far_part, const Vector& observed_residual,
                                      double alpha, bool keep_draws = false) {
  Matrix draws = bootstrap_draws(ens, far_part, observed_residual);
  BootstrapBands out = bands_from_draws(draws, alpha);
  out.t = ens.t;
  out.d_e = ens.d_e;
  out.replicates = static_cast<Index>(ens.replicates.size());
  out.warnings = ens.warnings;
  if (keep_draws) out.draws = std::move(draws);
  return out;
}

/// Bands for a PFP prediction from the model's training residuals.
inline BootstrapBands bootstrap_bands(const PfpModel& model, const PfpPrediction& pred, const BootstrapOptions& opt) {
  const BootstrapEnsemble ens =
      bootstrap_ensemble(model.training.residuals, model.tau, model.residual_ffr.dx, model.residual_ffr.dy, opt);
  return bootstrap_bands(ens, pred.far_part, pred.observed_residual, opt.alpha, opt.keep_replicates);
}

/// Interval score: width plus 2/alpha times the exceedance on either side.
inline double interval_score(double u, double l, double y, double alpha) {
  if (u < l) throw InvalidArgument("upper bound below lower bound");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  double s = u - l;
  if (y > u) s += 2.0 / alpha * (y - u);
  if (l > y) s += 2.0 / alpha * (l - y);
  return s;
}

/// Mean interval score over every grid point of every target.
inline double averaged_score(const std::vector<BootstrapBands>& bands, const std::vector<Vector>& truths, double alpha) {
  if (bands.size() != truths.size() || bands.empty()) throw ShapeError("bands and truths differ in count");
  double sum = 0.0;
  Index count = 0;
  for (std::size_t k = 0; k < bands.size(); ++k) {
    const auto& b = bands[k];
    if (truths[k].size() != b.lower.size()) throw ShapeError("truth does not match the band grid");
    for (Index j = 0; j < b.lower.size(); ++j) sum += interval_score(b.upper[j], b.lower[j], truths[k][j], alpha);
    count += b.lower.size();
  }
  return sum / static_cast<double>(count);
}

/// Fraction of grid points of every target inside its band.
inline double coverage(const std::vector<BootstrapBands>& bands, const std::vector<Vector>& truths) {
  if (bands.size() != truths.size() || bands.empty()) throw ShapeError("bands and truths differ in count");
  Index inside = 0, count = 0;
  for (std::size_t k = 0; k < bands.size(); ++k)
    for (Index j = 0; j < bands[k].lower.size(); ++j) {
      inside += (truths[k][j] >= bands[k].lower[j] && truths[k][j] <= bands[k].upper[j]) ? 1 : 0;
      ++count;
    }
  return static_cast<double>(inside) / static_cast<double>(count);
}

}  // namespace pfp
