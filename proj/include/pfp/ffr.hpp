#pragma once

/// @file ffr.hpp
/// Fully functional linear regression between a predictor domain and a
/// response domain, estimated in principal component score space.
///
/// With predictor scores xi (n x dx) and response scores zeta (n x dy) the
/// coefficient matrix is B = zeta' xi (xi' xi)^{-1}, i.e. dy separate least
/// squares regressions. Both sides are centered by their own sample means.

#include <limits>
#include <vector>

#include "pfp/far.hpp"
#include "pfp/fpca.hpp"

namespace pfp {

struct FfrModel {
  double tau = 0.5;
  Index dx = 1;
  Index dy = 1;
  Index n = 0;
  EigenSystem pred_es;
  EigenSystem resp_es;
  Matrix B;              ///< dy x dx
  Matrix resid_cov;      ///< dy x dy, divisor n - dx
  double resid_ss = 0.0; ///< tr(Z Z') / n of the in-sample score residuals
  Matrix resid_scores;   ///< n x dy in-sample score residuals

  const Vector& resp_mean() const { return resp_es.mean; }
  const Vector& pred_mean() const { return pred_es.mean; }
};

namespace detail {

/// Least squares of `Y` (n x q) on the first dx columns of `xi`.
inline Matrix score_regression(const Matrix& xi, const Matrix& Y, Index dx) {
  const Matrix X = xi.leftCols(dx);
  const Matrix xtx = X.transpose() * X;
  Eigen::LDLT<Matrix> ldlt(xtx);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-12)
    throw NumericalError("singular predictor score cross-product");
  return ldlt.solve(X.transpose() * Y).transpose();  // q x dx
}

}  // namespace detail

inline FfrModel fit_ffr(const EigenSystem& xes, const EigenSystem& yes, Index dx, Index dy) {
  const Index n = xes.size();
  if (yes.size() != n) throw ShapeError("predictor and response samples differ in size");
  if (dx < 1 || dx > xes.dim()) throw InvalidArgument("predictor dimension out of range");
  if (dy < 1 || dy > yes.dim()) throw InvalidArgument("response dimension out of range");
  if (n <= dx + 1) throw InvalidArgument("regression needs more curves than dx + 1");

  FfrModel m;
  m.tau = xes.domain().hi;
  m.dx = dx;
  m.dy = dy;
  m.n = n;
  m.pred_es = xes;
  m.resp_es = yes;
  const Matrix zeta = yes.scores.leftCols(dy);
  m.B = detail::score_regression(xes.scores, zeta, dx);
  m.resid_scores = zeta - xes.scores.leftCols(dx) * m.B.transpose();
  const Matrix zz = m.resid_scores.transpose() * m.resid_scores;
  m.resid_ss = zz.trace() / static_cast<double>(n);
  m.resid_cov = zz / static_cast<double>(n - dx);
  return m;
}

/// Regression of Y (response domain) on X (predictor domain).
inline FfrModel fit_ffr(const FunctionalSeries& X, const FunctionalSeries& Y, Index dx, Index dy) {
  if (X.size() != Y.size()) throw ShapeError("predictor and response samples differ in size");
  if (X.size() <= dx) throw InvalidArgument("regression needs more curves than dx");
  return fit_ffr(fpca(X), fpca(Y), dx, dy);
}

/// Response coefficients predicted from predictor scores.
inline Vector predict_ffr_scores(const FfrModel& m, const Vector& xi) {
  return m.resp_es.mean + m.resp_es.eigenfunctions.leftCols(m.dy) * (m.B * xi.head(m.dx));
}

/// Prediction from a predictor curve given as coefficients of the predictor basis.
inline Vector predict_ffr(const FfrModel& m, const Vector& x_coeffs) {
  if (x_coeffs.size() != m.pred_es.basis->dim()) throw ShapeError("predictor curve does not match the model's predictor basis");
  return predict_ffr_scores(m, scores_of(m.pred_es, x_coeffs));
}

/// Prediction from a predictor curve given by its values on the predictor grid.
inline Vector predict_ffr_values(const FfrModel& m, const Vector& x_values) {
  if (x_values.size() != m.pred_es.basis->grid.size()) throw ShapeError("predictor values do not match the predictor grid");
  return predict_ffr_scores(m, scores_of_values(m.pred_es, x_values));
}

/// (n + dx)/(n - dx) tr(Sigma_z) + sum_{l > dy} lambda_l^Y, with Sigma_z the
/// score residual covariance normalised by n.
inline double ffpe_r(const FfrModel& m) {
  const double n = static_cast<double>(m.n), dx = static_cast<double>(m.dx);
  return (n + dx) / (n - dx) * m.resid_ss + m.resp_es.tail_sum(m.dy);
}

inline double ffpe_r(const FunctionalSeries& X, const FunctionalSeries& Y, Index dx, Index dy) {
  return ffpe_r(fit_ffr(X, Y, dx, dy));
}

/// Values of beta(s, t) on the predictor x response grid.
struct KernelSurface {
  Vector s;
  Vector t;
  Matrix values;  ///< |s| x |t|
};

inline KernelSurface kernel_surface(const FfrModel& m) {
  const Matrix phi = m.pred_es.eigenfunction_values().leftCols(m.dx);
  const Matrix psi = m.resp_es.eigenfunction_values().leftCols(m.dy);
  return {m.pred_es.basis->grid.points(), m.resp_es.basis->grid.points(), phi * m.B.transpose() * psi.transpose()};
}

struct FfrSelection {
  Index dx = 1;
  Index dy = 1;
  double value = 0.0;
  Matrix table;  ///< dxMax x dyMax, +inf where infeasible
};

/// argmin of ffpe_r over [1, dxMax] x [1, dyMax]; ties go to smaller dx, then smaller dy.
inline FfrSelection select_dims(const EigenSystem& xes, const EigenSystem& yes, Index dxMax, Index dyMax) {
  if (dxMax < 1 || dyMax < 1) throw InvalidArgument("dimension bounds must be at least 1");
  const Index n = xes.size();
  if (yes.size() != n) throw ShapeError("predictor and response samples differ in size");
  dxMax = std::min(dxMax, xes.dim());
  dyMax = std::min(dyMax, yes.dim());
  FfrSelection sel;
  sel.table = Matrix::Constant(dxMax, dyMax, std::numeric_limits<double>::infinity());
  sel.value = std::numeric_limits<double>::infinity();
  const double nn = static_cast<double>(n);
  for (Index dx = 1; dx <= dxMax; ++dx) {
    if (n <= dx + 1) break;
    Matrix coef;
    try {
      coef = detail::score_regression(xes.scores, yes.scores.leftCols(dyMax), dx);
    } catch (const NumericalError&) {
      continue;
    }
    const Matrix resid = yes.scores.leftCols(dyMax) - xes.scores.leftCols(dx) * coef.transpose();
    const Vector rss = resid.colwise().squaredNorm().transpose() / nn;
    const double factor = (nn + static_cast<double>(dx)) / (nn - static_cast<double>(dx));
    double acc = 0.0;
    for (Index dy = 1; dy <= dyMax; ++dy) {
      acc += rss[dy - 1];
      const double v = factor * acc + yes.tail_sum(dy);
      sel.table(dx - 1, dy - 1) = v;
      if (v < sel.value) {
        sel.value = v;
        sel.dx = dx;
        sel.dy = dy;
      }
    }
  }
  if (!std::isfinite(sel.value)) throw NumericalError("no feasible (dx, dy) in the selection range");
  return sel;
}

inline FfrSelection select_dims(const FunctionalSeries& X, const FunctionalSeries& Y, Index dxMax, Index dyMax) {
  return select_dims(fpca(X), fpca(Y), dxMax, dyMax);
}

/// Default upper bound for dimension searches: min(D, n / 4).
inline Index default_dim_cap(Index D, Index n) { return std::max<Index>(1, std::min(D, n / 4)); }

struct JointRanges {
  Index p_min = 0;
  Index p_max = 2;
  Index d_min = 1;
  Index d_max = 10;
  Index dx_max = 10;
  Index dy_max = 10;
};

struct JointCell {
  FarSpec spec;
  FfrSelection dims;
};

struct JointSelection {
  Index p = 0, d = 1, dx = 1, dy = 1;
  double value = 0.0;
  std::vector<JointCell> cells;  ///< best (dx, dy) per feasible (p, d)
};

/// Candidate FAR specifications of a joint search, p-major.
inline std::vector<FarSpec> joint_specs(const JointRanges& r) {
  std::vector<FarSpec> specs;
  for (Index p = r.p_min; p <= r.p_max; ++p)
    for (Index d = r.d_min; d <= r.d_max; ++d) specs.push_back({p, d});
  return specs;
}

/// Joint criterion over precomputed training residual sets (one per FAR
/// specification): for each, the residual curves are split at tau and the
/// regression criterion is minimised over (dx, dy).
inline JointSelection ffpe_joint(const std::vector<ResidualSet>& sets, double tau, Index dxMax, Index dyMax) {
  JointSelection out;
  out.value = std::numeric_limits<double>::infinity();
  for (const ResidualSet& rs : sets) {
    FfrSelection sel;
    try {
      const auto [X, Y] = split_at(rs.residuals, tau);
      sel = select_dims(fpca(X), fpca(Y), dxMax, dyMax);
    } catch (const NumericalError&) {
      continue;
    }
    out.cells.push_back({rs.spec, sel});
    if (sel.value < out.value) {
      out.value = sel.value;
      out.p = rs.spec.p;
      out.d = rs.spec.d;
      out.dx = sel.dx;
      out.dy = sel.dy;
    }
  }
  if (out.cells.empty()) throw NumericalError("no feasible cell in the joint selection grid");
  return out;
}

/// Joint selection of (p, d, dx, dy) on `series`: sliding residuals with the
/// given window for targets [first, last] are computed for every (p, d) and
/// scored by the regression criterion.
inline JointSelection ffpe_joint(const FunctionalSeries& series, double tau, const JointRanges& ranges, Index window,
                                 Index first, Index last) {
  std::vector<FarSpec> specs;
  for (const FarSpec& s : joint_specs(ranges))
    if (window - s.p - s.p * s.d >= 1 && window > s.p * s.d + 1 && s.d <= series.dim()) specs.push_back(s);
  if (specs.empty()) throw InvalidArgument("no FAR specification fits the window");
  return ffpe_joint(sliding_residuals(series, specs, window, first, last), tau, ranges.dx_max, ranges.dy_max);
}

}  // namespace pfp
