#pragma once

/// @file far.hpp
/// Full-curve FAR(p) prediction through a VAR(p) on principal component scores.

#include <Eigen/Eigenvalues>

#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "pfp/fpca.hpp"

namespace pfp {

struct FarSpec {
  Index p = 1;  ///< VAR order, 0 predicts the mean
  Index d = 1;  ///< number of principal components
  bool operator==(const FarSpec&) const = default;
};

struct FarModel {
  Index p = 0;
  Index d = 1;
  Index n = 0;  ///< curves used in the fit
  EigenSystem es;
  std::vector<Matrix> coef;  ///< Phi_1..Phi_p, each d x d
  Vector intercept;          ///< d
  Matrix innov_cov;          ///< d x d
  double spectral_radius = 0.0;
  std::vector<std::string> warnings;

  bool stationary() const { return spectral_radius < 1.0; }
};

namespace detail {

inline double companion_radius(const std::vector<Matrix>& coef, Index d) {
  const Index p = static_cast<Index>(coef.size());
  if (p == 0) return 0.0;
  Matrix comp = Matrix::Zero(p * d, p * d);
  for (Index l = 0; l < p; ++l) comp.block(0, l * d, d, d) = coef[static_cast<std::size_t>(l)];
  if (p > 1) comp.bottomLeftCorner((p - 1) * d, (p - 1) * d).setIdentity();
  Eigen::EigenSolver<Matrix> es(comp, false);
  if (es.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace detail

/// VAR(p) by multivariate least squares on the first d scores of `es`.
///
/// Each equation has an intercept and p*d lag regressors; the innovation
/// covariance uses divisor n - p - p*d.
inline FarModel fit_far(const EigenSystem& es, Index p, Index d) {
  const Index n = es.size();
  if (p < 0) throw InvalidArgument("FAR order must be non-negative");
  if (d < 1 || d > es.dim()) throw InvalidArgument("FAR dimension out of range");
  if (n - p - p * d < 1 || n <= p * d + 1) throw InvalidArgument("too few curves for the requested FAR order and dimension");

  FarModel m;
  m.p = p;
  m.d = d;
  m.n = n;
  m.es = es;
  const Matrix S = es.scores.leftCols(d);

  if (p == 0) {
    m.intercept = S.colwise().mean().transpose();
    const Matrix r = S.rowwise() - m.intercept.transpose();
    m.innov_cov = r.transpose() * r / static_cast<double>(n);
    return m;
  }

  const Index rows = n - p, k = 1 + p * d;
  Matrix X(rows, k), Y = S.bottomRows(rows);
  for (Index t = 0; t < rows; ++t) {
    X(t, 0) = 1.0;
    for (Index l = 1; l <= p; ++l) X.block(t, 1 + (l - 1) * d, 1, d) = S.row(p + t - l);
  }
  const Matrix xtx = X.transpose() * X;
  Eigen::LDLT<Matrix> ldlt(xtx);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-13)
    throw NumericalError("singular lagged score cross-product");
  const Matrix beta = ldlt.solve(X.transpose() * Y);  // k x d
  m.intercept = beta.row(0).transpose();
  for (Index l = 0; l < p; ++l) m.coef.push_back(beta.middleRows(1 + l * d, d).transpose());
  const Matrix r = Y - X * beta;
  m.innov_cov = r.transpose() * r / static_cast<double>(n - p - p * d);
  m.innov_cov = 0.5 * (m.innov_cov + m.innov_cov.transpose()).eval();
  m.spectral_radius = detail::companion_radius(m.coef, d);
  if (!m.stationary()) {
    std::ostringstream os;
    os << "fitted VAR companion spectral radius " << m.spectral_radius << " >= 1";
    m.warnings.push_back(os.str());
  }
  return m;
}

inline FarModel fit_far(const FunctionalSeries& series, Index p, Index d) { return fit_far(fpca(series), p, d); }

/// h-step score prediction from the last p score vectors (rows of `history`,
/// oldest first).
inline Vector predict_scores(const FarModel& m, const Matrix& history, Index h) {
  if (h < 1) throw InvalidArgument("prediction horizon must be at least 1");
  if (history.rows() < m.p) throw InvalidArgument("history shorter than the FAR order");
  if (m.p == 0) return m.intercept;
  std::vector<Vector> lags;  // lags[0] most recent
  for (Index l = 0; l < m.p; ++l) lags.push_back(history.row(history.rows() - 1 - l).head(m.d).transpose());
  Vector next;
  for (Index step = 0; step < h; ++step) {
    next = m.intercept;
    for (Index l = 0; l < m.p; ++l) next += m.coef[static_cast<std::size_t>(l)] * lags[static_cast<std::size_t>(l)];
    lags.insert(lags.begin(), next);
    lags.pop_back();
  }
  return next;
}

/// h-step-ahead curve prediction, returned as coefficients in the model basis.
inline Vector predict_curve(const FarModel& m, const FunctionalSeries& history, Index h) {
  if (h < 1) throw InvalidArgument("prediction horizon must be at least 1");
  if (!same_basis(history.basis(), *m.es.basis)) throw ShapeError("history basis differs from the model basis");
  if (history.size() < m.p) throw InvalidArgument("history shorter than the FAR order");
  if (m.p == 0) return reconstruct(m.es, m.intercept, m.d);
  Matrix hs(m.p, m.d);
  for (Index l = 0; l < m.p; ++l) {
    const Index k = history.size() - m.p + l;
    hs.row(l) = scores_of(m.es, history.coeffs().row(k).transpose()).head(m.d).transpose();
  }
  return reconstruct(m.es, predict_scores(m, hs, h), m.d);
}

/// Functional final prediction error: (n + p d)/n tr(Sigma_e) + sum_{l > d} lambda_l.
inline double ffpe_ts(const FarModel& m) {
  const double n = static_cast<double>(m.n);
  return (n + static_cast<double>(m.p * m.d)) / n * m.innov_cov.trace() + m.es.tail_sum(m.d);
}

inline double ffpe_ts(const FunctionalSeries& series, Index p, Index d) { return ffpe_ts(fit_far(series, p, d)); }

struct FarSelection {
  FarSpec spec;
  double value = 0.0;
  Matrix table;  ///< (pMax + 1) x dMax, +inf where the fit is infeasible
};

/// argmin of ffpe_ts over p in [0, pMax], d in [1, dMax]; ties go to smaller p, then smaller d.
inline FarSelection select_far(const EigenSystem& es, Index pMax, Index dMax) {
  if (pMax < 0 || dMax < 1) throw InvalidArgument("selection bounds must be p >= 0, d >= 1");
  dMax = std::min(dMax, es.dim());
  FarSelection sel;
  sel.table = Matrix::Constant(pMax + 1, dMax, std::numeric_limits<double>::infinity());
  sel.value = std::numeric_limits<double>::infinity();
  for (Index p = 0; p <= pMax; ++p)
    for (Index d = 1; d <= dMax; ++d) {
      double v = std::numeric_limits<double>::infinity();
      try {
        v = ffpe_ts(fit_far(es, p, d));
      } catch (const Error&) {
        continue;
      }
      sel.table(p, d - 1) = v;
      if (v < sel.value) {
        sel.value = v;
        sel.spec = {p, d};
      }
    }
  if (!std::isfinite(sel.value)) throw NumericalError("no feasible (p, d) in the selection range");
  return sel;
}

inline FarSelection select_far(const FunctionalSeries& series, Index pMax, Index dMax) {
  return select_far(fpca(series), pMax, dMax);
}

/// One-step prediction residuals from a sliding window.
struct ResidualSet {
  FunctionalSeries residuals;    ///< eps_k = Y_k - Yhat_k, one row per target
  FunctionalSeries predictions;  ///< Yhat_k
  Index window = 0;
  Index first_target = 0;  ///< 0-based index of the first target curve
  FarSpec spec;

  Index size() const { return residuals.size(); }
};

/// For each target k in [first, last] (0-based, inclusive) fit FAR on curves
/// k - window .. k - 1 and predict curve k one step ahead.
inline ResidualSet sliding_residuals(const FunctionalSeries& series, FarSpec spec, Index window, Index first, Index last) {
  if (window < 2) throw InvalidArgument("window must hold at least two curves");
  if (first > last) throw InvalidArgument("empty target range");
  if (first - window < 0) throw InvalidArgument("window exceeds the history available before the first target");
  if (last >= series.size()) throw InvalidArgument("target beyond the end of the series");
  const Index count = last - first + 1;
  Matrix pred(count, series.dim()), resid(count, series.dim());
  for (Index i = 0; i < count; ++i) {
    const Index k = first + i;
    const FunctionalSeries hist = series.slice(k - window, window);
    const FarModel m = fit_far(hist, spec.p, spec.d);
    pred.row(i) = predict_curve(m, hist, 1).transpose();
    resid.row(i) = series.coeffs().row(k) - pred.row(i);
  }
  return {FunctionalSeries(series.basis_ptr(), std::move(resid)), FunctionalSeries(series.basis_ptr(), std::move(pred)),
          window, first, spec};
}

/// Sliding residuals for several FAR specifications at once; the FPCA of
/// each window is computed once and shared.
inline std::vector<ResidualSet> sliding_residuals(const FunctionalSeries& series, const std::vector<FarSpec>& specs,
                                                  Index window, Index first, Index last) {
  if (window < 2) throw InvalidArgument("window must hold at least two curves");
  if (first > last) throw InvalidArgument("empty target range");
  if (first - window < 0) throw InvalidArgument("window exceeds the history available before the first target");
  if (last >= series.size()) throw InvalidArgument("target beyond the end of the series");
  const Index count = last - first + 1;
  std::vector<Matrix> pred(specs.size(), Matrix(count, series.dim()));
  for (Index i = 0; i < count; ++i) {
    const Index k = first + i;
    const FunctionalSeries hist = series.slice(k - window, window);
    const EigenSystem es = fpca(hist);
    for (std::size_t s = 0; s < specs.size(); ++s) {
      const FarModel m = fit_far(es, specs[s].p, specs[s].d);
      pred[s].row(i) = predict_curve(m, hist, 1).transpose();
    }
  }
  std::vector<ResidualSet> out;
  for (std::size_t s = 0; s < specs.size(); ++s) {
    Matrix resid = series.coeffs().middleRows(first, count) - pred[s];
    out.push_back({FunctionalSeries(series.basis_ptr(), std::move(resid)),
                   FunctionalSeries(series.basis_ptr(), std::move(pred[s])), window, first, specs[s]});
  }
  return out;
}

}  // namespace pfp
