#pragma once

/// @file funkdata.hpp
/// Grids, quadrature inner products, basis systems and functional series.
///
/// Every curve in the library lives on a discrete grid of [0,1] equipped with
/// trapezoidal quadrature weights. A BasisSystem stores its functions evaluated
/// on that grid together with their Gram matrix under the same quadrature, so
/// inner products computed from coefficients and from grid values agree.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "pfp/error.hpp"

namespace pfp {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Tolerance used when deciding whether a grid point sits on an endpoint.
inline constexpr double kPointTol = 1e-12;

/// A sub-interval of [0,1], closed unless `open_lo` is set.
struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  bool open_lo = false;

  bool contains(double t) const {
    const bool above = open_lo ? t > lo + kPointTol : t >= lo - kPointTol;
    return above && t <= hi + kPointTol;
  }
  bool operator==(const Interval&) const = default;
};

/// [0, tau]. A grid point exactly at tau belongs here.
inline Interval predictor_domain(double tau) { return {0.0, tau, false}; }
/// (tau, 1].
inline Interval response_domain(double tau) { return {tau, 1.0, true}; }

enum class GridLayout {
  Closed,         ///< (j-1)/(J-1), both endpoints included
  RightEndpoint,  ///< j/J
  Midpoint,       ///< (j-0.5)/J
};

/// Ordered evaluation points with positive quadrature weights.
///
/// Grids built by make_grid() carry trapezoidal weights summing to the span.
/// Sub-grids produced by restriction keep the parent's weights, so the
/// quadratures of complementary sub-domains add up to the full one.
class Grid {
 public:
  Grid() = default;

  Grid(Vector points, Vector weights) : points_(std::move(points)), weights_(std::move(weights)) {
    if (points_.size() != weights_.size()) throw ShapeError("grid points and weights differ in length");
    if (points_.size() < 1) throw InvalidArgument("grid must have at least one point");
    for (Index j = 0; j < points_.size(); ++j) {
      if (!std::isfinite(points_[j])) throw InvalidArgument("grid point is not finite");
      if (!(weights_[j] > 0.0)) throw InvalidArgument("grid weights must be positive");
      if (j > 0 && !(points_[j] > points_[j - 1])) throw InvalidArgument("grid points must be strictly increasing");
    }
  }

  /// Trapezoidal weights on arbitrary increasing points.
  static Grid trapezoid(Vector points) {
    const Index J = points.size();
    if (J < 2) throw InvalidArgument("trapezoid grid needs at least two points");
    Vector w = Vector::Zero(J);
    for (Index j = 0; j + 1 < J; ++j) {
      const double h = points[j + 1] - points[j];
      w[j] += 0.5 * h;
      w[j + 1] += 0.5 * h;
    }
    return Grid(std::move(points), std::move(w));
  }

  const Vector& points() const { return points_; }
  const Vector& weights() const { return weights_; }
  Index size() const { return points_.size(); }
  double span() const { return points_[size() - 1] - points_[0]; }

  double integrate(const Vector& f) const {
    if (f.size() != size()) throw ShapeError("curve length does not match grid");
    return weights_.dot(f);
  }

  /// Indices of the points inside `dom`.
  std::vector<Index> indices_in(const Interval& dom) const {
    std::vector<Index> idx;
    for (Index j = 0; j < size(); ++j)
      if (dom.contains(points_[j])) idx.push_back(j);
    return idx;
  }

  Grid subset(const std::vector<Index>& idx) const {
    if (idx.empty()) throw InvalidArgument("empty sub-grid");
    Vector p(static_cast<Index>(idx.size())), w(static_cast<Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      p[static_cast<Index>(i)] = points_[idx[i]];
      w[static_cast<Index>(i)] = weights_[idx[i]];
    }
    return Grid(std::move(p), std::move(w));
  }

  bool operator==(const Grid& o) const {
    return points_.size() == o.points_.size() && points_ == o.points_ && weights_ == o.weights_;
  }

 private:
  Vector points_;
  Vector weights_;
};

/// Equally spaced grid of J points on [0,1] with trapezoidal weights.
inline Grid make_grid(Index J, GridLayout layout = GridLayout::Closed) {
  if (J < 2) throw InvalidArgument("make_grid requires J >= 2");
  Vector p(J);
  for (Index j = 0; j < J; ++j) {
    switch (layout) {
      case GridLayout::Closed: p[j] = static_cast<double>(j) / static_cast<double>(J - 1); break;
      case GridLayout::RightEndpoint: p[j] = static_cast<double>(j + 1) / static_cast<double>(J); break;
      case GridLayout::Midpoint: p[j] = (static_cast<double>(j) + 0.5) / static_cast<double>(J); break;
    }
  }
  return Grid::trapezoid(std::move(p));
}

/// Quadrature inner product of two curves sampled on `grid`.
inline double inner_product(const Grid& grid, const Vector& f, const Vector& g) {
  if (f.size() != grid.size() || g.size() != grid.size()) throw ShapeError("curves do not match the grid");
  return (grid.weights().array() * f.array() * g.array()).sum();
}

inline double inner_product(const Grid& gf, const Vector& f, const Grid& gg, const Vector& g) {
  if (!(gf == gg)) throw ShapeError("inner product of curves on different grids");
  return inner_product(gf, f, g);
}

/// Raw observations: one row per curve, one column per grid point.
struct DiscreteSample {
  Grid grid;
  Matrix values;

  DiscreteSample() = default;
  DiscreteSample(Grid g, Matrix v) : grid(std::move(g)), values(std::move(v)) {
    if (values.cols() != grid.size()) throw ShapeError("sample column count differs from grid length");
    if (!values.allFinite()) throw InvalidArgument("sample contains non-finite values");
  }
  Index size() const { return values.rows(); }
};

enum class BasisKind { Fourier, CubicBSpline, Nodal };

inline std::string to_string(BasisKind k) {
  switch (k) {
    case BasisKind::Fourier: return "fourier";
    case BasisKind::CubicBSpline: return "bspline";
    case BasisKind::Nodal: return "nodal";
  }
  return "?";
}

/// Basis functions evaluated on a grid, with their quadrature Gram matrix.
struct BasisSystem {
  BasisKind kind = BasisKind::Fourier;
  Grid grid;
  Matrix eval;  ///< J x D
  Matrix gram;  ///< D x D
  Interval domain;
  /// For restricted systems: the parent column each column came from.
  std::vector<Index> parent_columns;

  Index dim() const { return eval.cols(); }
};

using BasisPtr = std::shared_ptr<const BasisSystem>;

namespace detail {

inline BasisPtr finish_basis(BasisKind kind, Grid grid, Matrix eval, Interval domain, std::vector<Index> parents) {
  auto b = std::make_shared<BasisSystem>();
  b->kind = kind;
  b->gram = eval.transpose() * grid.weights().asDiagonal() * eval;
  b->gram = 0.5 * (b->gram + b->gram.transpose()).eval();
  b->eval = std::move(eval);
  b->grid = std::move(grid);
  b->domain = domain;
  b->parent_columns = std::move(parents);
  Eigen::LLT<Matrix> llt(b->gram);
  if (llt.info() != Eigen::Success) throw NumericalError("basis Gram matrix is not positive definite on this grid");
  return b;
}

inline std::vector<Index> iota(Index n) {
  std::vector<Index> v(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i;
  return v;
}

// Cox-de Boor recursion for all cubic B-splines on a clamped knot vector.
inline Vector bspline_row(const std::vector<double>& knots, Index D, double t) {
  constexpr int order = 4;
  const auto nk = static_cast<Index>(knots.size());
  Vector b = Vector::Zero(nk - 1);
  const double right = knots.back();
  for (Index i = 0; i + 1 < nk; ++i) {
    const double a = knots[static_cast<std::size_t>(i)], c = knots[static_cast<std::size_t>(i + 1)];
    if (a < c && ((t >= a && t < c) || (t == right && c == right))) {
      b[i] = 1.0;
      if (t == right) break;
    }
  }
  for (int k = 2; k <= order; ++k) {
    for (Index i = 0; i + k < nk; ++i) {
      const double ti = knots[static_cast<std::size_t>(i)];
      const double tik1 = knots[static_cast<std::size_t>(i + k - 1)];
      const double ti1 = knots[static_cast<std::size_t>(i + 1)];
      const double tik = knots[static_cast<std::size_t>(i + k)];
      double v = 0.0;
      if (tik1 > ti) v += (t - ti) / (tik1 - ti) * b[i];
      if (tik > ti1) v += (tik - t) / (tik - ti1) * b[i + 1];
      b[i] = v;
    }
  }
  return b.head(D);
}

}  // namespace detail

/// Fourier system: 1, sqrt2 sin(2 pi m t), sqrt2 cos(2 pi m t), m = 1, 2, ...
inline BasisPtr fourier_basis(const Grid& grid, Index D) {
  if (D < 1) throw InvalidArgument("basis dimension must be positive");
  if (D > grid.size()) throw InvalidArgument("basis dimension exceeds grid length");
  Matrix E(grid.size(), D);
  const double s2 = std::sqrt(2.0);
  for (Index j = 0; j < grid.size(); ++j) {
    const double t = grid.points()[j];
    E(j, 0) = 1.0;
    for (Index c = 1; c < D; ++c) {
      const double m = static_cast<double>((c + 1) / 2);
      E(j, c) = (c % 2 == 1) ? s2 * std::sin(2.0 * std::numbers::pi * m * t) : s2 * std::cos(2.0 * std::numbers::pi * m * t);
    }
  }
  return detail::finish_basis(BasisKind::Fourier, grid, std::move(E), {0.0, 1.0, false}, detail::iota(D));
}

/// Cubic B-splines with D - 4 equally spaced interior knots over the grid range.
inline BasisPtr bspline_basis(const Grid& grid, Index D) {
  if (D < 4) throw InvalidArgument("cubic B-spline basis needs dimension >= 4");
  if (D > grid.size()) throw InvalidArgument("basis dimension exceeds grid length");
  const double a = grid.points()[0], b = grid.points()[grid.size() - 1];
  const Index interior = D - 4;
  std::vector<double> knots;
  for (int i = 0; i < 4; ++i) knots.push_back(a);
  for (Index i = 1; i <= interior; ++i) knots.push_back(a + (b - a) * static_cast<double>(i) / static_cast<double>(interior + 1));
  for (int i = 0; i < 4; ++i) knots.push_back(b);
  Matrix E(grid.size(), D);
  for (Index j = 0; j < grid.size(); ++j) E.row(j) = detail::bspline_row(knots, D, grid.points()[j]).transpose();
  return detail::finish_basis(BasisKind::CubicBSpline, grid, std::move(E), {0.0, 1.0, false}, detail::iota(D));
}

/// One coefficient per grid point; curves are represented by their values.
inline BasisPtr nodal_basis(const Grid& grid) {
  Matrix E = Matrix::Identity(grid.size(), grid.size());
  return detail::finish_basis(BasisKind::Nodal, grid, std::move(E), {0.0, 1.0, false}, detail::iota(grid.size()));
}

inline bool same_basis(const BasisSystem& a, const BasisSystem& b) {
  if (&a == &b) return true;
  return a.kind == b.kind && a.dim() == b.dim() && a.domain == b.domain && a.grid == b.grid;
}

/// Restriction of a basis to the grid points inside `dom`.
///
/// Columns that vanish on the sub-grid are dropped (nodal and B-spline
/// systems), and the Gram matrix is recomputed on the sub-domain.
inline BasisPtr restrict_basis(const BasisSystem& basis, const Interval& dom) {
  if (!(dom.lo >= -kPointTol && dom.hi <= 1.0 + kPointTol && dom.lo < dom.hi))
    throw InvalidArgument("restriction interval must satisfy 0 <= lo < hi <= 1");
  const auto rows = basis.grid.indices_in(dom);
  if (rows.size() < 2) throw InvalidArgument("fewer than two grid points inside the restriction interval");
  Grid sub = basis.grid.subset(rows);
  std::vector<Index> keep;
  for (Index c = 0; c < basis.dim(); ++c) {
    double norm = 0.0;
    for (Index r : rows) norm = std::max(norm, std::abs(basis.eval(r, c)));
    if (norm > 1e-14) keep.push_back(c);
  }
  Matrix E(static_cast<Index>(rows.size()), static_cast<Index>(keep.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < keep.size(); ++c)
      E(static_cast<Index>(i), static_cast<Index>(c)) = basis.eval(rows[i], keep[c]);
  // parent_columns index the immediate parent's columns.
  return detail::finish_basis(basis.kind, std::move(sub), std::move(E), dom, std::move(keep));
}

/// n curves stored as coefficient rows against a shared basis.
class FunctionalSeries {
 public:
  FunctionalSeries() = default;
  FunctionalSeries(BasisPtr basis, Matrix coeffs) : basis_(std::move(basis)), coeffs_(std::move(coeffs)) {
    if (!basis_) throw InvalidArgument("functional series needs a basis");
    if (coeffs_.cols() != basis_->dim()) throw ShapeError("coefficient columns differ from basis dimension");
    if (!coeffs_.allFinite()) throw InvalidArgument("coefficients must be finite");
  }

  const BasisSystem& basis() const { return *basis_; }
  const BasisPtr& basis_ptr() const { return basis_; }
  const Matrix& coeffs() const { return coeffs_; }
  const Grid& grid() const { return basis_->grid; }
  const Interval& domain() const { return basis_->domain; }
  Index size() const { return coeffs_.rows(); }
  Index dim() const { return coeffs_.cols(); }

  /// n x J matrix of curve values on the grid.
  Matrix values() const { return coeffs_ * basis_->eval.transpose(); }
  Vector values(Index k) const { return basis_->eval * coeffs_.row(k).transpose(); }
  Vector evaluate(const Vector& c) const { return basis_->eval * c; }

  /// Curves [first, first + count).
  FunctionalSeries slice(Index first, Index count) const {
    if (first < 0 || count < 0 || first + count > size()) throw InvalidArgument("slice out of range");
    return FunctionalSeries(basis_, coeffs_.middleRows(first, count));
  }

  /// Inner product of curves i and j.
  double inner(Index i, Index j) const { return coeffs_.row(i) * basis_->gram * coeffs_.row(j).transpose(); }

 private:
  BasisPtr basis_;
  Matrix coeffs_;
};

struct SmoothResult {
  FunctionalSeries series;
  DiscreteSample residuals;  ///< raw minus smoothed values at the grid points
};

namespace detail {

/// Quadrature-weighted least-squares coefficients for each row of `values`.
inline Matrix project_onto_basis(const BasisSystem& basis, const Matrix& values) {
  const Matrix rhs = basis.eval.transpose() * basis.grid.weights().asDiagonal() * values.transpose();
  Eigen::LDLT<Matrix> ldlt(basis.gram);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.rcond() > 1e-10) return ldlt.solve(rhs).transpose();
  // Ill-conditioned normal equations: pivoted QR on the weighted design.
  const Vector sw = basis.grid.weights().array().sqrt();
  const Matrix A = sw.asDiagonal() * basis.eval;
  Eigen::ColPivHouseholderQR<Matrix> qr(A);
  if (qr.rank() < basis.dim()) throw NumericalError("basis evaluation matrix is rank deficient");
  return qr.solve(sw.asDiagonal() * values.transpose()).transpose();
}

}  // namespace detail

/// Least-squares projection of raw curves onto a basis.
inline SmoothResult smooth(const DiscreteSample& raw, const BasisPtr& basis) {
  if (!(raw.grid == basis->grid)) throw ShapeError("basis grid does not match the sample grid");
  if (basis->dim() > raw.grid.size()) throw InvalidArgument("basis dimension exceeds grid length");
  Matrix coeffs = detail::project_onto_basis(*basis, raw.values);
  FunctionalSeries series(basis, std::move(coeffs));
  Matrix resid = raw.values - series.values();
  return {std::move(series), DiscreteSample(raw.grid, std::move(resid))};
}

/// Coefficients of one curve given by its values on the basis grid.
inline Vector project_curve(const BasisSystem& basis, const Vector& values) {
  if (values.size() != basis.grid.size()) throw ShapeError("curve length does not match basis grid");
  return detail::project_onto_basis(basis, values.transpose()).row(0).transpose();
}

/// Restriction of every curve to the grid points inside `dom`.
inline FunctionalSeries restrict(const FunctionalSeries& series, const Interval& dom) {
  BasisPtr sub = restrict_basis(series.basis(), dom);
  Matrix c(series.size(), sub->dim());
  for (std::size_t i = 0; i < sub->parent_columns.size(); ++i)
    c.col(static_cast<Index>(i)) = series.coeffs().col(sub->parent_columns[i]);
  return FunctionalSeries(std::move(sub), std::move(c));
}

inline FunctionalSeries restrict(const FunctionalSeries& series, double lo, double hi) {
  return restrict(series, Interval{lo, hi, false});
}

/// Maps a coefficient vector of the parent basis onto a restricted basis.
inline Vector restrict_coeffs(const BasisSystem& sub, const Vector& parent) {
  Vector c(sub.dim());
  for (std::size_t i = 0; i < sub.parent_columns.size(); ++i) c[static_cast<Index>(i)] = parent[sub.parent_columns[i]];
  return c;
}

/// Split at tau into the [0,tau] and (tau,1] parts.
inline std::pair<FunctionalSeries, FunctionalSeries> split_at(const FunctionalSeries& series, double tau) {
  return {restrict(series, predictor_domain(tau)), restrict(series, response_domain(tau))};
}

struct CenterResult {
  FunctionalSeries series;
  Vector mean;  ///< coefficients of the pointwise sample mean
};

inline CenterResult center(const FunctionalSeries& series) {
  if (series.size() < 1) throw InvalidArgument("cannot center an empty series");
  Vector mean = series.coeffs().colwise().mean().transpose();
  Matrix c = series.coeffs().rowwise() - mean.transpose();
  return {FunctionalSeries(series.basis_ptr(), std::move(c)), std::move(mean)};
}

inline DiscreteSample sqrt_transform(const DiscreteSample& raw) {
  if ((raw.values.array() < 0.0).any()) throw DomainError("square root of a negative observation");
  return DiscreteSample(raw.grid, raw.values.array().sqrt().matrix());
}

}  // namespace pfp
