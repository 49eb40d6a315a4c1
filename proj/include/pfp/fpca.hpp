#pragma once

/// @file fpca.hpp
/// Functional principal component analysis in basis coordinates.
///
/// With coefficient covariance S and Gram matrix W the covariance operator
/// acts on coefficients as S W. Its eigenproblem is symmetrised as
/// W^{1/2} S W^{1/2} u = lambda u and mapped back with v = W^{-1/2} u, which
/// makes the eigenfunctions orthonormal under the quadrature inner product of
/// the series' own (possibly restricted) domain.

#include <Eigen/Eigenvalues>

#include "pfp/funkdata.hpp"

namespace pfp {

struct EigenSystem {
  BasisPtr basis;
  Vector mean;            ///< coefficients of the sample mean curve
  Vector eigenvalues;     ///< descending, non-negative
  Matrix eigenfunctions;  ///< D x D, column j holds the coefficients of v_j
  Matrix scores;          ///< n x D, scores(k, j) = <Y_k - mean, v_j>

  Index dim() const { return eigenvalues.size(); }
  Index size() const { return scores.rows(); }
  const Interval& domain() const { return basis->domain; }

  /// Eigenfunction values on the grid (J x D).
  Matrix eigenfunction_values() const { return basis->eval * eigenfunctions; }
  Vector mean_values() const { return basis->eval * mean; }

  /// Fraction of total variance carried by each component.
  Vector explained_ratio() const {
    const double total = eigenvalues.sum();
    if (total <= 0.0) return Vector::Zero(dim());
    return eigenvalues / total;
  }

  /// Smallest number of components whose cumulative explained variance
  /// reaches `threshold`.
  Index components_for(double threshold) const {
    const Vector r = explained_ratio();
    double acc = 0.0;
    for (Index j = 0; j < r.size(); ++j) {
      acc += r[j];
      if (acc >= threshold - 1e-12) return j + 1;
    }
    return std::max<Index>(1, r.size());
  }

  double tail_sum(Index d) const {
    if (d >= dim()) return 0.0;
    return eigenvalues.tail(dim() - d).sum();
  }
};

namespace detail {

struct GramRoots {
  Matrix half;
  Matrix inv_half;
};

inline GramRoots gram_roots(const Matrix& gram) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed on Gram matrix");
  const Vector ev = es.eigenvalues();
  if (ev.minCoeff() <= 0.0) throw NumericalError("Gram matrix is not positive definite");
  const Matrix& Q = es.eigenvectors();
  return {Q * ev.array().sqrt().matrix().asDiagonal() * Q.transpose(),
          Q * ev.array().rsqrt().matrix().asDiagonal() * Q.transpose()};
}

}  // namespace detail

/// Mean, covariance eigendecomposition and scores of a functional series.
///
/// The covariance uses divisor n. Each eigenfunction is signed so that its
/// coefficient of largest magnitude is positive. Components with equal
/// eigenvalues keep the solver's order and are not individually identified.
inline EigenSystem fpca(const FunctionalSeries& series) {
  const Index n = series.size();
  if (n < 2) throw InvalidArgument("fpca needs at least two curves");
  const BasisSystem& basis = series.basis();

  EigenSystem out;
  out.basis = series.basis_ptr();
  out.mean = series.coeffs().colwise().mean().transpose();
  const Matrix centered = series.coeffs().rowwise() - out.mean.transpose();
  const Matrix cov = centered.transpose() * centered / static_cast<double>(n);

  const auto roots = detail::gram_roots(basis.gram);
  Matrix sym = roots.half * cov * roots.half;
  sym = 0.5 * (sym + sym.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  if (es.info() != Eigen::Success) throw NumericalError("covariance eigensolver did not converge");

  const Index D = basis.dim();
  out.eigenvalues.resize(D);
  out.eigenfunctions.resize(D, D);
  for (Index j = 0; j < D; ++j) {
    const Index src = D - 1 - j;  // solver returns ascending order
    out.eigenvalues[j] = std::max(0.0, es.eigenvalues()[src]);
    Vector v = roots.inv_half * es.eigenvectors().col(src);
    Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0.0) v = -v;
    out.eigenfunctions.col(j) = v;
  }
  out.scores = centered * basis.gram * out.eigenfunctions;
  return out;
}

/// Scores of one curve given by coefficients in the system's basis.
inline Vector scores_of(const EigenSystem& es, const Vector& coeffs) {
  if (coeffs.size() != es.basis->dim()) throw ShapeError("curve coefficients do not match the eigen system basis");
  return es.eigenfunctions.transpose() * es.basis->gram * (coeffs - es.mean);
}

/// Scores of one curve given by its values on the system's grid.
inline Vector scores_of_values(const EigenSystem& es, const Vector& values) {
  if (values.size() != es.basis->grid.size()) throw ShapeError("curve values do not match the eigen system grid");
  const Vector centered = values - es.mean_values();
  return es.eigenfunction_values().transpose() * es.basis->grid.weights().asDiagonal() * centered;
}

/// Truncated Karhunen-Loeve reconstruction: mean + sum_{j<d} scores_j v_j.
inline Vector reconstruct(const EigenSystem& es, const Vector& scores, Index d) {
  if (d < 1 || d > es.dim()) throw InvalidArgument("reconstruction dimension out of range");
  if (scores.size() < d) throw ShapeError("fewer scores than the reconstruction dimension");
  return es.mean + es.eigenfunctions.leftCols(d) * scores.head(d);
}

}  // namespace pfp
