#pragma once

/// @file arma.hpp
/// Scalar autoregressive models: Yule-Walker fits with AIC order selection
/// and iterated conditional-mean forecasts.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pfp/error.hpp"

namespace pfp {

struct ArModel {
  int order = 0;
  Eigen::VectorXd phi;  ///< phi_1..phi_q
  double mean = 0.0;
  double intercept = 0.0;  ///< mean * (1 - sum phi)
  double sigma2 = 0.0;
  double aic = 0.0;
  std::size_t length = 0;
  double spectral_radius = 0.0;
  std::vector<std::string> warnings;
};

/// Biased sample autocovariances gamma_0..gamma_maxLag of a centered copy.
inline std::vector<double> autocovariance(std::span<const double> x, int maxLag) {
  const std::size_t n = x.size();
  if (n == 0) throw InvalidArgument("autocovariance of an empty sequence");
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(n);
  std::vector<double> g(static_cast<std::size_t>(maxLag) + 1, 0.0);
  for (int k = 0; k <= maxLag && static_cast<std::size_t>(k) < n; ++k) {
    double s = 0.0;
    for (std::size_t t = static_cast<std::size_t>(k); t < n; ++t) s += (x[t] - m) * (x[t - static_cast<std::size_t>(k)] - m);
    g[static_cast<std::size_t>(k)] = s / static_cast<double>(n);
  }
  return g;
}

struct YuleWalkerPath {
  std::vector<Eigen::VectorXd> phi;  ///< phi[q] has length q
  std::vector<double> sigma2;        ///< innovation variance per order
};

/// Levinson-Durbin recursion for orders 0..maxOrder.
inline YuleWalkerPath levinson_durbin(const std::vector<double>& gamma, int maxOrder) {
  if (static_cast<int>(gamma.size()) < maxOrder + 1) throw InvalidArgument("not enough autocovariances");
  YuleWalkerPath path;
  path.phi.emplace_back();
  path.sigma2.push_back(gamma[0]);
  Eigen::VectorXd prev;
  double v = gamma[0];
  for (int q = 1; q <= maxOrder; ++q) {
    if (v <= 0.0) break;
    double acc = gamma[static_cast<std::size_t>(q)];
    for (int j = 1; j < q; ++j) acc -= prev[j - 1] * gamma[static_cast<std::size_t>(q - j)];
    const double k = acc / v;
    Eigen::VectorXd cur(q);
    for (int j = 1; j < q; ++j) cur[j - 1] = prev[j - 1] - k * prev[q - j - 1];
    cur[q - 1] = k;
    v *= (1.0 - k * k);
    path.phi.push_back(cur);
    path.sigma2.push_back(std::max(v, 0.0));
    prev = cur;
  }
  return path;
}

/// AIC of a Gaussian AR(q) with innovation variance sigma2 on n points.
inline double ar_aic(std::size_t n, double sigma2, int q) {
  const double ll = sigma2 > 0.0 ? static_cast<double>(n) * std::log(sigma2) : -std::numeric_limits<double>::infinity();
  return ll + 2.0 * static_cast<double>(q + 1);
}

namespace detail {

inline double ar_radius(const Eigen::VectorXd& phi) {
  const auto q = phi.size();
  if (q == 0) return 0.0;
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(q, q);
  comp.row(0) = phi.transpose();
  if (q > 1) comp.bottomLeftCorner(q - 1, q - 1).setIdentity();
  Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace detail

/// Yule-Walker AR fit with order chosen by AIC over 0..qMax.
inline ArModel fit_ar(std::span<const double> x, int qMax) {
  if (qMax < 0) throw InvalidArgument("maximum AR order must be non-negative");
  if (x.size() <= static_cast<std::size_t>(10 * qMax) || x.empty()) throw InvalidArgument("series too short for the maximum AR order");
  ArModel m;
  m.length = x.size();
  const auto gamma = autocovariance(x, qMax);
  for (double v : x) m.mean += v;
  m.mean /= static_cast<double>(x.size());
  m.intercept = m.mean;
  if (gamma[0] <= 1e-300) {
    m.phi = Eigen::VectorXd();
    m.aic = ar_aic(x.size(), 0.0, 0);
    return m;
  }
  const auto path = levinson_durbin(gamma, qMax);
  int best = 0;
  double best_aic = std::numeric_limits<double>::infinity();
  for (std::size_t q = 0; q < path.sigma2.size(); ++q) {
    const double a = ar_aic(x.size(), path.sigma2[q], static_cast<int>(q));
    if (a < best_aic) {
      best_aic = a;
      best = static_cast<int>(q);
    }
  }
  m.order = best;
  m.phi = path.phi[static_cast<std::size_t>(best)];
  m.sigma2 = path.sigma2[static_cast<std::size_t>(best)];
  m.aic = best_aic;
  m.intercept = m.mean * (1.0 - m.phi.sum());
  m.spectral_radius = detail::ar_radius(m.phi);
  if (m.spectral_radius >= 1.0) m.warnings.push_back("AR companion spectral radius >= 1");
  return m;
}

/// Iterated conditional-mean forecasts for the next h points after `history`.
inline std::vector<double> forecast_ar(const ArModel& m, std::span<const double> history, int h) {
  if (h < 1) throw InvalidArgument("forecast horizon must be at least 1");
  if (history.size() < static_cast<std::size_t>(m.order)) throw InvalidArgument("history shorter than the AR order");
  std::vector<double> buf(history.end() - m.order, history.end());
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(h));
  for (int s = 0; s < h; ++s) {
    double next = m.intercept;
    for (int j = 1; j <= m.order; ++j) next += m.phi[j - 1] * buf[buf.size() - static_cast<std::size_t>(j)];
    buf.push_back(next);
    out.push_back(next);
  }
  return out;
}

}  // namespace pfp
