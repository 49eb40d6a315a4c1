#pragma once

#include <random>

#include "pfp/funkdata.hpp"

namespace pfp::fixtures {

inline Matrix gaussian(Index rows, Index cols, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> z(0.0, sd);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = z(rng);
  return m;
}

/// n random curves in the first D Fourier functions with decaying scales.
inline FunctionalSeries fourier_sample(Index n, Index D, Index J, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Matrix c = gaussian(n, D, rng);
  for (Index j = 0; j < D; ++j) c.col(j) *= 1.0 / static_cast<double>(j + 1);
  return FunctionalSeries(fourier_basis(make_grid(J), D), std::move(c));
}

}  // namespace pfp::fixtures
