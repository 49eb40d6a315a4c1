#include <gtest/gtest.h>

#include "helpers.hpp"
#include "pfp/bootstrap.hpp"

using namespace pfp;

namespace {

BootstrapOptions options(Index B, std::uint64_t seed = 1) {
  BootstrapOptions o;
  o.replicates = B;
  o.seed = seed;
  return o;
}

double is_oracle(double u, double l, double y, double a) {
  return (u - l) + 2.0 / a * std::max(0.0, y - u) + 2.0 / a * std::max(0.0, l - y);
}

}  // namespace

TEST(Bootstrap, IdenticalResidualsGiveZeroWidth) {
  const BasisPtr b = fourier_basis(make_grid(32), 3);
  const FunctionalSeries r(b, Matrix::Constant(50, 3, 0.3));
  const BootstrapEnsemble ens = bootstrap_ensemble(r, 0.5, 1, 1, options(200));
  EXPECT_TRUE(ens.degenerate);
  const BootstrapBands bands = bootstrap_bands(ens, Vector::Zero(ens.t.size()), Vector::Zero(16), 0.05);
  EXPECT_LT((bands.upper - bands.lower).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_FALSE(bands.warnings.empty());
}

TEST(Bootstrap, IntervalScoreExamples) {
  EXPECT_DOUBLE_EQ(interval_score(2.0, 1.0, 1.5, 0.1), 1.0);
  EXPECT_DOUBLE_EQ(interval_score(2.0, 1.0, 3.0, 0.1), 21.0);
  EXPECT_DOUBLE_EQ(interval_score(1.0, 0.0, -0.975, 0.05), 40.0);
  EXPECT_THROW(interval_score(0.0, 1.0, 0.5, 0.05), InvalidArgument);
  EXPECT_THROW(interval_score(1.0, 0.0, 0.5, 0.0), InvalidArgument);
}

TEST(Bootstrap, IntervalScoreMatchesFormula) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> a(0.01, 0.5);
  for (int i = 0; i < 500; ++i) {
    const double l = z(rng), u = l + std::abs(z(rng)), y = 2.0 * z(rng), al = a(rng);
    EXPECT_NEAR(interval_score(u, l, y, al), is_oracle(u, l, y, al), 1e-12);
  }
}

TEST(Bootstrap, WideningIncreasesScoreWhenCovered) {
  double prev = interval_score(0.1, -0.1, 0.0, 0.05);
  for (double w = 0.2; w < 2.0; w += 0.1) {
    const double s = interval_score(w, -w, 0.0, 0.05);
    EXPECT_GT(s, prev);
    prev = s;
  }
}

TEST(Bootstrap, AveragedScoreAndCoverage) {
  BootstrapBands b1, b2;
  b1.lower = Vector::Zero(2);
  b1.upper = Vector::Ones(2);
  b2.lower = Vector::Constant(2, -1.0);
  b2.upper = Vector::Constant(2, 1.0);
  const std::vector<BootstrapBands> bands = {b1, b2};
  const std::vector<Vector> truths = {(Vector(2) << 0.5, 2.0).finished(), (Vector(2) << 0.0, -1.5).finished()};
  // Scores: 1, 1 + 40, 2, 2 + 20.
  EXPECT_NEAR(averaged_score(bands, truths, 0.05), (1.0 + 41.0 + 2.0 + 22.0) / 4.0, 1e-12);
  EXPECT_NEAR(coverage(bands, truths), 0.5, 1e-15);
  EXPECT_THROW(averaged_score(bands, {truths[0]}, 0.05), ShapeError);
}

TEST(Bootstrap, TypeSevenQuantile) {
  const std::vector<double> x = {1.0, 2.0, 3.0, 4.0};
  EXPECT_DOUBLE_EQ(quantile_sorted(x, 0.25), 1.75);
  EXPECT_DOUBLE_EQ(quantile_sorted(x, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(x, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile_sorted({5.0}, 0.3), 5.0);
}

TEST(Bootstrap, BandsSandwichDrawsAndWidenWithConfidence) {
  std::mt19937_64 rng(4);
  const Matrix draws = fixtures::gaussian(400, 6, rng);
  const BootstrapBands b = bands_from_draws(draws, 0.05);
  const BootstrapBands wide = bands_from_draws(draws, 0.01);
  for (Index j = 0; j < 6; ++j) {
    EXPECT_LE(b.lower[j], b.upper[j]);
    EXPECT_GE(b.lower[j], draws.col(j).minCoeff());
    EXPECT_LE(b.upper[j], draws.col(j).maxCoeff());
    EXPECT_LE(wide.lower[j], b.lower[j]);
    EXPECT_GE(wide.upper[j], b.upper[j]);
  }
}

TEST(Bootstrap, TooFewReplicates) {
  const FunctionalSeries r = fixtures::fourier_sample(40, 4, 32, 5);
  EXPECT_THROW(bootstrap_ensemble(r, 0.5, 2, 2, options(99)), InvalidArgument);
}

TEST(Bootstrap, DeterministicAcrossThreads) {
  const FunctionalSeries r = fixtures::fourier_sample(60, 4, 32, 6);
  BootstrapOptions o = options(150, 9);
  const BootstrapEnsemble a = bootstrap_ensemble(r, 0.5, 2, 2, o);
  o.threads = 3;
  const BootstrapEnsemble b = bootstrap_ensemble(r, 0.5, 2, 2, o);
  const Vector far = Vector::Zero(a.t.size()), obs = r.values(0).head(16);
  const BootstrapBands ba = bootstrap_bands(a, far, obs, 0.05), bb = bootstrap_bands(b, far, obs, 0.05);
  EXPECT_EQ(ba.lower, bb.lower);
  EXPECT_EQ(ba.upper, bb.upper);
  EXPECT_GE(a.d_e, 1);
}

TEST(Bootstrap, RemainderWidensBands) {
  const FunctionalSeries r = fixtures::fourier_sample(80, 5, 32, 7);
  BootstrapOptions o = options(300, 10);
  const Vector far = Vector::Zero(16), obs = r.values(3).head(16);
  const BootstrapBands with = bootstrap_bands(bootstrap_ensemble(r, 0.5, 2, 2, o), far, obs, 0.05);
  o.include_remainder = false;
  const BootstrapBands without = bootstrap_bands(bootstrap_ensemble(r, 0.5, 2, 2, o), far, obs, 0.05);
  EXPECT_GT(with.mean_width(), without.mean_width());
}
