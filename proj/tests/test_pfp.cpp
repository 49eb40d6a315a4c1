#include <gtest/gtest.h>

#include "helpers.hpp"
#include "pfp/pfp.hpp"

using namespace pfp;

namespace {

PfpConfig config(Index p, Index d, Index dx, Index dy, Index window) {
  PfpConfig c;
  c.p = p;
  c.d = d;
  c.dx = dx;
  c.dy = dy;
  c.window = window;
  return c;
}

Vector head_values(const FunctionalSeries& s, Index k, double tau) {
  const auto idx = s.grid().indices_in(predictor_domain(tau));
  const Vector v = s.values(k);
  Vector out(static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Index>(i)] = v[idx[i]];
  return out;
}

Vector tail_values(const FunctionalSeries& s, Index k, double tau) {
  const auto idx = s.grid().indices_in(response_domain(tau));
  const Vector v = s.values(k);
  Vector out(static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Index>(i)] = v[idx[i]];
  return out;
}

}  // namespace

TEST(Pfp, RegressionMatchesDirectFitOnResiduals) {
  const FunctionalSeries s = fixtures::fourier_sample(100, 5, 32, 1);
  const PfpModel m = pfp_fit(s, config(1, 2, 3, 2, 40));
  const ResidualSet rs = sliding_residuals(s, {1, 2}, 40, 40, 99);
  const auto [X, Y] = split_at(rs.residuals, 0.5);
  const FfrModel f = fit_ffr(X, Y, 3, 2);
  EXPECT_LT((m.residual_ffr.B - f.B).cwiseAbs().maxCoeff(), 1e-12);
  const Vector x = X.coeffs().row(7).transpose();
  EXPECT_LT((predict_ffr(m.residual_ffr, x) - predict_ffr(f, x)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(m.training.size(), 60);
  EXPECT_EQ(m.far.n, 40);
}

TEST(Pfp, PredictionIsAdditive) {
  const FunctionalSeries s = fixtures::fourier_sample(100, 5, 32, 2);
  const PfpModel m = pfp_fit(s.slice(0, 99), config(1, 2, 3, 3, 40));
  const Vector partial = head_values(s, 99, 0.5);
  const PfpPrediction p = pfp_predict(m, s.slice(0, 99), partial);
  EXPECT_LT((p.combined - p.far_part - p.residual_part).cwiseAbs().maxCoeff(), 1e-15);
  const Vector far = s.basis().eval * predict_curve(m.far, s.slice(0, 99), 1);
  const auto head = s.grid().indices_in(predictor_domain(0.5));
  for (std::size_t i = 0; i < head.size(); ++i)
    EXPECT_NEAR(p.observed_residual[static_cast<Index>(i)], partial[static_cast<Index>(i)] - far[head[i]], 1e-12);
  EXPECT_EQ(p.t.size(), 16);
}

TEST(Pfp, MeanResidualGivesMeanUpdate) {
  const FunctionalSeries s = fixtures::fourier_sample(80, 5, 32, 3);
  const PfpModel m = pfp_fit(s, config(1, 2, 2, 2, 40));
  const Vector far = predict_curve(m.far, s, 1);
  const FfrModel& f = m.residual_ffr;
  const Vector partial = f.pred_es.basis->eval * restrict_coeffs(*f.pred_es.basis, far) + f.pred_es.mean_values();
  const PfpPrediction p = pfp_update(m, far, partial);
  EXPECT_LT((p.residual_part - f.resp_es.mean_values()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Pfp, RecoversIdentifiedTail) {
  // Curves in a 3-dimensional Fourier space: the first half determines the second.
  const FunctionalSeries s = fixtures::fourier_sample(120, 3, 32, 4);
  const PfpModel m = pfp_fit(s.slice(0, 119), config(0, 2, 3, 3, 50));
  const PfpPrediction p = pfp_predict(m, s.slice(0, 119), head_values(s, 119, 0.5));
  EXPECT_LT((p.combined - tail_values(s, 119, 0.5)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Pfp, RawFitMatchesSmoothFitOnExactCurves) {
  const FunctionalSeries s = fixtures::fourier_sample(100, 4, 32, 5);
  const PfpConfig cfg = config(1, 2, 3, 2, 40);
  const PfpModel a = pfp_fit(s.slice(0, 99), cfg);
  const PfpModel b = pfp_fit_raw(DiscreteSample(s.grid(), s.values().topRows(99)), s.basis_ptr(), cfg);
  const Vector partial = head_values(s, 99, 0.5);
  const PfpPrediction pa = pfp_predict(a, s.slice(0, 99), partial);
  const PfpPrediction pb = pfp_predict_raw(b, DiscreteSample(s.grid(), s.values().topRows(99)), partial);
  EXPECT_LT((pa.combined - pb.combined).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_EQ(b.residual_ffr.pred_es.basis->kind, BasisKind::Nodal);
}

TEST(Pfp, RawPartialResiduals) {
  const FunctionalSeries s = fixtures::fourier_sample(60, 4, 32, 6);
  std::mt19937_64 rng(7);
  const Matrix raw = s.values() + fixtures::gaussian(60, 32, rng, 0.1);
  const ResidualSet rs = sliding_residuals(s, {1, 1}, 30, 30, 59);
  const ResidualSet r = raw_partial_residuals(rs, raw.bottomRows(30), 0.5);
  const Matrix pred = rs.predictions.values(), smooth = rs.residuals.values(), got = r.residuals.values();
  for (Index j = 0; j < 32; ++j) {
    const bool head = s.grid().points()[j] <= 0.5;
    for (Index k = 0; k < 30; ++k)
      EXPECT_NEAR(got(k, j), head ? raw(30 + k, j) - pred(k, j) : smooth(k, j), 1e-12);
  }
  EXPECT_THROW(raw_partial_residuals(rs, raw, 0.5), ShapeError);
}

TEST(Pfp, NoisyWithoutErrorReducesToSmooth) {
  const FunctionalSeries s = fixtures::fourier_sample(100, 4, 32, 8);
  const DiscreteSample hist(s.grid(), s.values().topRows(99));
  // dx = 4 spans the partial curve exactly, so its pre-smoothing residual vanishes.
  const PfpConfig cfg = config(1, 2, 4, 2, 40);
  const PfpModel m = pfp_fit_noisy(hist, s.basis_ptr(), cfg, 3);
  ASSERT_TRUE(m.error_model);
  const Vector partial = head_values(s, 99, 0.5);
  const NoisyPrediction np = pfp_predict_noisy(m, hist, partial, 4);
  const PfpPrediction sp = pfp_predict_raw(m, hist, partial);
  EXPECT_LT((np.combined - sp.combined.head(4)).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT(np.error.cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Pfp, NoisyNeedsErrorModel) {
  const FunctionalSeries s = fixtures::fourier_sample(100, 4, 32, 9);
  const DiscreteSample hist(s.grid(), s.values());
  const PfpModel m = pfp_fit_raw(hist, s.basis_ptr(), config(1, 2, 3, 2, 40));
  EXPECT_THROW(pfp_predict_noisy(m, hist, head_values(s, 0, 0.5), 2), StateError);
}

TEST(Pfp, NoisyHorizonBounds) {
  const FunctionalSeries s = fixtures::fourier_sample(100, 4, 32, 10);
  const DiscreteSample hist(s.grid(), s.values());
  const PfpModel m = pfp_fit_noisy(hist, s.basis_ptr(), config(1, 2, 3, 2, 40), 2);
  EXPECT_THROW(pfp_predict_noisy(m, hist, head_values(s, 0, 0.5), 17), InvalidArgument);
  EXPECT_THROW(pfp_predict_noisy(m, hist, head_values(s, 0, 0.5), 0), InvalidArgument);
}

TEST(Pfp, MovingBlockSeries) {
  const FunctionalSeries s = fixtures::fourier_sample(20, 4, 32, 11);
  const FunctionalSeries rec = moving_block_series(s, 0.5);
  EXPECT_EQ(rec.size(), 19);
  const Vector partial = head_values(s, 5, 0.5);
  const FunctionalSeries full = moving_block_series(s.slice(0, 5), 0.5, partial);
  EXPECT_EQ(full.size(), 5);
  const Vector last = full.values(4);
  EXPECT_LT((last.head(16) - tail_values(s, 4, 0.5)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((last.tail(16) - partial).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(full.grid().weights().sum(), s.grid().weights().sum(), 1e-12);
}

TEST(Pfp, SelectionReturnsFeasibleCell) {
  const FunctionalSeries s = fixtures::fourier_sample(90, 5, 32, 12);
  JointRanges r;
  r.p_max = 1;
  r.d_max = 2;
  r.dx_max = 3;
  r.dy_max = 3;
  const JointSelection j = pfp_select(s, 0.5, r, 40);
  EXPECT_LE(j.p, 1);
  EXPECT_GE(j.d, 1);
  EXPECT_LE(j.dx, 3);
  const JointSelection jr = pfp_select_raw(DiscreteSample(s.grid(), s.values()), s.basis_ptr(), 0.5, r, 40);
  EXPECT_EQ(jr.cells.size(), 4u);
}

TEST(Pfp, Errors) {
  const FunctionalSeries s = fixtures::fourier_sample(45, 4, 32, 13);
  EXPECT_THROW(pfp_fit(s, config(1, 2, 3, 2, 42)), InvalidArgument);
  const PfpModel m = pfp_fit(s, config(1, 2, 3, 2, 30));
  EXPECT_THROW(pfp_predict(m, s, Vector::Zero(3)), ShapeError);
}
