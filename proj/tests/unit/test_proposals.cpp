#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace adaptmh;

namespace {

Matrix corr_matrix(double rho) {
  Matrix c(2, 2);
  c << 1.0, rho, rho, 1.0;
  return c;
}

RwState rw_state(Eigen::Index d, bool three, RwSettings s = {}) {
  Matrix a = Matrix::Identity(d, d);
  for (Eigen::Index i = 0; i + 1 < d; ++i) a(i, i + 1) = a(i + 1, i) = 0.3;
  return RwState(d, three, s, CovMatrix(a));
}

// Feeds `n` standard normal points into the running moments.
void feed(RwState& st, int n, Rng& rng) {
  for (int i = 0; i < n; ++i) update_running_moments(st, rng.normal_vector(st.dim));
}

Matrix bimodal_draws(int n, Eigen::Index d, Rng& rng) {
  Matrix p(n, d);
  for (int i = 0; i < n; ++i) {
    const double s = i % 2 ? 2.5 : -2.5;
    p.row(i) = (Vector::Constant(d, s) + rng.normal_vector(d)).transpose();
  }
  return p;
}

Matrix correlated_draws(int n, double rho, Rng& rng) {
  const CovMatrix c(corr_matrix(rho));
  Matrix p(n, 2);
  for (int i = 0; i < n; ++i) p.row(i) = (Vector::Constant(2, 1.0) + c.transform(rng.normal_vector(2))).transpose();
  return p;
}

ImhTctState tct_state(const Matrix& pts, Rng& rng, bool antithetic = false) {
  ImhTctState st;
  st.copula = fit_t_copula(pts, rng);
  st.mvt = moment_mvt(pts);
  st.antithetic = antithetic;
  return st;
}

double sample_corr(const Matrix& p) {
  const Matrix c = oracle::batch_covariance(p);
  return c(0, 1) / std::sqrt(c(0, 0) * c(1, 1));
}

}  // namespace

TEST(RandomWalk, DefaultScales) {
  const RwState st = rw_state(5, true);
  EXPECT_EQ(st.n0, 1000u);
  EXPECT_NEAR(st.kappa1, 0.002, 1e-15);
  EXPECT_NEAR(st.kappa2, 1.13288, 1e-12);
  EXPECT_EQ(st.kappa3, 25.0);
  RwSettings s;
  s.kappa3 = 16.0;
  EXPECT_EQ(rw_state(1, true, s).kappa3, 16.0);
}

TEST(RandomWalk, WeightsPerPhase) {
  const RwState three = rw_state(2, true), two = rw_state(2, false);
  for (std::size_t n : {1u, 400u, 401u, 5000u}) {
    for (const auto* st : {&three, &two}) {
      const auto w = st->weights(n);
      EXPECT_NEAR(w[0] + w[1] + w[2], 1.0, 1e-15);
    }
  }
  EXPECT_EQ(three.weights(400), (std::array<double, 3>{1.0, 0.0, 0.0}));
  EXPECT_EQ(three.weights(401), (std::array<double, 3>{0.05, 0.90, 0.05}));
  EXPECT_EQ(two.weights(401), (std::array<double, 3>{0.05, 0.95, 0.0}));
}

TEST(RandomWalk, FixedPhaseIsScaledSigmaOne) {
  RwState st = rw_state(3, true);
  Rng rng(1);
  feed(st, 50, rng);
  const Vector x = rng.normal_vector(3);
  const Matrix ref = st.kappa1 * st.sigma1.entries();
  for (int i = 0; i < 20; ++i) {
    const Vector z = x + rng.normal_vector(3) * 0.05;
    EXPECT_NEAR(rw_logpdf(z, x, st, st.n0), oracle::dense_mvn_logpdf(z, x, ref), 1e-9);
  }
  // Draws before n0 have covariance kappa1 Sigma1.
  Matrix inc(40000, 3);
  for (int i = 0; i < inc.rows(); ++i) inc.row(i) = (rw_propose(x, st, 1, rng) - x).transpose();
  const Matrix c = oracle::batch_covariance(inc);
  EXPECT_LT((c - ref).cwiseAbs().maxCoeff(), 0.05 * ref.maxCoeff());
}

TEST(RandomWalk, MixtureDensityAfterWarmup) {
  RwState st = rw_state(2, true);
  Rng rng(2);
  feed(st, 600, rng);
  const std::size_t n = st.n0 + 1;
  const Matrix s2 = st.adaptive_cov().entries();
  const Vector x = rng.normal_vector(2);
  for (int i = 0; i < 20; ++i) {
    const Vector z = x + rng.normal_vector(2);
    const double ref = std::log(0.05 * std::exp(oracle::dense_mvn_logpdf(z, x, st.kappa1 * st.sigma1.entries())) +
                                0.90 * std::exp(oracle::dense_mvn_logpdf(z, x, st.kappa2 * s2)) +
                                0.05 * std::exp(oracle::dense_mvn_logpdf(z, x, st.kappa3 * s2)));
    EXPECT_NEAR(rw_logpdf(z, x, st, n), ref, 1e-9);
  }
}

TEST(RandomWalk, DensityIsSymmetric) {
  Rng rng(3);
  for (bool three : {true, false}) {
    RwState st = rw_state(4, three);
    feed(st, 900, rng);
    for (std::size_t n : {10u, 2000u}) {
      for (int i = 0; i < 50; ++i) {
        const Vector x = rng.normal_vector(4), z = rng.normal_vector(4);
        EXPECT_NEAR(rw_logpdf(z, x, st, n), rw_logpdf(x, z, st, n), 1e-12);
      }
    }
  }
}

TEST(RandomWalk, DensityNormalizes) {
  RwState st = rw_state(2, true);
  Rng rng(4);
  feed(st, 500, rng);
  const Vector x = Vector::Zero(2);
  const double total = oracle::integrate_2d([&](const Vector& z) { return std::exp(rw_logpdf(z, x, st, 1000)); }, x,
                                            Vector::Constant(2, 2.0), 600);
  EXPECT_NEAR(total, 1.0, 1e-2);
}

TEST(RandomWalk, AcceptRatio) {
  EXPECT_EQ(rw_accept_ratio(-3.0, -3.0), 1.0);
  EXPECT_NEAR(rw_accept_ratio(0.0, -std::log(2.0)), 0.5, 1e-15);
  EXPECT_EQ(rw_accept_ratio(-5.0, 2.0), 1.0);
  EXPECT_EQ(rw_accept_ratio(0.0, -kInf), 0.0);
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const double a = 5.0 * rng.normal(), b = 5.0 * rng.normal();
    EXPECT_NEAR(rw_accept_ratio(a, b), std::min(1.0, std::exp(b) / std::exp(a)), 1e-12);
  }
}

TEST(RunningCovariance, TwoPoints) {
  RwState st = rw_state(2, true);
  Vector a(2), b(2);
  a << 1.0, 2.0;
  b << 3.0, -2.0;
  update_running_moments(st, a);
  update_running_moments(st, b);
  const Vector d = a - b;
  const Matrix ref = d * d.transpose() / 2.0;
  EXPECT_LT((st.moments.covariance() - ref).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(RunningCovariance, MatchesBatch) {
  Rng rng(6);
  Matrix p(1000, 3);
  RwState st = rw_state(3, true);
  for (int i = 0; i < 1000; ++i) {
    p.row(i) = (Vector::Constant(3, 50.0) + 3.0 * rng.normal_vector(3)).transpose();
    update_running_moments(st, p.row(i).transpose());
  }
  EXPECT_LT((st.moments.covariance() - oracle::batch_covariance(p)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT((st.moments.mean() - Vector(p.colwise().mean())).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(RunningCovariance, ConstantStreamIsZero) {
  RunningMoments m(2);
  Vector x(2);
  x << 0.1, -7.3;
  for (int i = 0; i < 500; ++i) m.push(x);
  EXPECT_EQ(m.covariance().cwiseAbs().maxCoeff(), 0.0);
}

TEST(MixtureProposalDensity, BeforeAdaptation) {
  Rng rng(7);
  const ImhMnState st(MixtureOfNormals::single(Vector::Constant(2, 0.5), CovMatrix(corr_matrix(0.3))));
  EXPECT_EQ(st.weights(), (std::array<double, 4>{0.8, 0.2, 0.0, 0.0}));
  for (int i = 0; i < 20; ++i) {
    const Vector x = 3.0 * rng.normal_vector(2);
    const double ref = std::log(0.8 * std::exp(st.g1.logpdf(x)) + 0.2 * std::exp(st.g2.logpdf(x)));
    EXPECT_NEAR(imh_mn_logpdf(x, st), ref, 1e-10);
  }
  EXPECT_LT((st.g2.covs[0].entries() - 10.0 * st.g1.covs[0].entries()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(MixtureProposalDensity, AfterAdaptation) {
  Rng rng(8);
  ImhMnState st(MixtureOfNormals::single(Vector::Zero(2), CovMatrix::identity(2)));
  const Matrix pts = bimodal_draws(2000, 2, rng);
  ASSERT_FALSE(imh_mn_adapt(st, pts, 1000, rng).failed);
  ASSERT_TRUE(st.g3.has_value());
  EXPECT_EQ(st.weights(), (std::array<double, 4>{0.15, 0.05, 0.7, 0.1}));
  for (std::size_t c = 0; c < st.g3->components(); ++c)
    EXPECT_LT((st.g4->covs[c].entries() - 20.0 * st.g3->covs[c].entries()).cwiseAbs().maxCoeff(), 1e-12);
  const double total = oracle::integrate_2d([&](const Vector& x) { return std::exp(imh_mn_logpdf(x, st)); },
                                            Vector::Zero(2), Vector::Constant(2, 4.0), 600);
  EXPECT_NEAR(total, 1.0, 1e-2);
}

TEST(MixtureProposalDensity, SamplesFollowDensity) {
  Rng rng(9);
  ImhMnState st(MixtureOfNormals::single(Vector::Zero(1), CovMatrix::identity(1)));
  // Mixture variance: 0.8 * 1 + 0.2 * 10.
  Vector s(20000);
  for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = imh_mn_propose(st, rng)[0];
  EXPECT_NEAR(s.mean(), 0.0, 0.05);
  EXPECT_NEAR(s.squaredNorm() / s.size(), 2.8, 0.1);
}

TEST(MixtureProposalAdapt, ComponentCountFollowsAcceptances) {
  Rng rng(10);
  ImhMnState st(MixtureOfNormals::single(Vector::Zero(2), CovMatrix::identity(2)));
  const Matrix pts = bimodal_draws(500, 2, rng);
  ASSERT_FALSE(imh_mn_adapt(st, pts, 40, rng).failed);  // accepted / d = 20
  EXPECT_EQ(st.g3->components(), 1u);
  ASSERT_FALSE(imh_mn_adapt(st, pts, 2400, rng).failed);
  EXPECT_GE(st.g3->components(), 2u);
}

TEST(MixtureProposalAdapt, TooFewIteratesKeepsPrevious) {
  Rng rng(11);
  ImhMnState st(MixtureOfNormals::single(Vector::Zero(3), CovMatrix::identity(3)));
  const Matrix few = bimodal_draws(5, 3, rng);
  EXPECT_TRUE(imh_mn_adapt(st, few, 5, rng).failed);
  EXPECT_FALSE(st.g3.has_value());
  const Matrix same = Matrix::Constant(50, 3, 1.0);
  EXPECT_TRUE(imh_mn_adapt(st, same, 50, rng).failed);
  EXPECT_FALSE(st.g3.has_value());
}

TEST(MixtureProposalAdapt, StageTransitionCopiesG3) {
  Rng rng(12);
  ImhMnState st(MixtureOfNormals::single(Vector::Zero(2), CovMatrix::identity(2)));
  ASSERT_FALSE(imh_mn_adapt(st, bimodal_draws(1500, 2, rng), 800, rng).failed);
  const MixtureOfNormals g3 = *st.g3;
  imh_mn_stage_transition(st);
  EXPECT_EQ(st.stage, 2);
  ASSERT_EQ(st.g1.components(), g3.components());
  for (std::size_t c = 0; c < g3.components(); ++c) {
    EXPECT_EQ(st.g1.weights[c], g3.weights[c]);
    EXPECT_EQ(st.g1.means[c], g3.means[c]);
    EXPECT_EQ(st.g1.covs[c].entries(), g3.covs[c].entries());
    EXPECT_EQ(st.g2.covs[c].entries(), (10.0 * g3.covs[c].entries()).eval());
  }
}

TEST(CopulaProposalDensity, DominatesHeavyTailTerm) {
  Rng rng(13);
  const ImhTctState st = tct_state(correlated_draws(1000, 0.5, rng), rng);
  EXPECT_EQ(st.mvt.dof, kTctMvtDof);
  for (int i = 0; i < 100; ++i) {
    const Vector x = 4.0 * rng.normal_vector(2);
    const double lq = imh_tct_logpdf(x, st);
    EXPECT_GE(lq, std::log(0.3) + mvt_logpdf(x, st.mvt) - 1e-12);
    EXPECT_NEAR(lq,
                std::log(0.7 * std::exp(copula_logpdf(x, st.copula)) +
                         0.3 * std::exp(oracle::dense_mvt_logpdf(x, st.mvt.location, st.mvt.scale.entries(), 5.0))),
                1e-9);
  }
}

TEST(CopulaProposalDensity, Normalizes) {
  Rng rng(14);
  const ImhTctState st = tct_state(bimodal_draws(1000, 2, rng), rng);
  const double total = oracle::integrate_2d([&](const Vector& x) { return std::exp(imh_tct_logpdf(x, st)); },
                                            Vector::Zero(2), Vector::Constant(2, 3.0), 700);
  EXPECT_NEAR(total, 1.0, 1e-2);
}

TEST(CopulaProposalDensity, ProposeReturnsOwnDensity) {
  Rng rng(15);
  ImhTctState st = tct_state(correlated_draws(800, 0.2, rng), rng, true);
  for (int i = 0; i < 20; ++i) {
    const auto [x, lq] = imh_tct_propose(st, rng);
    EXPECT_NEAR(lq, imh_tct_logpdf(x, st), 1e-12);
  }
}

TEST(Antithetic, MvtMateReflectsThroughLocation) {
  Rng rng(16);
  const ImhTctState st = tct_state(correlated_draws(800, 0.4, rng), rng, true);
  for (int i = 0; i < 20; ++i) {
    const Vector z = mvt_sample(st.mvt, rng);
    const Vector m = antithetic_mate(z, TctComponent::mvt, st);
    EXPECT_LT((m - (2.0 * st.mvt.location - z)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_NEAR(mvt_logpdf(m, st.mvt), mvt_logpdf(z, st.mvt), 1e-10);
  }
}

TEST(Antithetic, CopulaMateIsInvolution) {
  Rng rng(17);
  ImhTctState st = tct_state(bimodal_draws(1000, 2, rng), rng, true);
  for (int i = 0; i < 50; ++i) {
    const Vector x = copula_sample(st.copula, rng);
    st.space = AntitheticSpace::x;
    EXPECT_EQ(antithetic_mate(antithetic_mate(x, TctComponent::copula, st), TctComponent::copula, st), x);
    st.space = AntitheticSpace::z;
    const Vector m = antithetic_mate(x, TctComponent::copula, st);
    EXPECT_LT((antithetic_mate(m, TctComponent::copula, st) - x).cwiseAbs().maxCoeff(), 1e-7);
    // The mate sits at the reflected copula-scale point.
    EXPECT_LT((to_z(m, st.copula) + to_z(x, st.copula)).cwiseAbs().maxCoeff(), 1e-7);
  }
}

TEST(Antithetic, DrawsComeInPairs) {
  Rng rng(18);
  ImhTctState st = tct_state(correlated_draws(800, 0.3, rng), rng, true);
  Matrix pairs(4000, 2);
  for (int i = 0; i < 2000; ++i) {
    pairs(i, 0) = imh_tct_propose(st, rng).first[0];
    pairs(i, 1) = imh_tct_propose(st, rng).first[0];
  }
  EXPECT_LT(sample_corr(pairs.topRows(2000)), -0.5);
  EXPECT_FALSE(st.pending.has_value());
}

TEST(Antithetic, OffMeansNoPending) {
  Rng rng(19);
  ImhTctState st = tct_state(correlated_draws(800, 0.3, rng), rng, false);
  imh_tct_propose(st, rng);
  EXPECT_FALSE(st.pending.has_value());
}

TEST(CopulaProposalAdapt, RefitTracksTarget) {
  Rng rng(20);
  ImhTctState st = tct_state(correlated_draws(500, 0.0, rng), rng);
  const Matrix pts = correlated_draws(4000, 0.7, rng);
  const auto out = imh_tct_adapt(st, pts, rng);
  ASSERT_FALSE(out.failed) << out.detail;
  EXPECT_NEAR(st.copula.corr.entries()(0, 1), 0.7, 0.05);
  EXPECT_EQ(st.mvt.dof, kTctMvtDof);
  EXPECT_EQ(st.weights()[0], 0.7);
  EXPECT_NEAR(st.weights()[1], 0.3, 1e-15);
  EXPECT_LT((st.mvt.location - Vector::Constant(2, 1.0)).cwiseAbs().maxCoeff(), 0.1);
}

TEST(CopulaProposalAdapt, TooFewIteratesKeepsPrevious) {
  Rng rng(21);
  ImhTctState st = tct_state(correlated_draws(500, 0.4, rng), rng);
  const Vector before = st.mvt.location;
  EXPECT_TRUE(imh_tct_adapt(st, correlated_draws(15, 0.0, rng), rng).failed);
  EXPECT_EQ(st.mvt.location, before);
}

TEST(ProposalObjects, KindsAndFingerprints) {
  Rng rng(22);
  RandomWalkProposal rw(rw_state(2, true));
  EXPECT_EQ(rw.kind(), SamplerKind::rw3);
  EXPECT_FALSE(rw.independent());
  EXPECT_EQ(RandomWalkProposal(rw_state(2, false)).kind(), SamplerKind::rw2);

  MixtureProposal mn(ImhMnState(MixtureOfNormals::single(Vector::Zero(2), CovMatrix::identity(2))));
  EXPECT_TRUE(mn.independent());
  const Vector fp = mn.fingerprint();
  const Matrix pts = bimodal_draws(500, 2, rng);
  mn.adapt(AdaptContext{pts, 300, 500}, rng);
  EXPECT_GT(mn.fingerprint().size(), fp.size());
  EXPECT_EQ(mn.fingerprint().head(fp.size()), fp);

  CopulaProposal tct(tct_state(correlated_draws(500, 0.2, rng), rng, true));
  EXPECT_EQ(tct.kind(), SamplerKind::imh_tct_a);
  const auto copy = tct.clone();
  EXPECT_EQ(copy->fingerprint(), tct.fingerprint());
  const Vector z = tct.draw(Vector::Zero(2), 1, rng);
  EXPECT_NEAR(tct.log_density(z), imh_tct_logpdf(z, tct.state()), 1e-12);
}

TEST(SamplerNames, RoundTrip) {
  for (SamplerKind k : kAllSamplers) EXPECT_EQ(parse_sampler(sampler_name(k)), k);
  EXPECT_FALSE(parse_sampler("gibbs").has_value());
}
