#include "stablab/landscape.hpp"
#include "stablab/optimizers.hpp"
#include "stablab/problems.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace stablab;

namespace {

DoubleWellParams quiet_well(Eigen::Index d) {
  DoubleWellParams p;
  p.d = d;
  p.noise_scale = 0.0;
  p.curvature_noise = 0.0;
  return p;
}

LogisticBlobsParams small_logistic() {
  LogisticBlobsParams p;
  p.classes = 3;
  p.d = 3;
  p.n_population_oracle = 1000;
  p.certify_points = 256;
  p.separation = 1.0;
  return p;
}

const LogisticBlobsProblem& shared_logistic() {
  static const auto spec = make_logistic_blobs(small_logistic());
  return *spec;
}

}  // namespace

// ---- quadratic_mean ----

TEST(QuadraticMean, PopulationRiskAtOrigin) {
  const auto q = make_quadratic_mean(2, ParamVector::Zero(2), 1.0);
  EXPECT_NEAR(q->population().value(ParamVector::Zero(2)), 0.25, 1e-15);
  EXPECT_NEAR(q->noise_second_moment(), 0.5, 1e-15);
}

TEST(QuadraticMean, GradientVanishesAtMu) {
  ParamVector mu(3);
  mu << 0.2, -0.1, 0.3;
  const auto q = make_quadratic_mean(3, mu, 1.0);
  EXPECT_LE(q->population().gradient(mu).norm(), 1e-15);
  EXPECT_EQ(q->global_minimum(), mu);
}

TEST(QuadraticMean, AnalyticConstants) {
  const auto q = make_quadratic_mean(2, ParamVector::Zero(2), 1.0);
  const ConstantsBundle& c = q->constants();
  EXPECT_GE(c.L1, 1.0);
  EXPECT_LE(c.L1, 1.05);
  EXPECT_LE(c.L2, 0.01);
  EXPECT_DOUBLE_EQ(c.lambda, 1.0);
  EXPECT_EQ(c.K, 1);
  EXPECT_DOUBLE_EQ(c.D, 4.0);
  EXPECT_DOUBLE_EQ(c.L0, 3.0);  // sup ||w - z|| = 2 + 1
  EXPECT_DOUBLE_EQ(c.M, 4.5);
}

TEST(QuadraticMean, MuOutsideNoiseBallRejected) {
  ParamVector mu(2);
  mu << 1.5, 0.0;
  EXPECT_THROW(make_quadratic_mean(2, mu, 1.0), UsageError);
}

TEST(QuadraticMean, MonteCarloMatchesAnalytic) {
  ParamVector mu(3);
  mu << 0.1, 0.2, -0.3;
  const auto q = make_quadratic_mean(3, mu, 1.0);
  Rng rng(5);
  for (int i = 0; i < 5; ++i) {
    const ParamVector w = rng.uniform_ball(3, 2.0);
    const double exact = q->population().value(w);
    const MonteCarloEstimate mc = monte_carlo_risk(*q, w, 1'000'000, 100 + i);
    EXPECT_LE(std::abs(mc.mean - exact), 3.0 * mc.std_error);
    EXPECT_LE(std::abs(mc.mean - exact), 1e-3 * std::abs(exact));  // three significant digits
  }
}

TEST(QuadraticMean, EmpiricalGradientIsWMinusMean) {
  const auto q = make_quadratic_mean(2, ParamVector::Zero(2), 1.0);
  const Dataset S = q->sample(3, 50);
  ParamVector mean = ParamVector::Zero(2);
  for (const auto& z : S.samples) mean += z;
  mean /= 50.0;
  ParamVector w(2);
  w << 0.4, -1.1;
  EXPECT_LE((empirical_grad(*q, w, S) - (w - mean)).norm(), 1e-14);
  EXPECT_LE((q->empirical(S)->gradient(w) - (w - mean)).norm(), 1e-14);
  EXPECT_LE((q->empirical_minimizer(S) - mean).norm(), 1e-15);
}

TEST(EmpiricalRisk, SingleSampleAndDuplicates) {
  const auto q = make_quadratic_mean(2, ParamVector::Zero(2), 1.0);
  const Dataset one = q->sample(8, 1);
  ParamVector w(2);
  w << 0.3, 0.7;
  EXPECT_DOUBLE_EQ(empirical_risk(*q, w, one), q->loss(w, one[0]));
  Dataset twice{{one[0], one[0]}};
  EXPECT_DOUBLE_EQ(empirical_risk(*q, w, twice), empirical_risk(*q, w, one));
  EXPECT_THROW(empirical_risk(*q, w, Dataset{}), UsageError);
}

TEST(Sampling, DeterministicInSeedAndSize) {
  const auto dw = make_double_well(DoubleWellParams{});
  const Dataset a = dw->sample(17, 40), b = dw->sample(17, 40), c = dw->sample(18, 40);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
  EXPECT_NE(a[0], c[0]);
}

// ---- double_well ----

TEST(DoubleWell, OneDimensionalValues) {
  const auto dw = make_double_well(quiet_well(1));
  ParamVector w(1);
  w << 0.5;
  const double c0 = dw->offset();
  EXPECT_NEAR(dw->population().value(w), c0, 1e-15);
  w << -0.5;
  EXPECT_NEAR(dw->population().value(w), c0, 1e-15);
  w << 0.0;
  EXPECT_NEAR(dw->population().value(w), c0 + 1.0 / 64, 1e-15);
  EXPECT_GE(dw->constants().lambda, 0.475 - 1e-12);
  EXPECT_LE(dw->constants().lambda, 0.5);
  EXPECT_EQ(dw->constants().K, 2);
}

TEST(DoubleWell, CertifiedAlphaBetaPositive) {
  const auto dw = make_double_well(DoubleWellParams{});
  const CertificationDetail det = certify_constants_detailed(*dw, 0.005);
  EXPECT_GT(det.constants.alpha, 0.0);
  ASSERT_TRUE(det.constants.beta.has_value());
  EXPECT_GT(*det.constants.beta, 0.0);
  EXPECT_EQ(det.constants.K, 4);
}

TEST(DoubleWell, PopulationMinimaInvariants) {
  for (Eigen::Index d : {1, 2, 3}) {
    DoubleWellParams p;
    p.d = d;
    // In d = 3 the boundary tilt of the default noise outweighs the radial pull.
    if (d == 3) p.noise_scale = p.curvature_noise = 0.02;
    const auto dw = make_double_well(p);
    const auto& info = dw->population_info();
    ASSERT_EQ(info.local_minima.size(), std::size_t(1) << d);
    double best = INFINITY;
    for (const auto& m : info.local_minima) {
      EXPECT_LE(dw->population().gradient(m).norm(), 1e-8);
      EXPECT_GE(min_eigenvalue(dw->population().hessian(m)), dw->constants().lambda - 1e-8);
      best = std::min(best, dw->population().value(m));
    }
    EXPECT_EQ(dw->population().value(dw->global_minimum()), best);
  }
}

TEST(DoubleWell, ZeroNoiseEmpiricalEqualsPopulation) {
  const auto dw = make_double_well(quiet_well(2));
  const Dataset S = dw->sample(4, 30);
  const auto emp = dw->empirical(S);
  Rng rng(6);
  for (int i = 0; i < 50; ++i) {
    const ParamVector w = rng.uniform_ball(2, 1.0);
    EXPECT_EQ(emp->value(w), dw->population().value(w));
    EXPECT_EQ(emp->gradient(w), dw->population().gradient(w));
  }
}

TEST(DoubleWell, InvalidParametersRejected) {
  DoubleWellParams p;
  p.well_radius = 0.7;
  EXPECT_THROW(make_double_well(p), UsageError);
  p = DoubleWellParams{};
  p.noise_scale = -1.0;
  EXPECT_THROW(make_double_well(p), UsageError);
}

TEST(DoubleWell, LossWithinZeroAndM) {
  const auto dw = make_double_well(DoubleWellParams{});
  const Dataset S = dw->sample(12, 200);
  const double M = dw->constants().M;
  for (double x = -1.0; x <= 1.0; x += 0.05)
    for (double y = -1.0; y <= 1.0; y += 0.05) {
      ParamVector w(2);
      w << x, y;
      if (w.norm() > 1.0) continue;
      for (const auto& z : S.samples) {
        const double f = dw->loss(w, z);
        ASSERT_GE(f, 0.0);
        ASSERT_LE(f, M);
      }
    }
}

TEST(Certification, MonotoneUnderRefinement) {
  const auto dw = make_double_well(DoubleWellParams{});
  const ConstantsBundle coarse = certify_constants(*dw, 0.02);
  const ConstantsBundle fine = certify_constants(*dw, 0.01);
  for (auto [a, b] : {std::pair{coarse.L0, fine.L0}, {coarse.L1, fine.L1}, {coarse.L2, fine.L2}, {coarse.M, fine.M}})
    EXPECT_GE(b, a / 1.05);
}

TEST(Separation, DoubleWellPassesAndMutationFails) {
  DoubleWellParams p = quiet_well(1);
  const auto dw = make_double_well(p);
  const SeparationReport r = validate_minima_separation(*dw);
  EXPECT_TRUE(r.pass);
  EXPECT_LE(r.required, 1.0);
  ConstantsBundle mutated = dw->constants();
  mutated.lambda = 0.49;
  mutated.L2 = 1.0;  // 4 lambda / L2 = 1.96 > 1
  EXPECT_FALSE(validate_minima_separation(dw->population_info().local_minima, mutated).pass);
}

TEST(Separation, SingleMinimumVacuous) {
  const auto q = make_quadratic_mean(2, ParamVector::Zero(2), 1.0);
  const SeparationReport r = validate_minima_separation(*q);
  EXPECT_TRUE(r.pass);
  EXPECT_TRUE(r.pairs.empty());
}

// ---- logistic_blobs ----

TEST(LogisticBlobs, ChanceLossAtOrigin) {
  const auto& lb = shared_logistic();
  const ParamVector w0 = ParamVector::Zero(lb.dim());
  Rng rng(1);
  for (int i = 0; i < 100; ++i) EXPECT_NEAR(lb.loss(w0, lb.draw(rng)), std::log(3.0), 1e-14);
}

TEST(LogisticBlobs, GradientAtOriginMatchesDifferences) {
  const auto& lb = shared_logistic();
  Rng rng(2);
  const ParamVector w0 = ParamVector::Zero(lb.dim());
  for (int i = 0; i < 20; ++i) {
    const Sample z = lb.draw(rng);
    const ParamVector g = lb.grad(w0, z);
    for (Eigen::Index k = 0; k < w0.size(); ++k) {
      ParamVector e = ParamVector::Zero(w0.size());
      e[k] = 1e-5;
      const double fd = (lb.loss(w0 + e, z) - lb.loss(w0 - e, z)) / 2e-5;
      EXPECT_NEAR(g[k], fd, 1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(LogisticBlobs, TrainingBeatsChance) {
  const auto& lb = shared_logistic();
  const Dataset S = lb.sample(3, 300);
  const Trace tr = run_gd(lb, S, ParamVector::Zero(lb.dim()), 500);
  EXPECT_LT(lb.population().value(tr.terminal), std::log(3.0));
}

TEST(LogisticBlobs, RejectsTooFewDimensions) {
  LogisticBlobsParams p = small_logistic();
  p.d = 2;
  EXPECT_THROW(make_logistic_blobs(p), UsageError);
}

// ---- finite differences on every family ----

TEST(DerivativeChecks, AllFamiliesPass) {
  const auto q = make_quadratic_mean(4, ParamVector::Constant(4, 0.2), 1.0);
  const auto dw = make_double_well(DoubleWellParams{});
  DoubleWellParams p3;
  p3.d = 3;
  p3.noise_scale = p3.curvature_noise = 0.02;
  const auto dw3 = make_double_well(p3);
  for (const ProblemSpec* spec : std::initializer_list<const ProblemSpec*>{q.get(), dw.get(), dw3.get(),
                                                                           &shared_logistic()}) {
    const DerivativeCheckReport r = check_sample_derivatives(*spec, 100, 77);
    EXPECT_EQ(r.points, 100u) << spec->name();
    EXPECT_TRUE(r.pass()) << spec->name() << " grad " << r.max_grad_rel_error << " hess " << r.max_hess_rel_error;
    EXPECT_LT(r.max_grad_rel_error, kGradCheckTol);
    EXPECT_LT(r.max_hess_rel_error, kHessCheckTol);
  }
}

TEST(DerivativeChecks, DetectsWrongGradient) {
  // A risk whose gradient is off by a factor must be flagged.
  class Broken final : public RiskFunction {
   public:
    Eigen::Index dim() const override { return 2; }
    double value(const ParamVector& w) const override { return w.squaredNorm(); }
    ParamVector gradient(const ParamVector& w) const override { return 3.0 * w; }
    Matrix hessian(const ParamVector&) const override { return 2.0 * Matrix::Identity(2, 2); }
  } broken;
  ParamVector w(2);
  w << 0.3, 0.4;
  EXPECT_FALSE(check_risk_derivatives(broken, {w}).pass());
}

TEST(Halton, PointsInUnitCube) {
  const auto pts = halton_points(3, 500);
  ASSERT_EQ(pts.size(), 500u);
  for (const auto& p : pts) {
    EXPECT_TRUE((p.array() >= 0.0).all());
    EXPECT_TRUE((p.array() < 1.0).all());
  }
  EXPECT_DOUBLE_EQ(pts[0][0], 0.5);  // index 1 in base 2
}
