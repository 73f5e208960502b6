#include "stablab/stability.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <gtest/gtest.h>

#include <cmath>

using namespace stablab;
using boost::multiprecision::cpp_bin_float_50;

namespace {

std::shared_ptr<QuadraticMeanProblem> quad4() { return make_quadratic_mean(4, ParamVector::Constant(4, 0.25), 1.0); }

std::shared_ptr<DoubleWellProblem> quiet_well() {
  DoubleWellParams p;
  p.noise_scale = 0.0;
  p.curvature_noise = 0.0;
  return make_double_well(p);
}

AlgorithmSpec algo(AlgorithmKind kind, std::size_t t) {
  AlgorithmSpec a;
  a.kind = kind;
  a.t = t;
  return a;
}

}  // namespace

TEST(PairwiseSum, MatchesFiftyDigitReference) {
  Rng rng(17);
  for (std::size_t len : {1u, 2u, 7u, 1000u, 100000u}) {
    std::vector<double> xs(len);
    double abs_sum = 0.0;
    for (auto& x : xs) {
      x = rng.normal() * std::pow(10.0, 8 * rng.uniform01() - 4);
      abs_sum += std::abs(x);
    }
    cpp_bin_float_50 exact = 0;
    for (double x : xs) exact += x;
    const double got = pairwise_sum(xs);
    EXPECT_LE(std::abs(got - exact.convert_to<double>()), 1e-14 * abs_sum) << len;
    EXPECT_EQ(got, pairwise_sum(xs));
  }
  EXPECT_EQ(pairwise_sum(std::vector<double>{}), 0.0);
}

TEST(MeanAndError, SmallSample) {
  const std::vector<double> v{1, 2, 3, 4};
  const MeanEstimate m = mean_and_error(v);
  EXPECT_DOUBLE_EQ(m.mean, 2.5);
  EXPECT_NEAR(m.std_error, std::sqrt(5.0 / 3.0) / 2.0, 1e-15);
  EXPECT_EQ(m.count, 4u);
  const MeanEstimate one = mean_and_error(std::vector<double>{3.0});
  EXPECT_EQ(one.mean, 3.0);
  EXPECT_EQ(one.std_error, 0.0);
}

TEST(FitScaling, ExactPowerLaws) {
  const std::vector<double> xs{50, 100, 200, 400, 800};
  std::vector<double> inv, flat;
  for (double x : xs) {
    inv.push_back(3.7 / x);
    flat.push_back(0.2);
  }
  const ScalingFit a = fit_scaling(xs, inv);
  EXPECT_NEAR(a.slope, -1.0, 1e-12);
  EXPECT_NEAR(a.intercept, std::log(3.7), 1e-12);
  EXPECT_EQ(a.points_used, 5u);
  EXPECT_NEAR(fit_scaling(xs, flat).slope, 0.0, 1e-12);
}

TEST(FitScaling, NonpositiveExcludedWithWarning) {
  const std::vector<double> xs{1, 2, 4, 8, 16};
  const std::vector<double> ys{1.0, 0.0, 0.25, -3.0, 1.0 / 16};
  const ScalingFit f = fit_scaling(xs, ys);
  EXPECT_EQ(f.points_used, 3u);
  EXPECT_FALSE(f.warnings.empty());
  EXPECT_NEAR(f.slope, -1.0, 1e-12);
  EXPECT_THROW(fit_scaling(std::vector<double>{1, 2}, std::vector<double>{1, 2}), UsageError);
}

TEST(FitScaling, BootstrapIntervalCoversTruth) {
  Rng rng(4);
  const std::vector<double> xs{50, 100, 200, 400};
  std::vector<std::vector<double>> reps;
  for (double x : xs) {
    std::vector<double> r;
    for (int i = 0; i < 40; ++i) r.push_back((1.0 + 0.1 * rng.normal()) / x);
    reps.push_back(r);
  }
  const ScalingFit f = fit_scaling(xs, reps, 500, 9);
  EXPECT_LE(f.ci_low, f.slope);
  EXPECT_GE(f.ci_high, f.slope);
  EXPECT_LE(f.ci_low, -0.95);
  EXPECT_GE(f.ci_high, -1.05);
  EXPECT_EQ(f.slope, fit_scaling(xs, reps, 500, 9).slope);
}

TEST(Coupling, IdenticalDatasetsGiveZeroDifference) {
  const auto dw = quiet_well();
  DoubleWellParams noisy;
  const auto nw = make_double_well(noisy);
  const Dataset S = nw->sample(3, 60);
  for (AlgorithmKind k : {AlgorithmKind::gd, AlgorithmKind::sgd, AlgorithmKind::pgd}) {
    const AlgorithmSpec a = algo(k, 300);
    const Trace x = run_algorithm(*nw, S, a, 11);
    const Trace y = run_algorithm(*nw, S, a, 11);
    EXPECT_EQ(x.terminal, y.terminal) << to_string(k);
    for (const auto& z : S.samples) EXPECT_EQ(nw->loss(x.terminal, z) - nw->loss(y.terminal, z), 0.0);
  }
  (void)dw;
}

TEST(PairedRun, DiffersOnlyAtIndexZero) {
  const auto q = quad4();
  const ReplicateSeeds seeds = replicate_seeds(5, 0, 30, 10);
  const PairedRun p = make_paired_run(*q, algo(AlgorithmKind::sgd, 10), 30, seeds);
  ASSERT_EQ(p.S.size(), 30u);
  ASSERT_EQ(p.S_prime.size(), 30u);
  EXPECT_NE(p.S[0], p.S_prime[0]);
  for (std::size_t i = 1; i < 30; ++i) EXPECT_EQ(p.S[i], p.S_prime[i]);
  EXPECT_EQ(p.trace.step_count, p.trace_prime.step_count);
}

TEST(ReplicateSeeds, DerivedFromReplicateSeed) {
  const ReplicateSeeds a = replicate_seeds(99, 3, 100, 50);
  EXPECT_EQ(a.replicate, derive_replicate_seed(99, 3, 100, 50));
  EXPECT_NE(a.data, a.substitute);
  EXPECT_NE(a.algorithm(0), a.algorithm(1));
  const ReplicateSeeds b = replicate_seeds(99, 3, 100, 50);
  EXPECT_EQ(a.probes, b.probes);
}

TEST(Stability, GdOnQuadraticMatchesClosedFormDifference) {
  // GD with step 1/L1 = 1 lands on the sample mean, so the output change is
  // (z_1 - z_1')/n and every loss difference is bounded by L0 times it.
  const auto q = quad4();
  for (std::size_t n : {20u, 80u}) {
    const ReplicateSeeds seeds = replicate_seeds(12, 1, n, 50);
    const PairedRun p = make_paired_run(*q, algo(AlgorithmKind::gd, 50), n, seeds);
    const ParamVector expect = (p.S[0] - p.S_prime[0]) / static_cast<double>(n);
    EXPECT_LE(((p.trace.terminal - p.trace_prime.terminal) - expect).norm(), 1e-12);
  }
}

TEST(Stability, QuadraticEstimateDecaysLikeOneOverN) {
  const auto q = quad4();
  std::vector<double> ns, vals;
  for (std::size_t n : {25u, 50u, 100u, 200u}) {
    const StabilityEstimate s = estimate_stability(*q, algo(AlgorithmKind::gd, 50), n, 30, 1, 100, 77);
    EXPECT_GE(s.value, 0.0);
    EXPECT_GE(s.std_error, 0.0);
    EXPECT_EQ(s.replicates, 30u);
    EXPECT_TRUE(s.lower_estimate);
    ns.push_back(static_cast<double>(n));
    vals.push_back(s.value);
  }
  const ScalingFit f = fit_scaling(ns, vals);
  EXPECT_GE(f.slope, -1.35);
  EXPECT_LE(f.slope, -0.65);
}

TEST(Gap, ZeroStepsStartIndependentOfData) {
  const auto q = quad4();
  const MeanEstimate g = estimate_generalization_gap(*q, algo(AlgorithmKind::gd, 0), 50, 200, 31);
  EXPECT_LE(std::abs(g.mean), 3.0 * g.std_error);
}

TEST(Gap, ZeroNoiseIsExactlyZero) {
  const auto dw = quiet_well();
  const MeanEstimate g = estimate_generalization_gap(*dw, algo(AlgorithmKind::gd, 100), 40, 10, 5);
  EXPECT_EQ(g.mean, 0.0);
  EXPECT_EQ(g.std_error, 0.0);
}

TEST(Excess, DecompositionOnQuadratic) {
  const auto q = quad4();
  const ExcessRiskReport r = estimate_excess_risk(*q, algo(AlgorithmKind::gd, 50), 100, 40, 3);
  ASSERT_TRUE(r.decomposition_holds.has_value());
  EXPECT_TRUE(*r.decomposition_holds);
  ASSERT_TRUE(r.opt_error.has_value());
  EXPECT_LE(r.opt_error->mean, 1e-12);
  EXPECT_EQ(r.location_failures, 0u);
  const double bound = convex_excess_bound(q->constants(), 100, 4, std::max(0.0, r.opt_error->mean)).total;
  EXPECT_LE(r.excess.mean, bound);
}

TEST(Excess, MinimizerGivesZeroExcess) {
  const auto q = quad4();
  EXPECT_EQ(q->population().value(q->global_minimum()) - q->population().value(q->global_minimum()), 0.0);
  AlgorithmSpec a = algo(AlgorithmKind::gd, 0);
  a.w0 = q->global_minimum();
  const ReplicateRecord rec = run_replicate(*q, a, 30, 0, 8, ReplicateOptions{});
  EXPECT_EQ(rec.excess, 0.0);
}

TEST(MinimaDistance, QuadraticWithinBound) {
  const auto q = quad4();
  const MinimaDistanceReport r = minima_distance_experiment(*q, 100, 100, 21);
  EXPECT_EQ(r.replicates, 100u);
  EXPECT_EQ(r.location_failures, 0u);
  EXPECT_EQ(r.violations, 0u);
  EXPECT_LE(r.max_ratio, 1.0);
  EXPECT_DOUBLE_EQ(r.bound, 8.0 * q->constants().L0 / (100 * q->constants().lambda));
  for (double dist : r.distances) EXPECT_LE(dist, 2.0 * q->constants().L0 / 100 + 1e-12);
}

TEST(GoodEvent, HoldsAtPopulationMinimumForZeroNoise) {
  const auto dw = quiet_well();
  const Dataset S = dw->sample(2, 20);
  for (const auto& m : dw->population_info().local_minima) EXPECT_TRUE(good_event(*dw, S, m));
}

TEST(Concentration, ZeroNoiseMomentsVanish) {
  const auto dw = quiet_well();
  const ConcentrationReport r = concentration_mc(*dw, dw->global_minimum(), 50, 20, 4);
  EXPECT_EQ(r.grad_moment.mean, 0.0);
  EXPECT_EQ(r.hess_moment.mean, 0.0);
  EXPECT_TRUE(r.grad_moment_pass);
  EXPECT_TRUE(r.hess_moment_pass);
}

TEST(Concentration, QuadraticGradientMomentMatchesVariance) {
  // grad R_S - grad R = mu - mean(S), so the second moment is E||z - mu||^2 / n.
  const auto q = quad4();
  const ConcentrationReport r = concentration_mc(*q, q->global_minimum(), 40, 4000, 6);
  const double exact = q->noise_second_moment() / 40.0;
  EXPECT_LE(std::abs(r.grad_moment.mean - exact), 3.0 * r.grad_moment.std_error);
  EXPECT_TRUE(r.grad_moment_pass);
  EXPECT_EQ(r.hess_moment.mean, 0.0);
  ASSERT_EQ(r.tails.size(), 6u);
  for (const TailCheck& t : r.tails) EXPECT_TRUE(t.pass) << to_string(t.kind) << " " << t.delta;
}

TEST(ParallelFor, FillsEverySlot) {
  std::vector<std::size_t> out(1000, 0);
  parallel_for(out.size(), [&](std::size_t i) { out[i] = i * i; });
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], i * i);
}
