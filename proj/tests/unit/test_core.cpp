#include "stablab/core.hpp"
#include "stablab/rng.hpp"

#include "../oracles/jacobi.hpp"

#include <gtest/gtest.h>

using namespace stablab;

namespace {

ParamVector vec(std::initializer_list<double> xs) {
  ParamVector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

BallDomain unit_ball(Eigen::Index d) { return BallDomain(ParamVector::Zero(d), 1.0); }

}  // namespace

TEST(Project, InteriorPointIsFixed) {
  const ParamVector v = vec({0.5, 0.0});
  EXPECT_EQ(project(unit_ball(2), v), v);
}

TEST(Project, RadialScaling) {
  const ParamVector p = project(unit_ball(2), vec({3.0, 4.0}));
  EXPECT_NEAR(p[0], 0.6, 1e-15);
  EXPECT_NEAR(p[1], 0.8, 1e-15);
}

TEST(Project, BoundaryPointIsFixed) {
  const ParamVector v = vec({0.6, 0.8});
  EXPECT_EQ(project(unit_ball(2), v), v);
}

TEST(Project, DimensionMismatchThrows) {
  EXPECT_THROW(project(unit_ball(2), vec({1.0, 2.0, 3.0})), UsageError);
}

TEST(Project, ZeroRadiusRejected) { EXPECT_THROW(BallDomain(ParamVector::Zero(2), 0.0), UsageError); }

TEST(Project, IdempotentAndNonexpansiveOnSamples) {
  Rng rng(41);
  const BallDomain dom(vec({0.3, -0.2, 0.1}), 1.7);
  for (int i = 0; i < 2000; ++i) {
    const ParamVector v = dom.center() + 6.0 * rng.normal_vector(3);
    const ParamVector p = project(dom, v);
    EXPECT_TRUE(dom.contains(p, 1e-12));
    EXPECT_EQ(project(dom, p), p);
    const ParamVector w = dom.center() + rng.uniform_ball(3, dom.radius());
    EXPECT_LE((p - w).norm(), (v - w).norm() + 1e-12);
  }
}

TEST(BallDomain, DiameterBoundsSampledPairs) {
  Rng rng(5);
  const BallDomain dom(vec({1.0, 2.0}), 0.75);
  EXPECT_DOUBLE_EQ(dom.diameter(), 1.5);
  for (int i = 0; i < 1000; ++i) {
    const ParamVector a = dom.center() + rng.uniform_ball(2, dom.radius());
    const ParamVector b = dom.center() + rng.uniform_ball(2, dom.radius());
    EXPECT_LE((a - b).norm(), dom.diameter());
  }
}

TEST(Substitute, PositionalReplacement) {
  Dataset S{{vec({1}), vec({2}), vec({3})}};
  const Dataset out = substitute(S, 1, vec({9}));
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0][0], 1);
  EXPECT_EQ(out[1][0], 9);
  EXPECT_EQ(out[2][0], 3);
  EXPECT_EQ(S[1][0], 2);  // input untouched
}

TEST(Substitute, SelfAndInvolution) {
  Dataset S{{vec({1}), vec({2})}};
  const Dataset same = substitute(S, 0, S[0]);
  EXPECT_EQ(same[0], S[0]);
  const Dataset back = substitute(substitute(S, 1, vec({7})), 1, S[1]);
  for (std::size_t i = 0; i < S.size(); ++i) EXPECT_EQ(back[i], S[i]);
}

TEST(Substitute, OutOfRangeThrows) {
  Dataset S{{vec({1})}};
  EXPECT_THROW(substitute(S, 1, vec({2})), UsageError);
}

TEST(Eigen, IdentitySpectrum) {
  const EigenPair p = smallest_eigenpair(Matrix::Identity(3, 3));
  EXPECT_NEAR(p.value, 1.0, 1e-14);
  EXPECT_NEAR(p.vector.norm(), 1.0, 1e-14);
}

TEST(Eigen, DiagonalPicksMostNegative) {
  Matrix h = Matrix::Zero(3, 3);
  h.diagonal() << 2.0, -5.0, 7.0;
  const EigenPair p = smallest_eigenpair(h);
  EXPECT_NEAR(p.value, -5.0, 1e-14);
  EXPECT_NEAR(std::abs(p.vector[1]), 1.0, 1e-14);
  EXPECT_GT(p.vector[1], 0.0);  // orientation rule
}

TEST(Eigen, NonFiniteRejected) {
  Matrix h = Matrix::Identity(2, 2);
  h(0, 1) = std::nan("");
  EXPECT_THROW(smallest_eigenpair(h), UsageError);
}

TEST(Eigen, MatchesJacobiOracleOnRandomSymmetric) {
  Rng rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 6;
    Matrix g(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) g(i, j) = rng.normal();
    const Matrix h = 0.5 * (g + g.transpose());
    std::vector<std::vector<double>> a(n, std::vector<double>(n));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a[i][j] = h(i, j);
    const auto ref = oracle::jacobi_eigen(a);
    const EigenPair p = smallest_eigenpair(h);
    EXPECT_NEAR(p.value, ref.values.front(), 1e-8);
    const double resid = (h * p.vector - p.value * p.vector).norm();
    EXPECT_LE(resid, 1e-8 * (1.0 + spectral_norm_sym(h)));
    const double abs_max = std::max(std::abs(ref.values.front()), std::abs(ref.values.back()));
    EXPECT_NEAR(spectral_norm_sym(h), abs_max, 1e-8);
    // Rayleigh quotients of random unit vectors never go below the minimum.
    for (int k = 0; k < 20; ++k) {
      const ParamVector u = rng.unit_sphere(n);
      EXPECT_GE(u.dot(h * u), p.value - 1e-12);
    }
  }
}

TEST(Eigen, SymmetrizesInput) {
  Matrix h(2, 2);
  h << 1.0, 2.0, 0.0, 1.0;  // symmetrized to [[1,1],[1,1]]
  EXPECT_NEAR(min_eigenvalue(h), 0.0, 1e-14);
}

TEST(Constants, InvariantsEnforced) {
  ConstantsBundle c;
  c.L0 = 1;
  c.L1 = 1;
  c.lambda = 0.5;
  c.saddle_curvature = 0.5;
  c.M = 1;
  c.D = 1;
  c.alpha = 0.1;
  EXPECT_NO_THROW(c.validate());
  ConstantsBundle bad = c;
  bad.lambda = 2.0;
  EXPECT_THROW(bad.validate(), UsageError);
  bad = c;
  bad.beta = 1.0;
  EXPECT_THROW(bad.validate(), UsageError);
  bad = c;
  bad.L2 = -1;
  EXPECT_THROW(bad.validate(), UsageError);
}
