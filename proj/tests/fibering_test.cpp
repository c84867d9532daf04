#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nehari/error.hpp"
#include "nehari/fibering.hpp"

using namespace nehari;
using namespace nehari::fibering;

namespace {

const HomogeneityDegrees kQuad{1.0, 2.0, 3.0};
const FiberingCoefficients kOnes{1.0, 1.0, 1.0};

// phi'(t) = t - lambda - t^2 here, so everything has a closed form.
double quad_root(double lambda, int sign) { return 0.5 * (1.0 + sign * std::sqrt(1.0 - 4.0 * lambda)); }

}  // namespace

TEST(FiberingValue, QuadraticArithmetic) {
  EXPECT_NEAR(phi_value(kOnes, kQuad, 0.25, 1.0), -1.0 / 12.0, 1e-15);
}

TEST(FiberingValue, NegativeAlphaAllowed) {
  const HomogeneityDegrees deg{-1.0, 2.0, 4.0};
  EXPECT_NEAR(phi_value({2.0, 1.0, 1.0}, deg, 1.0, 1.0), 1.75, 1e-15);
}

TEST(FiberingValue, ScalingMovesAlongTheRay) {
  const HomogeneityDegrees deg{1.5, 2.0, 4.0};
  const FiberingCoefficients c{0.7, 1.3, 2.1};
  for (double s : {0.3, 1.7, 12.0}) {
    for (double t : {0.05, 0.8, 3.0}) {
      const double direct = phi_value(c, deg, 0.2, s * t);
      const double scaled = phi_value(c.scaled(deg, s), deg, 0.2, t);
      EXPECT_NEAR(direct, scaled, 1e-13 * (1.0 + std::abs(direct)));
    }
  }
}

TEST(FiberingDerivative, VanishesAtQuadraticRoots) {
  EXPECT_NEAR(phi_prime(kOnes, kQuad, 0.1875, 0.25), 0.0, 1e-16);
  EXPECT_NEAR(phi_prime(kOnes, kQuad, 0.1875, 0.75), 0.0, 1e-16);
  EXPECT_NEAR(phi_prime(kOnes, kQuad, 0.25, 0.5), 0.0, 1e-16);
}

TEST(FiberingDerivative, MatchesCenteredDifferences) {
  const HomogeneityDegrees deg{-0.5, 1.5, 3.5};
  const FiberingCoefficients c{1.2, 0.4, 0.9};
  for (double t : {0.2, 1.0, 2.5}) {
    const double h = 1e-5 * t;
    const double fd = (phi_value(c, deg, 0.3, t + h) - phi_value(c, deg, 0.3, t - h)) / (2 * h);
    EXPECT_NEAR(phi_prime(c, deg, 0.3, t), fd, 1e-8 * phi_prime_scale(c, deg, 0.3, t));
  }
}

TEST(FiberingThreshold, QuadraticCase) {
  const auto th = lambda_threshold(kOnes, kQuad);
  EXPECT_NEAR(th.lambda_u, 0.25, 1e-15);
  EXPECT_NEAR(th.t0, 0.5, 1e-15);
  EXPECT_NEAR(th.c_const, 0.25, 1e-15);
}

TEST(FiberingThreshold, QuarticCaseMatchesScan) {
  const HomogeneityDegrees deg{1.0, 2.0, 4.0};
  const auto th = lambda_threshold(kOnes, deg);
  // max over t of t - t^3 on a dense grid of (0, 10]
  double best = -1e300, arg = 0.0;
  for (int i = 1; i <= 1000000; ++i) {
    const double t = 1e-5 * i;
    const double v = t - t * t * t;
    if (v > best) best = v, arg = t;
  }
  EXPECT_NEAR(th.c_const, 0.3849001794597505, 1e-12);
  EXPECT_NEAR(th.t0, 0.5773502691896258, 1e-12);
  EXPECT_NEAR(th.lambda_u, th.c_const, 1e-15);
  EXPECT_NEAR(th.lambda_u, best, 1e-9);
  EXPECT_NEAR(th.t0, arg, 1e-5);
}

TEST(FiberingThreshold, ZeroHomogeneousInDirectionScale) {
  const HomogeneityDegrees deg{1.2, 2.0, 3.3};
  const FiberingCoefficients c{0.8, 1.9, 0.6};
  const double base = lambda_threshold(c, deg).lambda_u;
  for (double s : {1e-3, 0.5, 40.0}) {
    EXPECT_NEAR(lambda_threshold(c.scaled(deg, s), deg).lambda_u, base, 1e-12 * base);
  }
}

TEST(FiberingRoots, QuadraticTrichotomy) {
  const auto two = fibering_roots(kOnes, kQuad, 0.1875);
  ASSERT_EQ(two.kind, RootKind::TwoRoots);
  EXPECT_NEAR(two.t_plus, 0.25, 1e-12);
  EXPECT_NEAR(two.t_minus, 0.75, 1e-12);

  const auto deg = fibering_roots(kOnes, kQuad, 0.25);
  ASSERT_EQ(deg.kind, RootKind::Degenerate);
  EXPECT_NEAR(deg.t_plus, 0.5, 1e-12);
  EXPECT_NEAR(deg.t_minus, 0.5, 1e-12);

  EXPECT_EQ(fibering_roots(kOnes, kQuad, 0.3).kind, RootKind::NoRoots);
}

TEST(FiberingRoots, FollowQuadraticFormulaAcrossLambda) {
  for (double lambda : {1e-6, 0.01, 0.1, 0.2, 0.24}) {
    const auto r = fibering_roots(kOnes, kQuad, lambda);
    ASSERT_EQ(r.kind, RootKind::TwoRoots) << lambda;
    EXPECT_NEAR(r.t_plus, quad_root(lambda, -1), 1e-10 * quad_root(lambda, -1));
    EXPECT_NEAR(r.t_minus, quad_root(lambda, 1), 1e-10);
  }
}

TEST(FiberingRoots, InvalidDegreesRejected) {
  EXPECT_THROW(fibering_roots(kOnes, {2.0, 1.0, 3.0}, 0.1), DomainError);
  EXPECT_THROW(fibering_roots(kOnes, {0.0, 1.0, 3.0}, 0.1), DomainError);
  EXPECT_THROW(fibering_roots({-1.0, 1.0, 1.0}, kQuad, 0.1), DomainError);
}

// Property: on random admissible data below the threshold the two roots are
// ordered, bracket t0 and are a local min / local max.
TEST(FiberingProperty, RootsStraddleThresholdPoint) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> first(-1.5, 2.5), gap(0.25, 2.5), mag(-1.0, 1.0);
  int checked = 0;
  while (checked < 200) {
    HomogeneityDegrees deg{first(rng), 0.0, 0.0};
    deg.eta = deg.alpha + gap(rng);
    deg.beta = deg.eta + gap(rng);
    if (std::abs(deg.alpha) < 0.1 || std::abs(deg.eta) < 0.1 || std::abs(deg.beta) < 0.1) continue;
    const FiberingCoefficients c{std::pow(10.0, mag(rng)), std::pow(10.0, mag(rng)),
                                 std::pow(10.0, mag(rng))};
    const auto th = lambda_threshold(c, deg);
    const double lambda = 0.7 * th.lambda_u;
    const auto r = fibering_roots(c, deg, lambda);
    ASSERT_EQ(r.kind, RootKind::TwoRoots);
    EXPECT_LT(r.t_plus, th.t0);
    EXPECT_GT(r.t_minus, th.t0);
    EXPECT_LE(std::abs(phi_prime(c, deg, lambda, r.t_plus)), 1e-9 * phi_prime_scale(c, deg, lambda, r.t_plus));
    EXPECT_EQ(classify_stationary(c, deg, lambda, r.t_plus), Stationarity::LocalMin);
    EXPECT_EQ(classify_stationary(c, deg, lambda, r.t_minus), Stationarity::LocalMax);
    EXPECT_LT(phi_value(c, deg, lambda, r.t_plus), phi_value(c, deg, lambda, r.t_minus));
    ++checked;
  }
}

TEST(FiberingClassify, QuadraticStationaryPoints) {
  EXPECT_EQ(classify_stationary(kOnes, kQuad, 0.1875, 0.25), Stationarity::LocalMin);
  EXPECT_EQ(classify_stationary(kOnes, kQuad, 0.1875, 0.75), Stationarity::LocalMax);
  EXPECT_EQ(classify_stationary(kOnes, kQuad, 0.25, 0.5), Stationarity::Degenerate);
}

TEST(FiberingClassify, RejectsNonStationaryPoint) {
  EXPECT_THROW(classify_stationary(kOnes, kQuad, 0.1875, 0.4), ContractViolation);
}

TEST(FiberingBounds, QuadraticCase) {
  const auto b = root_bounds(kOnes, kQuad, 0.1875);
  EXPECT_NEAR(b.t_plus_upper, 0.375, 1e-12);
  EXPECT_NEAR(b.t_minus_lower, 0.5, 1e-12);
  EXPECT_LT(0.25, b.t_plus_upper);
  EXPECT_GE(0.75, b.t_minus_lower);
}

TEST(FiberingBounds, NeedTwoRoots) {
  EXPECT_THROW(root_bounds(kOnes, kQuad, 0.3), ContractViolation);
}

TEST(FiberingBounds, DegenerateLimitApproachesThresholdPoint) {
  const auto b = root_bounds(kOnes, kQuad, 0.25 - 1e-8);
  const auto r = fibering_roots(kOnes, kQuad, 0.25 - 1e-8);
  EXPECT_LT(r.t_plus, b.t_plus_upper);
  EXPECT_NEAR(r.t_minus - b.t_minus_lower, 0.0, 1e-3);
}
