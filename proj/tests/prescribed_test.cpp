#include <gtest/gtest.h>

#include <cmath>

#include "nehari/error.hpp"
#include "nehari/prescribed.hpp"

using namespace nehari;
using namespace nehari::prescribed;
using fields::GridDomain;
using manifold::stream_rng;

namespace {

// t -> 0.25 t^2 - 0.625 t^4: the H profile of the power model on a direction
// with unit Dirichlet energy and unit L^4 mass.
fields::RayJet quartic(double t) {
  fields::RayJet j;
  j.value = 0.25 * t * t - 0.625 * std::pow(t, 4);
  j.d1 = 0.5 * t - 2.5 * std::pow(t, 3);
  j.d2 = 0.5 - 7.5 * t * t;
  j.value_scale = 0.25 * t * t + 0.625 * std::pow(t, 4);
  j.d1_scale = 0.5 * t + 2.5 * std::pow(t, 3);
  return j;
}

const PrescribedProblem& cc() {
  static const auto p = build_semilinear_cc(GridDomain::line(31), 1.5, fields::Nonlinearity::pure_power(4.0));
  return p;
}

const PrescribedProblem& pq() {
  static const auto p = build_pq_laplacian(GridDomain::line(31), 3.0, 2.0, 1.5, 4.0);
  return p;
}

manifold::MinimizeOptions quick(std::uint64_t seed) {
  manifold::MinimizeOptions o;
  o.starts = 3;
  o.seed = seed;
  return o;
}

double cc_h0() {
  static const double h0 = h_ground_level(cc(), quick(1)).h0;
  return h0;
}

}  // namespace

TEST(HProfile, ScalarMaximum) {
  const auto p = h_profile_roots(quartic, 0.015);
  EXPECT_NEAR(p.s, std::sqrt(0.2), 1e-10);
  EXPECT_NEAR(p.h_max, 0.025, 1e-14);
}

TEST(HProfile, ScalarRootsMatchClosedFormAndScan) {
  const auto p = h_profile_roots(quartic, 0.015);
  ASSERT_TRUE(p.t_plus && p.t_minus);
  // 0.625 x^2 - 0.25 x + 0.015 = 0 with x = t^2
  const double disc = std::sqrt(0.0625 - 4 * 0.625 * 0.015);
  EXPECT_NEAR(*p.t_plus, std::sqrt((0.25 - disc) / 1.25), 1e-10);
  EXPECT_NEAR(*p.t_minus, std::sqrt((0.25 + disc) / 1.25), 1e-10);

  std::vector<double> crossings;
  double prev = quartic(0.0).value - 0.015;
  for (int i = 1; i <= 1000000; ++i) {
    const double t = 1e-6 * i;
    const double cur = quartic(t).value - 0.015;
    if ((prev < 0) != (cur < 0)) crossings.push_back(t);
    prev = cur;
  }
  ASSERT_EQ(crossings.size(), 2u);
  EXPECT_NEAR(*p.t_plus, crossings[0], 1e-6);
  EXPECT_NEAR(*p.t_minus, crossings[1], 1e-6);
}

TEST(HProfile, AtAndAboveTheMaximum) {
  EXPECT_THROW(h_profile_roots(quartic, 0.025), DegenerateRay);
  const auto p = h_profile_roots(quartic, 0.03);
  EXPECT_FALSE(p.t_plus);
  EXPECT_FALSE(p.t_minus);
}

TEST(HProfile, NonUnimodalRayRejected) {
  auto bumpy = [](double t) {
    fields::RayJet j;
    j.value = std::sin(t);
    j.d1 = std::cos(t);
    j.value_scale = j.d1_scale = 1.0;
    return j;
  };
  EXPECT_THROW(h_ray_maximizer(bumpy), UnimodalityViolation);
}

TEST(HFunctional, PowerModelClosedForm) {
  auto rng = stream_rng(1, 0);
  const auto v = cc().sphere.random_point(rng);
  const double e = fields::dirichlet_energy_p(v, 2.0);
  const double b = fields::lp_norm_pow(v, 4.0);
  const auto h = h_ray(cc(), v);
  for (double t : {0.3, 1.0, 4.0}) {
    const double want = (1 - 0.75) * t * t * e - (1 - 1.5 / 4.0) * std::pow(t, 4) * b;
    EXPECT_NEAR(h(t).value, want, 1e-12 * (t * t * e + std::pow(t, 4) * b));
    EXPECT_NEAR(h_value(cc(), v.scaled(t)), want, 1e-12 * (t * t * e + std::pow(t, 4) * b));
  }
}

TEST(HFunctional, PqModelThreeTermExpression) {
  auto rng = stream_rng(2, 0);
  for (int k = 0; k < 20; ++k) {
    const auto u = pq().sphere.random_point(rng).scaled(0.5 + 0.2 * k);
    const double want = (1 - 1.5 / 3.0) * fields::dirichlet_energy_p(u, 3.0) +
                        (1 - 1.5 / 2.0) * fields::dirichlet_energy_p(u, 2.0) -
                        (1 - 1.5 / 4.0) * fields::lp_norm_pow(u, 4.0);
    const double direct = i1_value(pq(), u);
    const double via_i1 = pq().i1().gradient(u).dot(u.values()) - pq().alpha * direct;
    EXPECT_NEAR(h_value(pq(), u), want, 1e-10 * std::abs(want) + 1e-14);
    EXPECT_NEAR(via_i1, want, 1e-10 * std::abs(want) + 1e-14);
  }
}

TEST(HFunctional, GradientMatchesFiniteDifferences) {
  auto rng = stream_rng(3, 0);
  const auto u = cc().sphere.random_point(rng).scaled(1.3);
  const Eigen::VectorXd w = cc().sphere.random_tangent(u, rng);
  const double eps = 1e-6;
  const double fd = (h_value(cc(), fields::DiscreteField(u.grid(), u.values() + eps * w)) -
                     h_value(cc(), fields::DiscreteField(u.grid(), u.values() - eps * w))) /
                    (2 * eps);
  const Eigen::VectorXd g = h_gradient(cc(), u);
  EXPECT_NEAR(g.dot(w), fd, 1e-6 * (g.array() * w.array()).abs().sum());
}

TEST(HGround, HomogeneousI1GivesZero) {
  const auto g = GridDomain::line(15);
  PrescribedProblem prob{.name = "homogeneous",
                         .sphere = manifold::SphereGeometry(g, 2.0),
                         .j = {},
                         .k = {},
                         .i2 = {},
                         .alpha = 2.0,
                         .beta = std::nullopt,
                         .a_part = std::nullopt,
                         .split = std::nullopt,
                         .warnings = {}};
  prob.j.add(0.5, std::make_shared<fields::GradientPowerTerm>(2.0));
  prob.i2.add(0.5, std::make_shared<fields::LebesguePowerTerm>(2.0));
  auto rng = stream_rng(4, 0);
  const auto v = prob.sphere.random_point(rng);
  EXPECT_NEAR(h_value(prob, v.scaled(3.0)), 0.0, 1e-12);
  const auto ground = h_ground_level(prob, quick(4));
  EXPECT_TRUE(ground.identically_zero);
  EXPECT_EQ(ground.h0, 0.0);
}

TEST(HGround, PositiveAndReproducibleAcrossSeeds) {
  const double a = cc_h0();
  const double b = h_ground_level(cc(), quick(2)).h0;
  EXPECT_GT(a, 0.0);
  EXPECT_NEAR(b / a, 1.0, 0.01);
}

TEST(HGround, SingleDirectionMatchesScalarProfile) {
  auto rng = stream_rng(5, 0);
  const auto v = cc().sphere.random_point(rng);
  const double e = fields::dirichlet_energy_p(v, 2.0);
  const double b = fields::lp_norm_pow(v, 4.0);
  // max_t 0.25 e t^2 - 0.625 b t^4 at t^2 = e / (5 b)
  const double h_max = 0.25 * e * e / (10.0 * b);
  const auto prof = roots_of_H(cc(), v, -0.5 * h_max / cc().alpha);
  EXPECT_NEAR(prof.h_max, h_max, 1e-8 * h_max);
  EXPECT_NEAR(prof.s, std::sqrt(e / (5.0 * b)), 1e-8 * prof.s);
}

TEST(LambdaC, ZeroI1AndLinearityInC) {
  auto rng = stream_rng(6, 0);
  const auto v = cc().sphere.random_point(rng);
  const double e = fields::dirichlet_energy_p(v, 2.0);
  const double b = fields::lp_norm_pow(v, 4.0);
  const auto u = v.scaled(std::sqrt(2.0 * e / b));  // 0.5 t^2 e = 0.25 t^4 b
  ASSERT_NEAR(i1_value(cc(), u), 0.0, 1e-12 * e);
  const double i2 = i2_value(cc(), u);
  EXPECT_NEAR(lambda_c_value(cc(), u, -0.01), 0.01 / i2, 1e-10 * 0.01 / i2);
  EXPECT_GT(lambda_c_value(cc(), u, -0.01), 0.0);
  const auto w = v.scaled(0.7);
  const double diff = lambda_c_value(cc(), w, -0.01) - lambda_c_value(cc(), w, -0.03);
  EXPECT_NEAR(diff, (-0.03 + 0.01) / i2_value(cc(), w), 1e-12 * std::abs(diff));
}

TEST(LambdaC, GradientMatchesFiniteDifferences) {
  auto rng = stream_rng(7, 0);
  const auto u = cc().sphere.random_point(rng).scaled(0.8);
  const Eigen::VectorXd w = cc().sphere.random_tangent(u, rng);
  const double eps = 1e-6;
  const double c = -0.02;
  const double fd = (lambda_c_value(cc(), fields::DiscreteField(u.grid(), u.values() + eps * w), c) -
                     lambda_c_value(cc(), fields::DiscreteField(u.grid(), u.values() - eps * w), c)) /
                    (2 * eps);
  const Eigen::VectorXd g = lambda_c_gradient(cc(), u, c);
  EXPECT_NEAR(g.dot(w), fd, 1e-6 * (g.array() * w.array()).abs().sum());
}

TEST(LambdaC, StationaryAtHRoots) {
  const double c = -0.5 * cc_h0() / cc().alpha;
  auto rng = stream_rng(8, 0);
  int checked = 0;
  for (int k = 0; k < 10; ++k) {
    const auto v = cc().sphere.random_point(rng);
    const auto prof = roots_of_H(cc(), v, c);
    if (!prof.t_c_plus) continue;
    const auto ray = lambda_c_ray(cc(), v, c);
    for (double t : {*prof.t_c_plus, *prof.t_c_minus}) {
      const auto j = ray(t);
      const double h = 1e-6 * t;
      const double fd = (ray(t + h).value - ray(t - h).value) / (2 * h);
      EXPECT_LE(std::abs(fd), 1e-6 * j.d1_scale);
      const double scale = h_ray(cc(), v)(t).value_scale - cc().alpha * c;
      EXPECT_NEAR(h_value(cc(), v.scaled(t)), -cc().alpha * c, 1e-11 * scale);
    }
    EXPECT_GT(prof.s - *prof.t_c_plus, 0.0);
    EXPECT_LT(ray(*prof.t_c_plus).value, ray(*prof.t_c_minus).value);
    ++checked;
  }
  EXPECT_GT(checked, 0);
}

TEST(Prescribed, CertifiedBelowGroundLevel) {
  const double h0 = cc_h0();
  const double c = -0.1 * h0 / cc().alpha;
  PrescribedOptions o;
  o.minimize = quick(9);
  o.h0 = h0;
  const auto plus = solve_prescribed(cc(), c, manifold::Branch::Plus, o);
  const auto minus = solve_prescribed(cc(), c, manifold::Branch::Minus, o);
  for (const auto* r : {&plus, &minus}) {
    EXPECT_TRUE(r->solution.certified);
    EXPECT_LE(r->solution.phi_residual, 1e-6);
    EXPECT_LE(r->solution.energy_error, 1e-6);
  }
  EXPECT_LT(plus.solution.lambda_star, minus.solution.lambda_star);

  // The reflected solution certifies the same way.
  const auto phi = fixed_lambda_problem(cc(), plus.solution.lambda_star);
  const auto neg = plus.solution.u_star.scaled(-1.0);
  EXPECT_NEAR(phi.value(neg), c, 1e-6);
  EXPECT_LE(phi.sphere.dual_norm(phi.gradient(neg)), 1e-6);
}

TEST(Prescribed, OutOfRangeRejected) {
  const double h0 = cc_h0();
  PrescribedOptions o;
  o.h0 = h0;
  try {
    solve_prescribed(cc(), -1.1 * h0 / cc().alpha, manifold::Branch::Plus, o);
    FAIL() << "level above h0 accepted";
  } catch (const OutOfRangeLevel& e) {
    EXPECT_EQ(e.h0(), h0);
  }
  EXPECT_THROW(solve_prescribed(cc(), 0.01, manifold::Branch::Plus, o), OutOfRangeLevel);
}

TEST(Gaps, PositiveOnPqModel) {
  const auto ground = h_ground_level(pq(), quick(10));
  const auto g = gap_diagnostics(pq(), -0.5 * ground.h0 / pq().alpha, 100, 3);
  EXPECT_EQ(g.rootless, 0);
  EXPECT_GT(g.min_s_gap, 0.0);
  EXPECT_GT(g.min_lambda_gap, 0.0);
  EXPECT_GT(g.derivative_floor, 0.0);
}

TEST(Gaps, NPlusNormShrinksWithLevel) {
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 4; ++k) {
    const double c = -cc_h0() * std::pow(2.0, -k) / cc().alpha;
    const double sup = gap_diagnostics(cc(), c, 50, 4).sup_nplus_norm;
    EXPECT_LT(sup, prev) << "k=" << k;
    prev = sup;
  }
}

TEST(Builders, ExponentOrderingIsAConfigError) {
  const auto g = GridDomain::line(9);
  EXPECT_THROW(build_semilinear_cc(g, 2.5, fields::Nonlinearity::pure_power(4.0)), ConfigError);
  EXPECT_THROW(build_pq_laplacian(g, 3.0, 4.0, 1.5, 5.0), ConfigError);
  EXPECT_THROW(build_pq_laplacian(g, 3.0, 2.0, 2.5, 4.0), ConfigError);
  EXPECT_EQ(cc().alpha, 1.5);
  EXPECT_EQ(pq().alpha, 1.5);
}

TEST(Builders, MonotonicitySpotCheck) {
  EXPECT_TRUE(check_f2(fields::Nonlinearity::pure_power(4.0), 1.5).empty());
  EXPECT_TRUE(check_f2(fields::Nonlinearity::logarithmic(), 1.5).empty());
  auto flipped = fields::Nonlinearity::pure_power(4.0);
  flipped.f = [](double s) { return -s * s * s; };
  flipped.f_prime = [](double s) { return -3.0 * s * s; };
  EXPECT_FALSE(check_f2(flipped, 1.5).empty());
}
