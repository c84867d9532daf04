#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "nehari/error.hpp"
#include "nehari/fields.hpp"
#include "nehari/functional.hpp"

using namespace nehari;
using namespace nehari::fields;

namespace {

constexpr double kPi = 3.14159265358979323846;

DiscreteField sine(const GridDomain& g) {
  return DiscreteField::sample(g, [](double x, double) { return std::sin(kPi * x); });
}

DiscreteField noise(const GridDomain& g, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::VectorXd v(g.size());
  for (auto& x : v) x = n(rng);
  return {g, v};
}

}  // namespace

TEST(Grid, Geometry) {
  const auto g = GridDomain::rectangle(3, 4, 2.0, 1.0);
  EXPECT_EQ(g.size(), 12);
  EXPECT_EQ(g.cells(), 20);
  EXPECT_DOUBLE_EQ(g.h(0), 0.5);
  EXPECT_DOUBLE_EQ(g.h(1), 0.2);
  EXPECT_EQ(g.index(2, 3), 1 + 3 * 2);
  const auto p = g.position(g.index(2, 3));
  EXPECT_DOUBLE_EQ(p[0], 1.0);
  EXPECT_DOUBLE_EQ(p[1], 0.6);
}

TEST(Grid, InvalidRejected) {
  EXPECT_THROW(GridDomain::line(0), DomainError);
  EXPECT_THROW(GridDomain::line(5, -1.0), DomainError);
}

TEST(Gradient, ZeroFieldHasZeroGradient) {
  const auto g = GridDomain::rectangle(5, 6);
  EXPECT_TRUE(gradient(DiscreteField(g)).components.isZero(0.0));
}

TEST(Gradient, RampHasUnitSlopeInside) {
  const auto g = GridDomain::line(9);
  const auto u = DiscreteField::sample(g, [](double x, double) { return x; });
  const auto gr = gradient(u);
  // The last cell drops to the zero boundary value.
  for (int c = 0; c < g.cells() - 1; ++c) EXPECT_NEAR(gr.components(c, 0), 1.0, 1e-12);
}

TEST(Gradient, AdjointIdentity) {
  std::mt19937_64 rng(3);
  const auto g = GridDomain::rectangle(6, 5, 1.0, 2.0);
  const auto u = noise(g, rng);
  Eigen::MatrixXd w = Eigen::MatrixXd::Random(g.cells(), 2);
  const double lhs = gradient_adjoint(g, w).dot(u.values());
  const double rhs = g.cell_volume() * (w.array() * gradient(u).components.array()).sum();
  EXPECT_NEAR(lhs, rhs, 1e-12 * std::abs(rhs));
}

TEST(Integrals, SineIdentities) {
  const auto g = GridDomain::line(127);
  const auto u = sine(g);
  EXPECT_NEAR(dirichlet_energy_p(u, 2.0) / (kPi * kPi / 2.0), 1.0, 1e-3);
  EXPECT_NEAR(lp_norm_pow(u, 2.0) / 0.5, 1.0, 1e-3);
  EXPECT_NEAR(lp_norm_pow(u, 4.0) / 0.375, 1.0, 1e-3);
}

TEST(Integrals, ZeroAndConstantIntegrand) {
  const auto g = GridDomain::rectangle(7, 9, 1.5, 0.5);
  EXPECT_EQ(dirichlet_energy_p(DiscreteField(g), 3.0), 0.0);
  EXPECT_EQ(lp_norm_pow(DiscreteField(g), 2.0), 0.0);
  std::mt19937_64 rng(1);
  const auto u = noise(g, rng);
  // Interior nodes times cell volume: the measure up to the boundary strip.
  EXPECT_NEAR(composite_integral(u, [](double) { return 1.0; }), g.size() * g.cell_volume(), 1e-12);
  EXPECT_DOUBLE_EQ(composite_integral(u, [](double s) { return s * s / 2.0; }), lp_norm_pow(u, 2.0) / 2.0);
  EXPECT_NEAR(composite_integral(u, [](double s) { return std::pow(std::abs(s), 3.5) / 3.5; }),
              lp_norm_pow(u, 3.5) / 3.5, 1e-14 * lp_norm_pow(u, 3.5));
}

TEST(Integrals, NonFiniteIntegrandThrows) {
  const auto u = sine(GridDomain::line(5));
  EXPECT_THROW(composite_integral(u, [](double) { return std::nan(""); }), NumericalError);
}

TEST(Integrals, Homogeneity) {
  std::mt19937_64 rng(5);
  const auto g = GridDomain::rectangle(8, 8);
  const auto u = noise(g, rng);
  for (double p : {1.5, 2.0, 3.0}) {
    for (double t : {0.5, 2.0, 10.0}) {
      EXPECT_NEAR(dirichlet_energy_p(u.scaled(t), p), std::pow(t, p) * dirichlet_energy_p(u, p),
                  1e-12 * std::pow(t, p) * dirichlet_energy_p(u, p));
      EXPECT_NEAR(lp_norm_pow(u.scaled(t), p), std::pow(t, p) * lp_norm_pow(u, p),
                  1e-12 * std::pow(t, p) * lp_norm_pow(u, p));
    }
  }
}

TEST(EnergyGradient, DiscreteEigenpair) {
  const auto g = GridDomain::line(63);
  const auto u = sine(g);
  const double h = g.h(0);
  const double eig = 2.0 / (h * h) * (1.0 - std::cos(kPi * h));
  const Eigen::VectorXd want = h * eig * u.values();
  EXPECT_LE((energy_gradient_p(u, 2.0).values() - want).lpNorm<Eigen::Infinity>(),
            1e-10 * want.lpNorm<Eigen::Infinity>());
}

TEST(EnergyGradient, MatchesStiffnessForQuadratic) {
  std::mt19937_64 rng(9);
  const auto g = GridDomain::rectangle(7, 6);
  const auto u = noise(g, rng);
  const Eigen::VectorXd ku = stiffness_matrix(g) * u.values();
  EXPECT_LE((energy_gradient_p(u, 2.0).values() - ku).norm(), 1e-12 * ku.norm());
}

TEST(EnergyGradient, ZeroFieldAtP2) {
  EXPECT_TRUE(energy_gradient_p(DiscreteField(GridDomain::line(9)), 2.0).values().isZero(0.0));
}

TEST(EnergyGradient, FiniteDifferences) {
  std::mt19937_64 rng(11);
  const auto g = GridDomain::rectangle(9, 9);
  for (double p : {1.5, 2.0, 3.0}) {
    for (int k = 0; k < 20; ++k) {
      const auto u = noise(g, rng);
      const auto v = noise(g, rng);
      const double eps = 1e-6;
      const double fd = (dirichlet_energy_p(DiscreteField(g, u.values() + eps * v.values()), p) -
                         dirichlet_energy_p(DiscreteField(g, u.values() - eps * v.values()), p)) /
                        (2 * eps) / p;
      const Eigen::VectorXd gr = energy_gradient_p(u, p).values();
      const double scale = (gr.array() * v.values().array()).abs().sum();
      EXPECT_LE(std::abs(gr.dot(v.values()) - fd), 1e-5 * scale) << "p=" << p;
    }
  }
}

TEST(LpGradient, FiniteDifferences) {
  std::mt19937_64 rng(13);
  const auto g = GridDomain::line(31);
  const auto u = noise(g, rng);
  const auto v = noise(g, rng);
  for (double s : {1.5, 2.0, 4.0}) {
    const double eps = 1e-6;
    const double fd = (lp_norm_pow(DiscreteField(g, u.values() + eps * v.values()), s) -
                       lp_norm_pow(DiscreteField(g, u.values() - eps * v.values()), s)) /
                      (2 * eps);
    const Eigen::VectorXd gr = lp_norm_pow_gradient(u, s);
    EXPECT_LE(std::abs(gr.dot(v.values()) - fd), 1e-6 * (gr.array() * v.values().array()).abs().sum());
  }
}

TEST(Serialization, CsvRoundTrip) {
  std::mt19937_64 rng(17);
  const auto g = GridDomain::rectangle(4, 3, 1.25, 0.75);
  const auto u = noise(g, rng);
  std::stringstream ss;
  write_csv(ss, u);
  const auto back = read_csv(ss);
  EXPECT_EQ(back.grid(), g);
  EXPECT_EQ(back.values(), u.values());
}

TEST(Serialization, JsonRoundTrip) {
  std::mt19937_64 rng(19);
  const auto g = GridDomain::line(11, 3.0);
  const auto u = noise(g, rng);
  const auto back = field_from_json(to_json(u));
  EXPECT_EQ(back.grid(), g);
  EXPECT_EQ(back.values(), u.values());
}

TEST(Serialization, MalformedCsvRejected) {
  std::stringstream ss("dim,nx,ny,lx,ly\n1,3,1,1,1\nvalue\n0.1\n0.2\n");
  EXPECT_ANY_THROW(read_csv(ss));
}

TEST(Terms, DegreesAndRays) {
  std::mt19937_64 rng(23);
  const auto g = GridDomain::line(21);
  const auto v = noise(g, rng);
  const GradientPowerTerm e(2.0);
  const LebesguePowerTerm a(1.5);
  EXPECT_EQ(*e.degree(), 2.0);
  EXPECT_EQ(*a.degree(), 1.5);
  for (double t : {0.1, 1.0, 7.0}) {
    const auto j = a.ray(v)(t);
    EXPECT_NEAR(j.value, a.value(v.scaled(t)), 1e-12 * j.value);
    EXPECT_NEAR(j.d1, a.gradient(v.scaled(t)).dot(v.values()), 1e-12 * std::abs(j.d1));
    EXPECT_NEAR(j.d2, 0.75 * std::pow(t, -0.5) * a.value(v), 1e-12 * std::abs(j.d2));
  }
}

TEST(Terms, CompositeMatchesPowerClosedForm) {
  std::mt19937_64 rng(29);
  const auto g = GridDomain::line(25);
  const auto v = noise(g, rng);
  const CompositeTerm f(Nonlinearity::pure_power(4.0));
  const LebesguePowerTerm b(4.0);
  EXPECT_NEAR(f.value(v), b.value(v) / 4.0, 1e-13 * b.value(v));
  EXPECT_LE((f.gradient(v) - b.gradient(v) / 4.0).norm(), 1e-13 * b.gradient(v).norm());
  EXPECT_LE((f.radial_hessian(v) - 3.0 * b.gradient(v) / 4.0).norm(), 1e-12 * b.gradient(v).norm());
}

TEST(Terms, LogarithmicNonlinearityConsistent) {
  const auto nl = Nonlinearity::logarithmic();
  for (double s : {-3.0, -0.2, 0.4, 2.5}) {
    const double h = 1e-6;
    EXPECT_NEAR((nl.primitive(s + h) - nl.primitive(s - h)) / (2 * h), nl.f(s), 1e-8);
    EXPECT_NEAR((nl.f(s + h) - nl.f(s - h)) / (2 * h), nl.f_prime(s), 1e-8);
  }
}

TEST(Terms, FunctionalCombinesLinearly) {
  std::mt19937_64 rng(31);
  const auto g = GridDomain::line(15);
  const auto v = noise(g, rng);
  Functional phi;
  phi.add(0.5, std::make_shared<GradientPowerTerm>(2.0))
      .add(-0.25, std::make_shared<LebesguePowerTerm>(4.0));
  EXPECT_FALSE(phi.degree().has_value());
  const double want = 0.5 * dirichlet_energy_p(v, 2.0) - 0.25 * lp_norm_pow(v, 4.0);
  EXPECT_NEAR(phi.value(v), want, 1e-12 * std::abs(want));
  const auto j = phi.ray(v)(1.0);
  EXPECT_NEAR(j.d1, phi.gradient(v).dot(v.values()), 1e-12 * j.d1_scale);
}
