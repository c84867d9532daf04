#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nehari/manifold.hpp"

namespace nehari::prescribed {

using fields::DiscreteField;
using fields::Functional;
using fields::RayFunction;
using fields::RayJet;
using manifold::Branch;
using manifold::SphereGeometry;

/// Homogeneous split I1 = (1/eta) E - (1/beta) B and I2 = (1/alpha) A, when
/// the model admits one; enables closed-form fibering for fixed lambda.
struct HomogeneousSplit {
  fibering::HomogeneityDegrees degrees;
  fields::TermPtr e;
  fields::TermPtr a;
  fields::TermPtr b;
};

struct HScanOptions {
  double t_min = 1e-8;
  double t_max = 1e8;
  int points_per_decade = 24;
  /// Residual tolerance of the bisections, relative to the jet scales.
  double root_tol = 1e-12;
  /// |-alpha c - h_max| <= degeneracy * h_max counts as a double root.
  double degeneracy = 1e-9;
  int max_bisections = 300;
};

/// Phi_lambda = I1 - lambda I2 with I1 = J - K and I2 alpha-homogeneous.
struct PrescribedProblem {
  std::string name;
  SphereGeometry sphere;
  Functional j;
  Functional k;
  Functional i2;
  double alpha = 0.0;
  /// J = (1/beta) ||u||^beta + A_part(u), when known.
  std::optional<double> beta;
  std::optional<Functional> a_part;
  std::optional<HomogeneousSplit> split;
  std::vector<std::string> warnings;
  HScanOptions scan{};

  Functional i1() const;
};

double i1_value(const PrescribedProblem& prob, const DiscreteField& u);
double i2_value(const PrescribedProblem& prob, const DiscreteField& u);

/// H(u) = I1'(u)u - alpha I1(u).
double h_value(const PrescribedProblem& prob, const DiscreteField& u);
/// H'(u) = I1''(u)u + (1 - alpha) I1'(u).
Eigen::VectorXd h_gradient(const PrescribedProblem& prob, const DiscreteField& u);
/// t -> (H(tv), d/dt H(tv), d^2/dt^2 H(tv)); the second derivative is a
/// centered difference of the first.
RayFunction h_ray(const PrescribedProblem& prob, const DiscreteField& v);
RayJet h_ray(const PrescribedProblem& prob, const DiscreteField& v, double t);

/// Shape of one H ray: maximizer, maximum and the two roots of
/// H(t) = target when they exist.
struct ScalarHProfile {
  double s = 0.0;
  double h_max = 0.0;
  std::optional<double> t_plus;
  std::optional<double> t_minus;
};

/// Maximizer of an increasing-then-decreasing ray profile (scan for the slope
/// sign change, then bisection). Throws UnimodalityViolation otherwise.
double h_ray_maximizer(const RayFunction& h, const HScanOptions& opts = {});

/// Profile and roots of H(t) = target for target > 0. Throws DegenerateRay
/// when target is within the degeneracy band of h_max.
ScalarHProfile h_profile_roots(const RayFunction& h, double target, const HScanOptions& opts = {});

struct HProfile {
  DiscreteField direction{fields::GridDomain{}};
  double s = 0.0;
  double h_max = 0.0;
  std::optional<double> t_c_plus;
  std::optional<double> t_c_minus;
  std::string diagnostic;
};

HProfile roots_of_H(const PrescribedProblem& prob, const DiscreteField& v, double c);

/// lambda_c(u) = (I1(u) - c) / I2(u).
double lambda_c_value(const PrescribedProblem& prob, const DiscreteField& u, double c);
Eigen::VectorXd lambda_c_gradient(const PrescribedProblem& prob, const DiscreteField& u, double c);
RayFunction lambda_c_ray(const PrescribedProblem& prob, const DiscreteField& v, double c);

/// lambda_c as a sphere problem whose branches are t_c^{+-}.
manifold::VariationalProblem lambda_c_problem(const PrescribedProblem& prob, double c);
/// H as a sphere problem whose Minus branch is s(v).
manifold::VariationalProblem h_problem(const PrescribedProblem& prob);
/// Phi_lambda = I1 - lambda I2, with the closed-form hint when a split exists.
manifold::VariationalProblem fixed_lambda_problem(const PrescribedProblem& prob, double lambda);

struct HGround {
  double h0 = 0.0;
  /// True when H vanishes on the probe ray (I1 alpha-homogeneous).
  bool identically_zero = false;
  std::optional<manifold::BranchLevel> level;
  DiscreteField direction{fields::GridDomain{}};
  double s = 0.0;
};

HGround h_ground_level(const PrescribedProblem& prob, const manifold::MinimizeOptions& opts = {});

struct EnergySolution {
  double lambda_star = 0.0;
  DiscreteField u_star{fields::GridDomain{}};
  Branch branch = Branch::Plus;
  double phi_residual = 0.0;
  double energy_error = 0.0;
  bool certified = false;
};

struct PrescribedOptions {
  manifold::MinimizeOptions minimize{};
  double certify_tol = 1e-6;
  /// Reuse a known ground level instead of recomputing it.
  std::optional<double> h0;
  /// Residual-driven refinement rounds used when the absolute certificate
  /// is not met at the optimizer's relative tolerance.
  int polish_rounds = 3;
};

struct PrescribedResult {
  double c = 0.0;
  double h0 = 0.0;
  manifold::BranchLevel level;
  EnergySolution solution;
  int polish_iterations = 0;
};

/// Minimizes lambda_c over the branch and certifies Phi'_{lambda*}(u*) = 0,
/// Phi_{lambda*}(u*) = c. Throws OutOfRangeLevel unless 0 < -alpha c < h0.
PrescribedResult solve_prescribed(const PrescribedProblem& prob, double c, Branch branch,
                                  const PrescribedOptions& opts = {});

struct GapRecord {
  double c = 0.0;
  int samples = 0;
  int rootless = 0;
  double min_s_gap = 0.0;
  double min_lambda_gap = 0.0;
  double epsilon = 0.0;
  double derivative_floor = 0.0;
  double sup_nplus_norm = 0.0;
  /// min over sampled N- points of alpha * I2(t_c^- v).
  double nminus_mass_min = 0.0;
};

GapRecord gap_diagnostics(const PrescribedProblem& prob, double c, int samples,
                          std::uint64_t seed = 0, unsigned threads = 1);

/// -Laplace u = lambda |u|^(q-2) u + f(u), 1 < q < 2.
PrescribedProblem build_semilinear_cc(const fields::GridDomain& grid, double q,
                                      fields::Nonlinearity f);

/// -Laplace_p u - Laplace_q u = lambda |u|^(r1-2) u + |u|^(r2-2) u,
/// 1 < r1 < q < p < r2 < p*.
PrescribedProblem build_pq_laplacian(const fields::GridDomain& grid, double p, double q, double r1,
                                     double r2);

/// Spot check of s -> (q-1) f(s)/s - f'(s): decreasing for s > 0, increasing
/// for s < 0, on a grid up to |s| = 1e3. Returns warning messages.
std::vector<std::string> check_f2(const fields::Nonlinearity& f, double q);

}  // namespace nehari::prescribed
