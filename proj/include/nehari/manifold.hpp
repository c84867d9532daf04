#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nehari/fibering.hpp"
#include "nehari/functional.hpp"
#include "nehari/sphere.hpp"

namespace nehari::manifold {

using fields::RayFunction;
using fields::RayJet;

enum class Branch { Plus, Minus };
std::string_view to_string(Branch b);

/// Closed-form fibering data: Phi(tv) = phi(t) with coefficients (E, A, B)(v).
struct HomogeneousHint {
  fibering::HomogeneityDegrees degrees;
  double lambda;
  std::function<fibering::FiberingCoefficients(const DiscreteField&)> coefficients;
};

/// Custom root locator (v, branch) -> t. Must throw BranchUnavailable or
/// DegenerateRay itself when the root does not exist.
using RayLocator = std::function<double(const DiscreteField&, Branch)>;

struct RayScanOptions {
  double t_min = 1e-8;
  double t_max = 1e8;
  int points_per_decade = 24;
  /// |d/dt Phi(tv)| <= root_tol * scale at an accepted root.
  double root_tol = 1e-9;
  /// Rays with (t- - t+)/t+ below this are treated as degenerate.
  double degeneracy = 1e-6;
  int max_bisections = 200;
};

/// A C^1 functional with the two-critical-point ray structure. Every
/// evaluator must be safe for concurrent invocation.
struct VariationalProblem {
  std::string name;
  SphereGeometry sphere;
  std::function<double(const DiscreteField&)> value;
  std::function<Eigen::VectorXd(const DiscreteField&)> gradient;
  /// v -> (t -> jet of Phi(tv)).
  std::function<RayFunction(const DiscreteField&)> ray;
  std::optional<HomogeneousHint> hint;
  RayLocator locator;
  bool even = true;
  RayScanOptions scan{};

  /// (Phi(tv), d/dt Phi(tv)) and its second derivative.
  RayJet ray_profile(const DiscreteField& v, double t) const { return ray(v)(t); }
};

/// Phi = (1/eta) E - (lambda/alpha) A - (1/beta) B with a closed-form hint.
VariationalProblem make_homogeneous_problem(std::string name, SphereGeometry sphere,
                                            fibering::HomogeneityDegrees degrees, double lambda,
                                            fields::TermPtr e, fields::TermPtr a,
                                            fields::TermPtr b);

/// Wraps a Functional, using its ray evaluator and no hint.
VariationalProblem make_problem(std::string name, SphereGeometry sphere, fields::Functional phi);

struct NehariPoint {
  DiscreteField direction{GridDomain{}};
  Branch branch = Branch::Plus;
  double t = 0.0;
  double value = 0.0;
  /// Dual norm of the full gradient Phi'(t v).
  double residual = 0.0;
  /// |Phi'(tv) tv| relative to the value scale of the ray.
  double radial = 0.0;
  /// d^2/dt^2 Phi(tv) at the root.
  double curvature = 0.0;

  DiscreteField point() const { return direction.scaled(t); }
};

struct RayRoots {
  std::optional<double> t_plus;
  std::optional<double> t_minus;
};

/// Both roots of the ray through v; missing branches are left empty.
/// Throws DegenerateRay inside the degeneracy band and ContractViolation
/// when the ray has more than two critical points.
RayRoots ray_roots(const VariationalProblem& prob, const DiscreteField& v);

/// t^{+-}(v). Throws BranchUnavailable / DegenerateRay.
double locate(const VariationalProblem& prob, const DiscreteField& v, Branch branch);

NehariPoint project_to_branch(const VariationalProblem& prob, const DiscreteField& v,
                              Branch branch);

double reduced_value(const VariationalProblem& prob, const DiscreteField& v, Branch branch);

/// Riesz representative (sphere metric) of the tangential part of
/// ||m(v)|| Phi'(m(v)), m(v) = t(v) v.
Eigen::VectorXd reduced_gradient(const VariationalProblem& prob, const DiscreteField& v,
                                 Branch branch);

struct MinimizeOptions {
  int starts = 8;
  int max_iter = 500;
  double tol = 1e-6;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  /// Smoothing sweeps for random starts; negative selects the grid default.
  int smoothing = -1;
  /// Failed start samples tolerated per start before giving up on it.
  int max_resamples = 50;
  double armijo = 1e-4;
  double shrink = 0.5;
  double initial_step = 1.0;
  int max_backtracks = 60;
  /// Optional deterministic first start (replaces the random sample of start 0).
  std::optional<DiscreteField> warm_start;
};

struct StartRecord {
  int index = 0;
  bool feasible = false;
  double level = 0.0;
  double tangent_residual = 0.0;
  int iterations = 0;
  int failed_samples = 0;
  bool converged = false;
};

struct BranchLevel {
  Branch branch = Branch::Plus;
  double level = 0.0;
  NehariPoint minimizer;
  int iterations = 0;
  /// ||tangent reduced gradient|| / (sum of term magnitudes) at the minimizer.
  double tangent_residual = 0.0;
  bool converged = false;
  int failed_samples = 0;
  std::vector<StartRecord> starts;
  /// Accepted Psi values of the winning start, in order.
  std::vector<double> history;
};

/// Projected-gradient descent of Psi on the sphere from multiple starts.
/// Throws InfeasibleBranch if no start admits the branch.
BranchLevel minimize_branch(const VariationalProblem& prob, Branch branch,
                            const MinimizeOptions& opts = {});

struct PolishOptions {
  /// Target relative tangent residual.
  double tol = 1e-10;
  int max_iter = 200;
  int max_backtracks = 30;
};

struct PolishResult {
  NehariPoint point;
  double tangent_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Drives the tangent residual of Psi below opts.tol from a converged
/// minimizer. Steps are accepted when the residual decreases, so this works
/// below the resolution of Psi values where an Armijo test on Psi stalls.
PolishResult polish_branch(const VariationalProblem& prob, const DiscreteField& v, Branch branch,
                           const PolishOptions& opts = {});

/// Relative tangent residual of Psi at v.
double tangent_residual(const VariationalProblem& prob, const DiscreteField& v, Branch branch);

struct ContinuityRecord {
  double radius = 0.0;
  int samples = 0;
  double t_base = 0.0;
  double modulus = 0.0;
};

ContinuityRecord continuity_probe(const VariationalProblem& prob, const DiscreteField& v,
                                  Branch branch, double radius, int samples,
                                  std::uint64_t seed = 0);

struct ConditionRatios {
  int samples = 0;
  /// Minima over samples of E^(beta/eta)/B, ||u||^eta/E, E^(alpha/eta)/A,
  /// B^(alpha/beta)/A.
  double e_over_b = 0.0;
  double norm_over_e = 0.0;
  double e_over_a = 0.0;
  double b_over_a = 0.0;

  /// Empirical constants: reciprocals of the minima.
  double c_b_by_e() const { return 1.0 / e_over_b; }
  double c_e_by_norm() const { return 1.0 / norm_over_e; }
  double c_a_by_e() const { return 1.0 / e_over_a; }
  double c_a_by_b() const { return 1.0 / b_over_a; }
};

ConditionRatios condition_ratios(const VariationalProblem& prob, int samples,
                                 std::uint64_t seed = 0);

}  // namespace nehari::manifold
