#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nehari/manifold.hpp"

namespace nehari::affine {

using fields::DiscreteField;
using fields::GridDomain;
using manifold::Branch;

/// Angular quadrature data for the planar affine p-energy.
struct AffineEnergyConfig {
  double p = 2.0;
  int angular_nodes = 64;
  double gamma = 0.0;

  /// Validated config with gamma computed from the unit-ball volumes.
  static AffineEnergyConfig make(double p, int angular_nodes = 64);
  void validate() const;
};

/// omega_s = pi^(s/2) / Gamma(s/2 + 1), for real s >= 0.
double unit_ball_volume(double s);

/// gamma_{2,p} = (2 omega_p)^-1 (2 omega_2 omega_{p-1}) (2 omega_2)^(p/2).
double gamma_constant(double p);

/// Directional norms ||grad_xi u||_p on the first half of the M nodes
/// xi_m = (cos 2 pi m / M, sin 2 pi m / M); the other half repeats them.
std::vector<double> directional_norms(const AffineEnergyConfig& cfg, const DiscreteField& u);

/// E(u) = gamma^(1/p) (sum_m w_m ||grad_xi_m u||_p^-2)^(-1/2), w_m = 2 pi / M.
/// The 1/p power normalizes E to ||grad u||_p on radial fields. Throws
/// DomainError for u = 0 and DegenerateDirection for a vanishing
/// directional norm.
double affine_energy(const AffineEnergyConfig& cfg, const DiscreteField& u);

/// Gradient of (1/p) E^p.
DiscreteField affine_energy_gradient(const AffineEnergyConfig& cfg, const DiscreteField& u);

/// E^p as a p-homogeneous term.
class AffineTerm final : public fields::Term {
 public:
  explicit AffineTerm(AffineEnergyConfig cfg) : cfg_(cfg) { cfg_.validate(); }
  double value(const DiscreteField& u) const override;
  Eigen::VectorXd gradient(const DiscreteField& u) const override;
  std::optional<double> degree() const override { return cfg_.p; }
  std::string describe() const override;

 private:
  AffineEnergyConfig cfg_;
};

/// Phi(u) = (1/p) E^p(u) - (lambda/q) ||u||_q^q - (1/r) ||u||_r^r on a
/// rectangle, 1 < q < p < r < p*.
struct AffineProblem {
  AffineEnergyConfig config = AffineEnergyConfig::make(2.0, 64);
  double q = 1.6;
  double r = 4.0;
  double lambda = 0.1;
  GridDomain grid = GridDomain::rectangle(15, 15);

  void validate() const;
  AffineProblem with_lambda(double l) const;
};

manifold::VariationalProblem make_affine_problem(const AffineProblem& prob);

/// Min over sampled unit-sphere fields of the closed-form threshold on the
/// affine coefficient triple (E^p, ||u||_q^q, ||u||_r^r): an upper estimate.
double lambda_A_estimate(const AffineProblem& prob, int samples, std::uint64_t seed = 0,
                         unsigned threads = 1);

manifold::BranchLevel solve_affine(const AffineProblem& prob, Branch branch,
                                   const manifold::MinimizeOptions& opts = {});

struct SweepOptions {
  int estimate_samples = 100;
  /// Sweep lambda = frac * estimate, geometric between the two fractions.
  double lambda_min_frac = 0.01;
  double lambda_max_frac = 0.99;
  int points = 11;
  double bisection_tol = 1e-3;
  manifold::MinimizeOptions minimize{};
};

struct SweepRow {
  double lambda = 0.0;
  bool feasible = false;
  std::string note;
  double phi_u = 0.0;
  double phi_v = 0.0;
  double norm_u = 0.0;
  double norm_v = 0.0;
  double residual_u = 0.0;
  double residual_v = 0.0;
  bool converged_u = false;
  bool converged_v = false;
  bool u_sign_definite = false;
};

struct SweepReport {
  double lambda_estimate = 0.0;
  std::vector<SweepRow> rows;
  bool sign_pattern = false;       ///< Phi(u) < 0 < Phi(v) at the smallest lambda
  bool ordering = false;           ///< Phi(u) < Phi(v) at every feasible lambda
  bool bracketed = false;          ///< Phi(v) changes sign across the sweep
  double bar_lo = 0.0;
  double bar_hi = 0.0;
  double lambda_bar = 0.0;
  int bisection_steps = 0;
  /// Some bisection midpoint had a positive level from a non-converged run.
  bool bisection_uncertain = false;
  bool slope_applicable = false;   ///< q > p (1 - 1/N)
  double slope = 0.0;
  double slope_target = 0.0;       ///< p / (p - q)
  double slope_lo = 0.0;
  double slope_hi = 0.0;
  int slope_points = 0;
  bool slope_ok = false;
};

SweepReport sweep_checks(const AffineProblem& prob, const SweepOptions& opts = {});

}  // namespace nehari::affine
