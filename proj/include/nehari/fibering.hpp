#pragma once

#include <string_view>

namespace nehari::fibering {

/// Homogeneity degrees of the three terms of
///   Phi_lambda(u) = (1/eta) E(u) - (lambda/alpha) A(u) - (1/beta) B(u).
/// Requires alpha < eta < beta, all nonzero; any of them may be negative.
struct HomogeneityDegrees {
  double alpha;
  double eta;
  double beta;

  /// Throws DomainError when the ordering or nonvanishing invariant fails.
  void validate() const;
};

/// Values E(u), A(u), B(u) of the three positive terms on a fixed direction.
struct FiberingCoefficients {
  double e;
  double a;
  double b;

  void validate() const;

  /// Coefficients of the scaled direction s*u, by homogeneity.
  FiberingCoefficients scaled(const HomogeneityDegrees& deg, double s) const;
};

struct CriticalThreshold {
  double lambda_u;  ///< the unique lambda for which max_t phi' = 0
  double t0;        ///< the degenerate critical parameter
  double c_const;   ///< C(alpha, eta, beta), depends on the degrees only
};

enum class RootKind { TwoRoots, Degenerate, NoRoots };
enum class Stationarity { LocalMin, LocalMax, Degenerate };

std::string_view to_string(RootKind kind);
std::string_view to_string(Stationarity kind);

struct FiberingRoots {
  double t_plus = 0.0;
  double t_minus = 0.0;
  RootKind kind = RootKind::NoRoots;
  CriticalThreshold threshold{};
};

struct RootSolverOptions {
  /// Relative width of the degeneracy band around lambda(u) and the
  /// residual tolerance |phi'(t)| <= tol * scale.
  double tol = 1e-9;
  int max_bisections = 200;
  int max_doublings = 128;
  bool newton_polish = true;
};

/// phi(t) = (1/eta) e t^eta - (lambda/alpha) a t^alpha - (1/beta) b t^beta.
double phi_value(const FiberingCoefficients& c, const HomogeneityDegrees& deg, double lambda,
                 double t);

/// phi'(t) = e t^(eta-1) - lambda a t^(alpha-1) - b t^(beta-1).
double phi_prime(const FiberingCoefficients& c, const HomogeneityDegrees& deg, double lambda,
                 double t);

/// Largest magnitude among the three terms of phi'(t); residuals are measured
/// against it.
double phi_prime_scale(const FiberingCoefficients& c, const HomogeneityDegrees& deg,
                       double lambda, double t);

CriticalThreshold lambda_threshold(const FiberingCoefficients& c, const HomogeneityDegrees& deg);

/// Constant C(alpha, eta, beta) of the closed-form threshold.
double threshold_constant(const HomogeneityDegrees& deg);

FiberingRoots fibering_roots(const FiberingCoefficients& c, const HomogeneityDegrees& deg,
                             double lambda, const RootSolverOptions& opts = {});

/// Classifies a stationary point t of phi through the sign of t^2 phi''(t) in
/// the reduced form (eta-alpha) e t^eta - (beta-alpha) b t^beta. Throws
/// ContractViolation when |phi'(t)| > tol * scale.
Stationarity classify_stationary(const FiberingCoefficients& c, const HomogeneityDegrees& deg,
                                 double lambda, double t, double tol = 1e-9);

/// The reduced second-order form itself, t^2 phi''(t) at a stationary point.
double reduced_second_order(const FiberingCoefficients& c, const HomogeneityDegrees& deg,
                            double t);

struct RootBounds {
  /// Upper bound on t+ implied by the second-order sign at a local minimum.
  double t_plus_upper;
  /// Lower bound on t- implied by the second-order sign at a local maximum.
  double t_minus_lower;
  /// The alternative constants with |eta - beta| in place of (eta - beta);
  /// reported for comparison only.
  double literal_t_plus_upper;
  double literal_t_minus_lower;
  /// E(t- u) / B(t- u), compared against (beta - eta)/(eta - alpha).
  double minus_energy_ratio;
};

/// Throws ContractViolation unless lambda < lambda(u) with two simple roots.
RootBounds root_bounds(const FiberingCoefficients& c, const HomogeneityDegrees& deg,
                       double lambda, const RootSolverOptions& opts = {});

}  // namespace nehari::fibering
