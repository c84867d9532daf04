#include "nehari/fibering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "nehari/error.hpp"

namespace nehari::fibering {

namespace {

// t^k for t > 0 and any real k, including negative and fractional k.
double pw(double t, double k) { return std::exp(k * std::log(t)); }

void require_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    std::ostringstream os;
    os << name << " must be positive and finite, got " << value;
    throw DomainError(os.str());
  }
}

double phi_second(const FiberingCoefficients& c, const HomogeneityDegrees& d, double lambda,
                  double t) {
  return (d.eta - 1.0) * c.e * pw(t, d.eta - 2.0) -
         lambda * (d.alpha - 1.0) * c.a * pw(t, d.alpha - 2.0) -
         (d.beta - 1.0) * c.b * pw(t, d.beta - 2.0);
}

// Bisection in log space on the sign of phi'. `lo` and `hi` bracket a sign
// change; `rising` tells whether phi' goes from negative to positive.
double bisect_root(const FiberingCoefficients& c, const HomogeneityDegrees& d, double lambda,
                   double lo, double hi, bool rising, const RootSolverOptions& opts) {
  for (int it = 0; it < opts.max_bisections; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (!(mid > lo && mid < hi)) break;
    const double f = phi_prime(c, d, lambda, mid);
    if ((f < 0.0) == rising) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi / lo - 1.0 < 4.0 * std::numeric_limits<double>::epsilon()) break;
  }
  double t = std::sqrt(lo * hi);
  if (opts.newton_polish) {
    for (int k = 0; k < 3; ++k) {
      const double f = phi_prime(c, d, lambda, t);
      const double fp = phi_second(c, d, lambda, t);
      if (fp == 0.0) break;
      const double next = t - f / fp;
      if (!(next >= lo && next <= hi)) break;
      if (std::abs(phi_prime(c, d, lambda, next)) >= std::abs(f)) break;
      t = next;
    }
  }
  return t;
}

}  // namespace

void HomogeneityDegrees::validate() const {
  if (!std::isfinite(alpha) || !std::isfinite(eta) || !std::isfinite(beta)) {
    throw DomainError("homogeneity degrees must be finite");
  }
  if (alpha == 0.0 || eta == 0.0 || beta == 0.0) {
    throw DomainError("homogeneity degrees must be nonzero");
  }
  if (!(alpha < eta && eta < beta)) {
    std::ostringstream os;
    os << "homogeneity degrees must satisfy alpha < eta < beta, got (" << alpha << ", " << eta
       << ", " << beta << ")";
    throw DomainError(os.str());
  }
}

void FiberingCoefficients::validate() const {
  require_positive(e, "E(u)");
  require_positive(a, "A(u)");
  require_positive(b, "B(u)");
}

FiberingCoefficients FiberingCoefficients::scaled(const HomogeneityDegrees& deg, double s) const {
  require_positive(s, "scale factor");
  return {pw(s, deg.eta) * e, pw(s, deg.alpha) * a, pw(s, deg.beta) * b};
}

std::string_view to_string(RootKind kind) {
  switch (kind) {
    case RootKind::TwoRoots:
      return "two_roots";
    case RootKind::Degenerate:
      return "degenerate";
    case RootKind::NoRoots:
      return "no_roots";
  }
  return "unknown";
}

std::string_view to_string(Stationarity kind) {
  switch (kind) {
    case Stationarity::LocalMin:
      return "local_min";
    case Stationarity::LocalMax:
      return "local_max";
    case Stationarity::Degenerate:
      return "degenerate";
  }
  return "unknown";
}

double phi_value(const FiberingCoefficients& c, const HomogeneityDegrees& d, double lambda,
                 double t) {
  require_positive(t, "t");
  require_positive(lambda, "lambda");
  return c.e * pw(t, d.eta) / d.eta - lambda * c.a * pw(t, d.alpha) / d.alpha -
         c.b * pw(t, d.beta) / d.beta;
}

double phi_prime(const FiberingCoefficients& c, const HomogeneityDegrees& d, double lambda,
                 double t) {
  require_positive(t, "t");
  require_positive(lambda, "lambda");
  return c.e * pw(t, d.eta - 1.0) - lambda * c.a * pw(t, d.alpha - 1.0) -
         c.b * pw(t, d.beta - 1.0);
}

double phi_prime_scale(const FiberingCoefficients& c, const HomogeneityDegrees& d,
                       double lambda, double t) {
  return std::max({c.e * pw(t, d.eta - 1.0), lambda * c.a * pw(t, d.alpha - 1.0),
                   c.b * pw(t, d.beta - 1.0)});
}

double threshold_constant(const HomogeneityDegrees& d) {
  const double r = (d.eta - d.alpha) / (d.beta - d.alpha);
  return (d.beta - d.eta) / (d.beta - d.alpha) * std::pow(r, (d.eta - d.alpha) / (d.beta - d.eta));
}

CriticalThreshold lambda_threshold(const FiberingCoefficients& c, const HomogeneityDegrees& d) {
  d.validate();
  c.validate();
  const double cc = threshold_constant(d);
  const double t0 =
      std::pow((d.eta - d.alpha) / (d.beta - d.alpha) * c.e / c.b, 1.0 / (d.beta - d.eta));
  // Evaluated in log form: the raw powers of E and B overflow easily.
  const double log_lambda = std::log(cc) + (d.beta - d.alpha) / (d.beta - d.eta) * std::log(c.e) -
                            std::log(c.a) -
                            (d.eta - d.alpha) / (d.beta - d.eta) * std::log(c.b);
  return {std::exp(log_lambda), t0, cc};
}

FiberingRoots fibering_roots(const FiberingCoefficients& c, const HomogeneityDegrees& d,
                             double lambda, const RootSolverOptions& opts) {
  require_positive(lambda, "lambda");
  require_positive(opts.tol, "tol");
  FiberingRoots out;
  out.threshold = lambda_threshold(c, d);
  const double lu = out.threshold.lambda_u;
  const double t0 = out.threshold.t0;

  if (std::abs(lambda - lu) <= opts.tol * lu) {
    out.kind = RootKind::Degenerate;
    out.t_plus = out.t_minus = t0;
    return out;
  }
  if (lambda > lu) {
    out.kind = RootKind::NoRoots;
    return out;
  }

  // phi' < 0 near 0 and near infinity, phi'(t0) > 0.
  double lo = t0;
  int k = 0;
  while (phi_prime(c, d, lambda, lo) >= 0.0) {
    if (++k > opts.max_doublings) {
      std::ostringstream os;
      os << "left bracket expansion failed: t0=" << t0 << " lambda=" << lambda
         << " lambda(u)=" << lu;
      throw NumericalError(os.str());
    }
    lo *= 0.5;
  }
  double hi = t0;
  k = 0;
  while (phi_prime(c, d, lambda, hi) >= 0.0) {
    if (++k > opts.max_doublings) {
      std::ostringstream os;
      os << "right bracket expansion failed: t0=" << t0 << " lambda=" << lambda
         << " lambda(u)=" << lu;
      throw NumericalError(os.str());
    }
    hi *= 2.0;
  }
  // phi'(t0) may round to a nonpositive value just outside the band; then
  // the roots straddle t0 within a few ulps.
  out.t_plus = lo == t0 ? t0 : bisect_root(c, d, lambda, lo, t0, true, opts);
  out.t_minus = hi == t0 ? t0 : bisect_root(c, d, lambda, t0, hi, false, opts);
  out.kind = RootKind::TwoRoots;

  for (double t : {out.t_plus, out.t_minus}) {
    const double res = std::abs(phi_prime(c, d, lambda, t));
    const double scale = phi_prime_scale(c, d, lambda, t);
    if (res > opts.tol * scale) {
      std::ostringstream os;
      os << "root residual " << res << " exceeds " << opts.tol << " * scale " << scale
         << " at t=" << t;
      throw NumericalError(os.str());
    }
  }
  return out;
}

double reduced_second_order(const FiberingCoefficients& c, const HomogeneityDegrees& d,
                            double t) {
  require_positive(t, "t");
  return (d.eta - d.alpha) * c.e * pw(t, d.eta) - (d.beta - d.alpha) * c.b * pw(t, d.beta);
}

Stationarity classify_stationary(const FiberingCoefficients& c, const HomogeneityDegrees& d,
                                 double lambda, double t, double tol) {
  const double res = std::abs(phi_prime(c, d, lambda, t));
  const double scale = phi_prime_scale(c, d, lambda, t);
  if (res > tol * scale) {
    std::ostringstream os;
    os << "classify_stationary called at non-stationary t=" << t << " (|phi'|=" << res
       << ", scale=" << scale << ")";
    throw ContractViolation(os.str());
  }
  const double form = reduced_second_order(c, d, t);
  const double form_scale =
      std::max((d.eta - d.alpha) * c.e * pw(t, d.eta), (d.beta - d.alpha) * c.b * pw(t, d.beta));
  if (std::abs(form) <= tol * form_scale) return Stationarity::Degenerate;
  return form > 0.0 ? Stationarity::LocalMin : Stationarity::LocalMax;
}

RootBounds root_bounds(const FiberingCoefficients& c, const HomogeneityDegrees& d,
                       double lambda, const RootSolverOptions& opts) {
  const FiberingRoots roots = fibering_roots(c, d, lambda, opts);
  if (roots.kind != RootKind::TwoRoots) {
    throw ContractViolation("root_bounds requires lambda < lambda(u) (two simple roots)");
  }
  RootBounds rb{};
  rb.t_plus_upper = std::pow(lambda * (d.beta - d.alpha) / (d.beta - d.eta) * c.a / c.e,
                             1.0 / (d.eta - d.alpha));
  rb.t_minus_lower =
      std::pow((d.eta - d.alpha) / (d.beta - d.alpha) * c.e / c.b, 1.0 / (d.beta - d.eta));
  rb.literal_t_plus_upper =
      std::pow(lambda * (d.eta - d.alpha) / std::abs(d.eta - d.beta) * c.a / c.e,
               1.0 / (d.eta - d.alpha));
  rb.literal_t_minus_lower =
      std::pow((d.beta - d.alpha) / (d.eta - d.alpha) * c.e / c.b, 1.0 / (d.beta - d.eta));
  rb.minus_energy_ratio = c.e / c.b * pw(roots.t_minus, d.eta - d.beta);
  return rb;
}

}  // namespace nehari::fibering
