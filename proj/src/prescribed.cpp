#include "nehari/prescribed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include "nehari/error.hpp"
#include "nehari/parallel.hpp"

namespace nehari::prescribed {

namespace {

constexpr double kTiny = std::numeric_limits<double>::min();
constexpr double kEps = std::numeric_limits<double>::epsilon();

// H jet from an I1 jet; the second derivative is left at zero.
RayJet h_from_i1(const RayJet& i1, double alpha, double t) {
  RayJet h;
  h.value = t * i1.d1 - alpha * i1.value;
  h.d1 = t * i1.d2 + (1.0 - alpha) * i1.d1;
  h.value_scale = t * i1.d1_scale + std::abs(alpha) * i1.value_scale;
  h.d1_scale = t * std::abs(i1.d2) + std::abs(1.0 - alpha) * i1.d1_scale;
  return h;
}

RayFunction fast_h_ray(const PrescribedProblem& prob, const DiscreteField& v) {
  RayFunction i1 = prob.i1().ray(v);
  return [i1 = std::move(i1), alpha = prob.alpha](double t) { return h_from_i1(i1(t), alpha, t); };
}

constexpr double kScanCeiling = 1e100;

std::vector<double> scan_grid(const HScanOptions& opts) {
  const double decades = std::log10(opts.t_max / opts.t_min);
  const int count = std::max(2, static_cast<int>(std::ceil(decades * opts.points_per_decade)) + 1);
  std::vector<double> ts(static_cast<std::size_t>(count));
  const double ratio = std::pow(opts.t_max / opts.t_min, 1.0 / (count - 1));
  for (int i = 0; i < count; ++i) ts[static_cast<std::size_t>(i)] = opts.t_min * std::pow(ratio, i);
  return ts;
}

// Log-space bisection for g(t) = 0 with g(lo) and g(hi) of opposite signs;
// `eval` returns (g, scale).
template <class Eval>
double log_bisect(Eval&& eval, double lo, double hi, double tol, int max_iter) {
  const bool lo_positive = eval(lo).first > 0;
  double mid = std::sqrt(lo * hi);
  for (int k = 0; k < max_iter; ++k) {
    mid = std::sqrt(lo * hi);
    const auto [g, scale] = eval(mid);
    if (!std::isfinite(g)) throw NumericalError("non-finite value during bisection");
    if (std::abs(g) <= tol * scale) return mid;
    if ((g > 0) == lo_positive) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi / lo - 1.0 <= 4 * kEps) break;
  }
  return mid;
}

std::string describe_ray(const std::vector<double>& ts, const std::vector<double>& slopes) {
  std::ostringstream os;
  os << "slope sign changes at t =";
  for (std::size_t i = 1; i < ts.size(); ++i) {
    if ((slopes[i] > 0) != (slopes[i - 1] > 0)) os << ' ' << ts[i - 1] << ".." << ts[i];
  }
  os << "; slope(t_min) = " << slopes.front() << ", slope(t_max) = " << slopes.back();
  return os.str();
}

}  // namespace

Functional PrescribedProblem::i1() const {
  Functional f = j;
  for (const auto& e : k.entries()) f.add(-e.coeff, e.term);
  return f;
}

double i1_value(const PrescribedProblem& prob, const DiscreteField& u) {
  return prob.j.value(u) - prob.k.value(u);
}

double i2_value(const PrescribedProblem& prob, const DiscreteField& u) { return prob.i2.value(u); }

double h_value(const PrescribedProblem& prob, const DiscreteField& u) {
  const Functional i1 = prob.i1();
  return i1.gradient(u).dot(u.values()) - prob.alpha * i1.value(u);
}

Eigen::VectorXd h_gradient(const PrescribedProblem& prob, const DiscreteField& u) {
  const Functional i1 = prob.i1();
  return i1.radial_hessian(u) + (1.0 - prob.alpha) * i1.gradient(u);
}

RayFunction h_ray(const PrescribedProblem& prob, const DiscreteField& v) {
  RayFunction fast = fast_h_ray(prob, v);
  return [fast = std::move(fast)](double t) {
    RayJet h = fast(t);
    const double d = 1e-4;
    h.d2 = (fast(t * (1 + d)).d1 - fast(t * (1 - d)).d1) / (2 * d * t);
    return h;
  };
}

RayJet h_ray(const PrescribedProblem& prob, const DiscreteField& v, double t) {
  return h_ray(prob, v)(t);
}

double h_ray_maximizer(const RayFunction& h, const HScanOptions& opts) {
  auto ts = scan_grid(opts);
  std::vector<double> slopes(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    slopes[i] = h(ts[i]).d1;
    if (!std::isfinite(slopes[i])) throw NumericalError("non-finite H slope during scan");
  }
  // Slowly saturating nonlinearities turn over late; keep walking out.
  const double step = std::pow(10.0, 1.0 / opts.points_per_decade);
  while (slopes.back() > 0 && ts.back() < kScanCeiling) {
    ts.push_back(ts.back() * step);
    slopes.push_back(h(ts.back()).d1);
    if (!std::isfinite(slopes.back())) break;
  }
  std::optional<std::size_t> change;
  bool shape_ok = slopes.front() > 0;
  for (std::size_t i = 1; i < ts.size(); ++i) {
    if ((slopes[i] > 0) == (slopes[i - 1] > 0)) continue;
    if (change || slopes[i] > 0) shape_ok = false;
    change = i;
  }
  if (!shape_ok || !change) {
    throw UnimodalityViolation("H ray is not increasing-then-decreasing: " +
                               describe_ray(ts, slopes));
  }
  return log_bisect(
      [&](double t) {
        const RayJet j = h(t);
        return std::pair{j.d1, j.d1_scale};
      },
      ts[*change - 1], ts[*change], opts.root_tol, opts.max_bisections);
}

ScalarHProfile h_profile_roots(const RayFunction& h, double target, const HScanOptions& opts) {
  if (!(target > 0.0)) throw ContractViolation("H root target -alpha c must be positive");
  ScalarHProfile out;
  out.s = h_ray_maximizer(h, opts);
  out.h_max = h(out.s).value;
  if (std::abs(target - out.h_max) <= opts.degeneracy * std::abs(out.h_max)) {
    std::ostringstream os;
    os << "degenerate H ray: -alpha c = " << target << " equals max H = " << out.h_max;
    throw DegenerateRay(os.str());
  }
  if (target > out.h_max) return out;

  auto g = [&](double t) {
    const RayJet j = h(t);
    return std::pair{j.value - target, j.value_scale + target};
  };
  double lo = opts.t_min;
  if (!(g(lo).first < 0)) throw NumericalError("H root bracket: H(t_min) >= -alpha c");
  double hi = out.s;
  for (int k = 0; g(hi).first >= 0; ++k) {
    if (k > 200) throw NumericalError("H root bracket: H stays above -alpha c");
    hi *= 2.0;
  }
  out.t_plus = log_bisect(g, lo, out.s, opts.root_tol, opts.max_bisections);
  out.t_minus = log_bisect(g, out.s, hi, opts.root_tol, opts.max_bisections);
  return out;
}

HProfile roots_of_H(const PrescribedProblem& prob, const DiscreteField& v, double c) {
  const RayFunction h = fast_h_ray(prob, v);
  const ScalarHProfile sp = h_profile_roots(h, -prob.alpha * c, prob.scan);
  HProfile out;
  out.direction = v;
  out.s = sp.s;
  out.h_max = sp.h_max;
  out.t_c_plus = sp.t_plus;
  out.t_c_minus = sp.t_minus;
  if (!sp.t_plus) {
    std::ostringstream os;
    os << "no roots: -alpha c = " << -prob.alpha * c << " exceeds max H = " << sp.h_max;
    out.diagnostic = os.str();
  }
  return out;
}

double lambda_c_value(const PrescribedProblem& prob, const DiscreteField& u, double c) {
  const double i2 = prob.i2.value(u);
  if (!(i2 > 0.0)) throw ContractViolation("I2(u) must be positive");
  return (i1_value(prob, u) - c) / i2;
}

Eigen::VectorXd lambda_c_gradient(const PrescribedProblem& prob, const DiscreteField& u,
                                  double c) {
  const double i2 = prob.i2.value(u);
  if (!(i2 > 0.0)) throw ContractViolation("I2(u) must be positive");
  const double lam = (i1_value(prob, u) - c) / i2;
  return (prob.i1().gradient(u) - lam * prob.i2.gradient(u)) / i2;
}

RayFunction lambda_c_ray(const PrescribedProblem& prob, const DiscreteField& v, double c) {
  const double i2v = prob.i2.value(v);
  if (!(i2v > 0.0)) throw ContractViolation("I2(v) must be positive");
  RayFunction i1 = prob.i1().ray(v);
  return [i1 = std::move(i1), alpha = prob.alpha, c, i2v](double t) {
    const RayJet j = i1(t);
    const RayJet h = h_from_i1(j, alpha, t);
    const double ta = std::exp(alpha * std::log(t)) * i2v;
    RayJet out;
    out.value = (j.value - c) / ta;
    out.d1 = (h.value + alpha * c) / (t * ta);
    out.d2 = (h.d1 - (alpha + 1.0) * (h.value + alpha * c) / t) / (t * ta);
    out.value_scale = (j.value_scale + std::abs(c)) / ta;
    out.d1_scale = (h.value_scale + std::abs(alpha * c)) / (t * ta);
    return out;
  };
}

manifold::VariationalProblem lambda_c_problem(const PrescribedProblem& prob, double c) {
  auto p = std::make_shared<const PrescribedProblem>(prob);
  std::ostringstream name;
  name << prob.name << ":lambda_c(c=" << c << ")";
  manifold::VariationalProblem vp{name.str(), prob.sphere, {}, {}, {}, {}, {}, true, {}};
  vp.value = [p, c](const DiscreteField& u) { return lambda_c_value(*p, u, c); };
  vp.gradient = [p, c](const DiscreteField& u) { return lambda_c_gradient(*p, u, c); };
  vp.ray = [p, c](const DiscreteField& v) { return lambda_c_ray(*p, v, c); };
  vp.locator = [p, c](const DiscreteField& v, Branch b) {
    const HProfile prof = roots_of_H(*p, v, c);
    if (!prof.t_c_plus) throw BranchUnavailable(prof.diagnostic);
    return b == Branch::Plus ? *prof.t_c_plus : *prof.t_c_minus;
  };
  return vp;
}

manifold::VariationalProblem h_problem(const PrescribedProblem& prob) {
  auto p = std::make_shared<const PrescribedProblem>(prob);
  manifold::VariationalProblem vp{prob.name + ":H", prob.sphere, {}, {}, {}, {}, {}, true, {}};
  vp.value = [p](const DiscreteField& u) { return h_value(*p, u); };
  vp.gradient = [p](const DiscreteField& u) { return h_gradient(*p, u); };
  vp.ray = [p](const DiscreteField& v) { return h_ray(*p, v); };
  vp.locator = [p](const DiscreteField& v, Branch b) {
    if (b == Branch::Plus) throw BranchUnavailable("H rays carry only a maximum");
    return h_ray_maximizer(fast_h_ray(*p, v), p->scan);
  };
  return vp;
}

manifold::VariationalProblem fixed_lambda_problem(const PrescribedProblem& prob, double lambda) {
  if (!(lambda > 0.0)) throw DomainError("lambda must be positive");
  std::ostringstream name;
  name << prob.name << ":lambda=" << lambda;
  if (prob.split) {
    const auto& s = *prob.split;
    auto vp = manifold::make_homogeneous_problem(name.str(), prob.sphere, s.degrees, lambda, s.e,
                                                 s.a, s.b);
    // Evaluate through the model's own terms; the hint supplies the roots.
    fields::Functional phi = prob.i1();
    for (const auto& e : prob.i2.entries()) phi.add(-lambda * e.coeff, e.term);
    auto f = std::make_shared<const fields::Functional>(std::move(phi));
    vp.value = [f](const DiscreteField& u) { return f->value(u); };
    vp.gradient = [f](const DiscreteField& u) { return f->gradient(u); };
    vp.ray = [f](const DiscreteField& v) { return f->ray(v); };
    return vp;
  }
  fields::Functional phi = prob.i1();
  for (const auto& e : prob.i2.entries()) phi.add(-lambda * e.coeff, e.term);
  return manifold::make_problem(name.str(), prob.sphere, std::move(phi));
}

HGround h_ground_level(const PrescribedProblem& prob, const manifold::MinimizeOptions& opts) {
  HGround out;
  {
    auto rng = manifold::stream_rng(opts.seed, 0x68307072ULL);
    const DiscreteField v = prob.sphere.random_point(rng, opts.smoothing);
    const RayFunction h = fast_h_ray(prob, v);
    bool zero = true;
    for (double t : scan_grid(prob.scan)) {
      const RayJet j = h(t);
      const double scale = prob.i1().ray(v)(t).value_scale;
      if (std::abs(j.value) > 1e-12 * scale) {
        zero = false;
        break;
      }
    }
    if (zero) {
      out.identically_zero = true;
      out.direction = v;
      return out;
    }
  }
  auto level = manifold::minimize_branch(h_problem(prob), Branch::Minus, opts);
  out.h0 = level.level;
  out.direction = level.minimizer.direction;
  out.s = level.minimizer.t;
  out.level = std::move(level);
  return out;
}

PrescribedResult solve_prescribed(const PrescribedProblem& prob, double c, Branch branch,
                                  const PrescribedOptions& opts) {
  const double h0 = opts.h0 ? *opts.h0 : h_ground_level(prob, opts.minimize).h0;
  if (!(c < 0.0) || !(-prob.alpha * c < h0)) {
    std::ostringstream os;
    os << "energy level c = " << c << " outside the admissible window 0 < -alpha c < h0 (-alpha c = "
       << -prob.alpha * c << ", h0 = " << h0 << ")";
    throw OutOfRangeLevel(os.str(), h0);
  }
  PrescribedResult res;
  res.c = c;
  res.h0 = h0;
  res.level = manifold::minimize_branch(lambda_c_problem(prob, c), branch, opts.minimize);

  auto& sol = res.solution;
  sol.branch = branch;
  auto certify = [&](const manifold::NehariPoint& pt) {
    sol.lambda_star = pt.value;
    sol.u_star = pt.point();
    const Eigen::VectorXd g =
        prob.i1().gradient(sol.u_star) - sol.lambda_star * prob.i2.gradient(sol.u_star);
    sol.phi_residual = prob.sphere.dual_norm(g);
    sol.energy_error =
        std::abs(i1_value(prob, sol.u_star) - sol.lambda_star * prob.i2.value(sol.u_star) - c);
    sol.certified = sol.phi_residual <= opts.certify_tol && sol.energy_error <= opts.certify_tol;
  };
  certify(res.level.minimizer);

  // The optimizer stops on a residual relative to the size of the functional;
  // the certificate is absolute, so large-scale models need a tighter finish.
  const auto vp = lambda_c_problem(prob, c);
  double rel = res.level.tangent_residual;
  for (int round = 0; round < opts.polish_rounds && !sol.certified && res.level.converged; ++round) {
    manifold::PolishOptions po;
    po.tol = std::max(1e-15, 0.25 * rel * opts.certify_tol / std::max(sol.phi_residual, 1e-300));
    const auto pol = manifold::polish_branch(vp, res.level.minimizer.direction, branch, po);
    if (!(pol.tangent_residual < rel)) break;
    rel = pol.tangent_residual;
    res.level.minimizer = pol.point;
    res.level.level = pol.point.value;
    res.level.tangent_residual = rel;
    res.polish_iterations += pol.iterations;
    certify(pol.point);
  }
  return res;
}

GapRecord gap_diagnostics(const PrescribedProblem& prob, double c, int samples,
                          std::uint64_t seed, unsigned threads) {
  if (samples < 1) throw ContractViolation("gap diagnostics need at least one sample");
  struct Sample {
    std::optional<HProfile> prof;
    double lambda_gap = 0.0;
    double nminus_mass = 0.0;
  };
  std::vector<Sample> rows(static_cast<std::size_t>(samples));
  parallel_for(rows.size(), threads, [&](std::size_t i) {
    auto rng = manifold::stream_rng(seed, i);
    const DiscreteField v = prob.sphere.random_point(rng);
    HProfile prof = roots_of_H(prob, v, c);
    if (!prof.t_c_plus) return;
    auto& row = rows[i];
    row.lambda_gap =
        lambda_c_value(prob, v.scaled(prof.s), c) - lambda_c_value(prob, v.scaled(*prof.t_c_plus), c);
    row.nminus_mass = prob.alpha * prob.i2.value(v.scaled(*prof.t_c_minus));
    row.prof = std::move(prof);
  });

  GapRecord rec;
  rec.c = c;
  rec.samples = samples;
  const double inf = std::numeric_limits<double>::infinity();
  rec.min_s_gap = rec.min_lambda_gap = rec.nminus_mass_min = rec.derivative_floor = inf;
  for (const auto& row : rows) {
    if (!row.prof) {
      ++rec.rootless;
      continue;
    }
    rec.min_s_gap = std::min(rec.min_s_gap, row.prof->s - *row.prof->t_c_plus);
    rec.min_lambda_gap = std::min(rec.min_lambda_gap, row.lambda_gap);
    rec.sup_nplus_norm = std::max(rec.sup_nplus_norm, *row.prof->t_c_plus);
    rec.nminus_mass_min = std::min(rec.nminus_mass_min, row.nminus_mass);
  }
  if (rec.rootless == samples) return rec;

  rec.epsilon = rec.min_s_gap / 3.0;
  std::vector<double> floors(rows.size(), inf);
  parallel_for(rows.size(), threads, [&](std::size_t i) {
    const auto& prof = rows[i].prof;
    if (!prof) return;
    const RayFunction h = fast_h_ray(prob, prof->direction);
    for (int k = 0; k < 16; ++k) {
      const double t = *prof->t_c_plus + rec.epsilon * k / 15.0;
      floors[i] = std::min(floors[i], h(t).d1);
    }
  });
  for (double f : floors) rec.derivative_floor = std::min(rec.derivative_floor, f);
  return rec;
}

std::vector<std::string> check_f2(const fields::Nonlinearity& f, double q) {
  std::vector<std::string> warnings;
  auto g = [&](double s) { return (q - 1.0) * f.f(s) / s - f.f_prime(s); };
  const int count = 400;
  double prev_pos = g(1e-3);
  double prev_neg = g(-1e-3);
  for (int i = 1; i < count; ++i) {
    const double s = 1e-3 * std::pow(1e6, static_cast<double>(i) / (count - 1));
    const double gp = g(s);
    const double gn = g(-s);
    const double tol = 1e-12 * (std::abs(gp) + std::abs(prev_pos) + std::abs(gn) + std::abs(prev_neg) + 1.0);
    if (gp > prev_pos + tol) {
      std::ostringstream os;
      os << "(q-1)f(s)/s - f'(s) not decreasing near s = " << s << " for " << f.name;
      warnings.push_back(os.str());
      break;
    }
    // Walking left on the negative axis, an increasing map must drop.
    if (gn > prev_neg + tol) {
      std::ostringstream os;
      os << "(q-1)f(s)/s - f'(s) not increasing near s = " << -s << " for " << f.name;
      warnings.push_back(os.str());
      break;
    }
    prev_pos = gp;
    prev_neg = gn;
  }
  return warnings;
}

PrescribedProblem build_semilinear_cc(const fields::GridDomain& grid, double q,
                                      fields::Nonlinearity f) {
  if (!(q > 1.0 && q < 2.0)) {
    std::ostringstream os;
    os << "semilinear_cc requires 1 < q < 2, got q = " << q;
    throw ConfigError(os.str());
  }
  if (f.power && !(*f.power > 2.0)) {
    std::ostringstream os;
    os << "semilinear_cc requires r > 2, got r = " << *f.power;
    throw ConfigError(os.str());
  }
  grid.validate();
  PrescribedProblem prob{"semilinear_cc", SphereGeometry(grid, 2.0), {}, {}, {}, q, 2.0, {}, {},
                         {}, {}};
  auto grad2 = std::make_shared<fields::GradientPowerTerm>(2.0);
  auto lq = std::make_shared<fields::LebesguePowerTerm>(q);
  prob.j.add(0.5, grad2);
  prob.i2.add(1.0 / q, lq);
  prob.warnings = check_f2(f, q);
  if (f.power) {
    const double r = *f.power;
    prob.split = HomogeneousSplit{{q, 2.0, r}, grad2, lq, std::make_shared<fields::LebesguePowerTerm>(r)};
  }
  prob.k.add(1.0, std::make_shared<fields::CompositeTerm>(std::move(f)));
  return prob;
}

PrescribedProblem build_pq_laplacian(const fields::GridDomain& grid, double p, double q, double r1,
                                     double r2) {
  grid.validate();
  const double n = grid.dim;
  const double p_star = p < n ? n * p / (n - p) : std::numeric_limits<double>::infinity();
  if (!(1.0 < r1 && r1 < q && q < p && p < r2 && r2 < p_star)) {
    std::ostringstream os;
    os << "pq_laplacian requires 1 < r1 < q < p < r2 < p*, got r1 = " << r1 << ", q = " << q
       << ", p = " << p << ", r2 = " << r2;
    throw ConfigError(os.str());
  }
  PrescribedProblem prob{"pq_laplacian", SphereGeometry(grid, p), {}, {}, {}, r1, p, {}, {}, {},
                         {}};
  auto gq = std::make_shared<fields::GradientPowerTerm>(q);
  prob.j.add(1.0 / p, std::make_shared<fields::GradientPowerTerm>(p)).add(1.0 / q, gq);
  prob.k.add(1.0 / r2, std::make_shared<fields::LebesguePowerTerm>(r2));
  prob.i2.add(1.0 / r1, std::make_shared<fields::LebesguePowerTerm>(r1));
  Functional a;
  a.add(1.0 / q, gq);
  prob.a_part = std::move(a);
  return prob;
}

}  // namespace nehari::prescribed
