#include "nehari/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include "nehari/error.hpp"
#include "nehari/parallel.hpp"

namespace nehari::manifold {

namespace {

constexpr double kTiny = std::numeric_limits<double>::min();

const char* branch_name(Branch b) { return b == Branch::Plus ? "plus" : "minus"; }

void check_gap(double t_plus, double t_minus, double band) {
  if ((t_minus - t_plus) / t_plus < band) {
    std::ostringstream os;
    os << "degenerate ray: t+ = " << t_plus << ", t- = " << t_minus;
    throw DegenerateRay(os.str());
  }
}

// Log-space bisection on the ray slope inside [lo, hi], where the slope has
// sign `sign_lo` at lo and the opposite sign at hi.
double bisect_slope(const RayFunction& ray, double lo, double hi, double sign_lo,
                    const RayScanOptions& opts) {
  double mid = std::sqrt(lo * hi);
  for (int k = 0; k < opts.max_bisections; ++k) {
    mid = std::sqrt(lo * hi);
    const RayJet jet = ray(mid);
    if (!std::isfinite(jet.d1)) throw NumericalError("non-finite ray slope during bisection");
    if (std::abs(jet.d1) <= opts.root_tol * jet.d1_scale) return mid;
    if ((jet.d1 > 0) == (sign_lo > 0)) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi / lo - 1.0 <= 4 * std::numeric_limits<double>::epsilon()) break;
  }
  const RayJet jet = ray(mid);
  if (std::abs(jet.d1) > 1e3 * opts.root_tol * jet.d1_scale) {
    std::ostringstream os;
    os << "ray root not resolved: |slope| = " << std::abs(jet.d1) << " at t = " << mid;
    throw NumericalError(os.str());
  }
  return mid;
}

RayRoots scan_roots(const VariationalProblem& prob, const DiscreteField& v) {
  const auto& opts = prob.scan;
  const RayFunction ray = prob.ray(v);
  const double decades = std::log10(opts.t_max / opts.t_min);
  const int count = std::max(2, static_cast<int>(std::ceil(decades * opts.points_per_decade)) + 1);
  const double ratio = std::pow(opts.t_max / opts.t_min, 1.0 / (count - 1));

  std::optional<std::pair<double, double>> up;    // slope - -> +: local min
  std::optional<std::pair<double, double>> down;  // slope + -> -: local max
  double t_prev = opts.t_min;
  double s_prev = ray(t_prev).d1;
  int changes = 0;
  for (int i = 1; i < count; ++i) {
    const double t = opts.t_min * std::pow(ratio, i);
    const double s = ray(t).d1;
    if (!std::isfinite(s)) throw NumericalError("non-finite ray slope during scan");
    if ((s > 0) != (s_prev > 0)) {
      ++changes;
      auto& slot = s > 0 ? up : down;
      if (slot || (s > 0 && down)) {
        std::ostringstream os;
        os << "ray has more than two critical points (" << prob.name << ")";
        throw ContractViolation(os.str());
      }
      slot = std::pair{t_prev, t};
    }
    t_prev = t;
    s_prev = s;
  }

  RayRoots roots;
  if (up) roots.t_plus = bisect_slope(ray, up->first, up->second, -1.0, opts);
  if (down) roots.t_minus = bisect_slope(ray, down->first, down->second, 1.0, opts);
  if (roots.t_plus && roots.t_minus) check_gap(*roots.t_plus, *roots.t_minus, opts.degeneracy);
  return roots;
}

RayRoots hinted_roots(const VariationalProblem& prob, const DiscreteField& v) {
  const auto& hint = *prob.hint;
  fibering::RootSolverOptions opts;
  opts.tol = prob.scan.root_tol;
  const auto roots = fibering::fibering_roots(hint.coefficients(v), hint.degrees, hint.lambda, opts);
  RayRoots out;
  switch (roots.kind) {
    case fibering::RootKind::NoRoots:
      return out;
    case fibering::RootKind::Degenerate: {
      std::ostringstream os;
      os << "degenerate ray: lambda = " << hint.lambda << " at threshold "
         << roots.threshold.lambda_u;
      throw DegenerateRay(os.str());
    }
    case fibering::RootKind::TwoRoots:
      check_gap(roots.t_plus, roots.t_minus, prob.scan.degeneracy);
      out.t_plus = roots.t_plus;
      out.t_minus = roots.t_minus;
      return out;
  }
  return out;
}

}  // namespace

std::string_view to_string(Branch b) { return b == Branch::Plus ? "plus" : "minus"; }

VariationalProblem make_problem(std::string name, SphereGeometry sphere, fields::Functional phi) {
  auto f = std::make_shared<const fields::Functional>(std::move(phi));
  VariationalProblem prob{std::move(name), std::move(sphere), {}, {}, {}, {}, {}, true, {}};
  prob.value = [f](const DiscreteField& u) { return f->value(u); };
  prob.gradient = [f](const DiscreteField& u) { return f->gradient(u); };
  prob.ray = [f](const DiscreteField& v) { return f->ray(v); };
  return prob;
}

VariationalProblem make_homogeneous_problem(std::string name, SphereGeometry sphere,
                                            fibering::HomogeneityDegrees degrees, double lambda,
                                            fields::TermPtr e, fields::TermPtr a,
                                            fields::TermPtr b) {
  degrees.validate();
  if (!(lambda > 0.0)) throw DomainError("lambda must be positive");
  fields::Functional phi;
  phi.add(1.0 / degrees.eta, e).add(-lambda / degrees.alpha, a).add(-1.0 / degrees.beta, b);
  VariationalProblem prob = make_problem(std::move(name), std::move(sphere), std::move(phi));
  prob.hint = HomogeneousHint{degrees, lambda, [e, a, b](const DiscreteField& v) {
                                return fibering::FiberingCoefficients{e->value(v), a->value(v),
                                                                      b->value(v)};
                              }};
  return prob;
}

RayRoots ray_roots(const VariationalProblem& prob, const DiscreteField& v) {
  if (prob.locator) {
    RayRoots roots;
    for (Branch b : {Branch::Plus, Branch::Minus}) {
      try {
        (b == Branch::Plus ? roots.t_plus : roots.t_minus) = prob.locator(v, b);
      } catch (const BranchUnavailable&) {
      }
    }
    if (roots.t_plus && roots.t_minus) {
      check_gap(*roots.t_plus, *roots.t_minus, prob.scan.degeneracy);
    }
    return roots;
  }
  if (prob.hint) return hinted_roots(prob, v);
  return scan_roots(prob, v);
}

double locate(const VariationalProblem& prob, const DiscreteField& v, Branch branch) {
  if (prob.locator) return prob.locator(v, branch);
  const RayRoots roots = ray_roots(prob, v);
  const auto& t = branch == Branch::Plus ? roots.t_plus : roots.t_minus;
  if (!t) {
    std::ostringstream os;
    os << "no " << branch_name(branch) << " root on this ray (" << prob.name << "; t+ "
       << (roots.t_plus ? "found" : "absent") << ", t- " << (roots.t_minus ? "found" : "absent")
       << ")";
    throw BranchUnavailable(os.str());
  }
  return *t;
}

NehariPoint project_to_branch(const VariationalProblem& prob, const DiscreteField& v,
                              Branch branch) {
  const double n = prob.sphere.norm(v);
  if (!(std::abs(n - 1.0) <= 1e-10)) {
    std::ostringstream os;
    os << "direction not on the unit sphere: norm = " << n;
    throw ContractViolation(os.str());
  }
  NehariPoint pt;
  pt.direction = v;
  pt.branch = branch;
  pt.t = locate(prob, v, branch);
  const DiscreteField m = v.scaled(pt.t);
  pt.value = prob.value(m);
  const Eigen::VectorXd g = prob.gradient(m);
  pt.residual = prob.sphere.dual_norm(g);
  const RayJet jet = prob.ray(v)(pt.t);
  pt.radial = std::abs(g.dot(m.values())) / std::max(jet.value_scale, kTiny);
  pt.curvature = jet.d2;
  if ((branch == Branch::Plus) != (jet.d2 > 0.0)) {
    std::ostringstream os;
    os << branch_name(branch) << " root with second derivative " << jet.d2 << " at t = " << pt.t;
    throw ContractViolation(os.str());
  }
  return pt;
}

double reduced_value(const VariationalProblem& prob, const DiscreteField& v, Branch branch) {
  return prob.value(v.scaled(locate(prob, v, branch)));
}

Eigen::VectorXd reduced_gradient(const VariationalProblem& prob, const DiscreteField& v,
                                 Branch branch) {
  const double t = locate(prob, v, branch);
  const Eigen::VectorXd g = prob.gradient(v.scaled(t));
  return prob.sphere.tangent_gradient(v, t * g);
}

double tangent_residual(const VariationalProblem& prob, const DiscreteField& v, Branch branch) {
  const double t = locate(prob, v, branch);
  const Eigen::VectorXd g = prob.gradient(v.scaled(t));
  const Eigen::VectorXd d = prob.sphere.tangent_gradient(v, t * g);
  const double scale = prob.ray(v)(t).value_scale;
  return prob.sphere.metric_norm(d) / std::max(scale, kTiny);
}

namespace {

struct Iterate {
  DiscreteField x{GridDomain{}};
  double psi = 0.0;
  Eigen::VectorXd dir;  // tangent Riesz gradient
  double dir_norm2 = 0.0;
  double residual = 0.0;
};

// Psi only; nullopt when the ray does not carry the branch.
std::optional<double> try_psi(const VariationalProblem& prob, const DiscreteField& x,
                              Branch branch) {
  try {
    const double psi = reduced_value(prob, x, branch);
    if (!std::isfinite(psi)) return std::nullopt;
    return psi;
  } catch (const BranchUnavailable&) {
  } catch (const DegenerateRay&) {
  }
  return std::nullopt;
}

Iterate full_eval(const VariationalProblem& prob, const DiscreteField& x, Branch branch) {
  Iterate it;
  it.x = x;
  const double t = locate(prob, x, branch);
  const DiscreteField m = x.scaled(t);
  it.psi = prob.value(m);
  it.dir = prob.sphere.tangent_gradient(x, t * prob.gradient(m));
  it.dir_norm2 = prob.sphere.inner(it.dir, it.dir);
  const double scale = prob.ray(x)(t).value_scale;
  it.residual = std::sqrt(std::max(it.dir_norm2, 0.0)) / std::max(scale, kTiny);
  return it;
}

struct StartOutcome {
  StartRecord record;
  std::optional<Iterate> best;
  std::vector<double> history;
};

StartOutcome run_start(const VariationalProblem& prob, Branch branch, const MinimizeOptions& opts,
                       int index) {
  StartOutcome out;
  out.record.index = index;
  auto rng = stream_rng(opts.seed, static_cast<std::uint64_t>(index));

  std::optional<Iterate> cur;
  for (int attempt = 0; attempt <= opts.max_resamples && !cur; ++attempt) {
    DiscreteField x = (index == 0 && attempt == 0 && opts.warm_start)
                          ? prob.sphere.retract(opts.warm_start->values())
                          : prob.sphere.random_point(rng, opts.smoothing);
    try {
      cur = full_eval(prob, x, branch);
    } catch (const BranchUnavailable&) {
      ++out.record.failed_samples;
    } catch (const DegenerateRay&) {
      ++out.record.failed_samples;
    }
  }
  if (!cur) return out;
  out.record.feasible = true;
  out.history.push_back(cur->psi);

  double step = opts.initial_step;
  int iter = 0;
  for (; iter < opts.max_iter && cur->residual > opts.tol; ++iter) {
    std::optional<Iterate> next;
    double a = step;
    for (int k = 0; k <= opts.max_backtracks; ++k, a *= opts.shrink) {
      const Eigen::VectorXd trial = cur->x.values() - a * cur->dir;
      DiscreteField xt = prob.sphere.retract(trial);
      const auto psi = try_psi(prob, xt, branch);
      if (!psi || *psi > cur->psi - opts.armijo * a * cur->dir_norm2) continue;
      try {
        next = full_eval(prob, xt, branch);
      } catch (const BranchUnavailable&) {
        continue;
      } catch (const DegenerateRay&) {
        continue;
      }
      break;
    }
    if (!next) break;  // line search stalled

    // Barzilai-Borwein step for the next iteration (vectors compared in the
    // ambient space; the retraction keeps them close to the tangent planes).
    const Eigen::VectorXd s = next->x.values() - cur->x.values();
    const Eigen::VectorXd y = next->dir - cur->dir;
    const double sy = prob.sphere.inner(s, y);
    const double ss = prob.sphere.inner(s, s);
    step = sy > 0.0 ? std::clamp(ss / sy, 1e-14, 1e14) : 2.0 * a;

    cur = std::move(next);
    out.history.push_back(cur->psi);
  }
  out.record.iterations = iter;
  out.record.level = cur->psi;
  out.record.tangent_residual = cur->residual;
  out.record.converged = cur->residual <= opts.tol;
  out.best = std::move(cur);
  return out;
}

}  // namespace

BranchLevel minimize_branch(const VariationalProblem& prob, Branch branch,
                            const MinimizeOptions& opts) {
  if (opts.starts < 1) throw ContractViolation("minimize_branch needs at least one start");
  std::vector<StartOutcome> outcomes(static_cast<std::size_t>(opts.starts));
  parallel_for(outcomes.size(), opts.threads, [&](std::size_t i) {
    outcomes[i] = run_start(prob, branch, opts, static_cast<int>(i));
  });

  BranchLevel result;
  result.branch = branch;
  const StartOutcome* best = nullptr;
  for (const auto& o : outcomes) {
    result.starts.push_back(o.record);
    result.failed_samples += o.record.failed_samples;
    if (!o.best) continue;
    if (!best || o.record.level < best->record.level) best = &o;
  }
  if (!best) {
    std::ostringstream os;
    os << "no start admits the " << branch_name(branch) << " branch (" << prob.name << ", "
       << result.failed_samples << " failed samples)";
    throw InfeasibleBranch(os.str());
  }
  result.minimizer = project_to_branch(prob, best->best->x, branch);
  result.level = result.minimizer.value;
  result.iterations = best->record.iterations;
  result.tangent_residual = best->record.tangent_residual;
  result.converged = best->record.converged;
  result.history = best->history;
  return result;
}

PolishResult polish_branch(const VariationalProblem& prob, const DiscreteField& v, Branch branch,
                           const PolishOptions& opts) {
  Iterate cur = full_eval(prob, v, branch);
  const double scale = prob.ray(v)(locate(prob, v, branch)).value_scale;
  double step = 1.0 / std::max(scale, kTiny);
  int iter = 0;
  for (; iter < opts.max_iter && cur.residual > opts.tol; ++iter) {
    std::optional<Iterate> next;
    double a = step;
    for (int k = 0; k <= opts.max_backtracks && !next; ++k, a *= 0.5) {
      try {
        Iterate trial = full_eval(prob, prob.sphere.retract(cur.x.values() - a * cur.dir), branch);
        if (trial.residual < cur.residual) next = std::move(trial);
      } catch (const BranchUnavailable&) {
      } catch (const DegenerateRay&) {
      }
    }
    if (!next) break;
    const Eigen::VectorXd s = next->x.values() - cur.x.values();
    const Eigen::VectorXd y = next->dir - cur.dir;
    const double sy = prob.sphere.inner(s, y);
    step = sy > 0.0 ? std::clamp(prob.sphere.inner(s, s) / sy, 1e-14, 1e14) : 2.0 * a;
    cur = std::move(*next);
  }
  PolishResult out;
  out.point = project_to_branch(prob, cur.x, branch);
  out.tangent_residual = cur.residual;
  out.iterations = iter;
  out.converged = cur.residual <= opts.tol;
  return out;
}

ContinuityRecord continuity_probe(const VariationalProblem& prob, const DiscreteField& v,
                                  Branch branch, double radius, int samples, std::uint64_t seed) {
  if (radius < 0.0 || samples < 1) throw ContractViolation("continuity probe needs radius >= 0");
  ContinuityRecord rec;
  rec.radius = radius;
  rec.samples = samples;
  rec.t_base = locate(prob, v, branch);
  if (radius == 0.0) return rec;
  auto rng = stream_rng(seed, 0x636f6e74ULL);
  for (int k = 0; k < samples; ++k) {
    const Eigen::VectorXd w = prob.sphere.random_tangent(v, rng);
    const DiscreteField vp = prob.sphere.retract(v.values() + radius * w);
    rec.modulus = std::max(rec.modulus, std::abs(locate(prob, vp, branch) - rec.t_base));
  }
  return rec;
}

ConditionRatios condition_ratios(const VariationalProblem& prob, int samples, std::uint64_t seed) {
  if (!prob.hint) throw ContractViolation("condition ratios need a homogeneous hint");
  if (samples < 1) throw ContractViolation("condition ratios need at least one sample");
  const auto& deg = prob.hint->degrees;
  ConditionRatios out;
  out.samples = samples;
  const double inf = std::numeric_limits<double>::infinity();
  out.e_over_b = out.norm_over_e = out.e_over_a = out.b_over_a = inf;
  for (int k = 0; k < samples; ++k) {
    auto rng = stream_rng(seed, static_cast<std::uint64_t>(k));
    const DiscreteField v = prob.sphere.random_point(rng);
    const auto c = prob.hint->coefficients(v);
    const double nrm = prob.sphere.norm(v);
    out.e_over_b = std::min(out.e_over_b, std::pow(c.e, deg.beta / deg.eta) / c.b);
    out.norm_over_e = std::min(out.norm_over_e, std::pow(nrm, deg.eta) / c.e);
    out.e_over_a = std::min(out.e_over_a, std::pow(c.e, deg.alpha / deg.eta) / c.a);
    out.b_over_a = std::min(out.b_over_a, std::pow(c.b, deg.alpha / deg.beta) / c.a);
  }
  return out;
}

}  // namespace nehari::manifold
