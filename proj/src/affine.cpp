#include "nehari/affine.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "nehari/error.hpp"
#include "nehari/parallel.hpp"

namespace nehari::affine {

namespace {

constexpr double kPi = std::numbers::pi;

double abs_pow(double x, double k) {
  const double a = std::abs(x);
  return a == 0.0 ? 0.0 : std::exp(k * std::log(a));
}

struct Quadrature {
  std::vector<double> cos_t;
  std::vector<double> sin_t;
  double weight = 0.0;  // per half-circle node, antipodal twin folded in
};

Quadrature half_circle(int m_nodes) {
  Quadrature q;
  const int half = m_nodes / 2;
  q.cos_t.resize(static_cast<std::size_t>(half));
  q.sin_t.resize(static_cast<std::size_t>(half));
  for (int m = 0; m < half; ++m) {
    const double th = 2.0 * kPi * m / m_nodes;
    q.cos_t[static_cast<std::size_t>(m)] = std::cos(th);
    q.sin_t[static_cast<std::size_t>(m)] = std::sin(th);
  }
  q.weight = 2.0 * (2.0 * kPi / m_nodes);
  return q;
}

void require_planar(const DiscreteField& u) {
  if (u.grid().dim != 2) throw DomainError("the affine energy is implemented for 2-D grids");
}

// Directional p-th powers P_m = int |grad u . xi_m|^p and the reference
// ||grad u||_p, checking the degenerate-direction threshold.
std::vector<double> directional_powers(const AffineEnergyConfig& cfg, const fields::GradientField& g,
                                       const Quadrature& q) {
  const double vol = g.grid.cell_volume();
  const auto& comp = g.components;
  double full = 0.0;
  for (Eigen::Index c = 0; c < comp.rows(); ++c) {
    full += abs_pow(std::hypot(comp(c, 0), comp(c, 1)), cfg.p) * vol;
  }
  if (!(full > 0.0)) throw DomainError("the affine energy is undefined at u = 0");
  const double full_norm = std::pow(full, 1.0 / cfg.p);

  std::vector<double> powers(q.cos_t.size());
  for (std::size_t m = 0; m < powers.size(); ++m) {
    double s = 0.0;
    for (Eigen::Index c = 0; c < comp.rows(); ++c) {
      s += abs_pow(comp(c, 0) * q.cos_t[m] + comp(c, 1) * q.sin_t[m], cfg.p);
    }
    powers[m] = s * vol;
    if (!(std::pow(powers[m], 1.0 / cfg.p) >= 1e-14 * full_norm)) {
      std::ostringstream os;
      os << "directional derivative norm vanishes along angle " << 2.0 * kPi * m / cfg.angular_nodes;
      throw DegenerateDirection(os.str());
    }
  }
  return powers;
}

// sum_m w_m n_m^-2 over the full circle.
double angular_sum(const std::vector<double>& powers, const Quadrature& q, double p) {
  double s = 0.0;
  for (double pm : powers) s += q.weight * std::pow(pm, -2.0 / p);
  return s;
}

}  // namespace

double unit_ball_volume(double s) {
  if (s < 0.0) throw DomainError("unit ball volume needs s >= 0");
  return std::pow(kPi, s / 2.0) / std::tgamma(s / 2.0 + 1.0);
}

double gamma_constant(double p) {
  if (!(p > 1.0)) throw DomainError("affine energy needs p > 1");
  const double n = 2.0;
  const double wn = unit_ball_volume(n);
  return n * wn * unit_ball_volume(p - 1.0) / (2.0 * unit_ball_volume(n + p - 2.0)) *
         std::pow(n * wn, p / n);
}

AffineEnergyConfig AffineEnergyConfig::make(double p, int angular_nodes) {
  AffineEnergyConfig cfg{p, angular_nodes, 0.0};
  if (!(p > 1.0)) throw DomainError("affine energy needs p > 1");
  cfg.gamma = gamma_constant(p);
  cfg.validate();
  return cfg;
}

void AffineEnergyConfig::validate() const {
  if (!(p > 1.0)) throw DomainError("affine energy needs p > 1");
  if (angular_nodes < 8 || angular_nodes % 2 != 0) {
    throw DomainError("angular_nodes must be even and at least 8");
  }
  if (!(gamma > 0.0)) throw DomainError("affine normalizing constant must be positive");
}

std::vector<double> directional_norms(const AffineEnergyConfig& cfg, const DiscreteField& u) {
  require_planar(u);
  const auto q = half_circle(cfg.angular_nodes);
  auto powers = directional_powers(cfg, fields::gradient(u), q);
  for (double& x : powers) x = std::pow(x, 1.0 / cfg.p);
  return powers;
}

double affine_energy(const AffineEnergyConfig& cfg, const DiscreteField& u) {
  require_planar(u);
  const auto q = half_circle(cfg.angular_nodes);
  const auto powers = directional_powers(cfg, fields::gradient(u), q);
  return std::pow(cfg.gamma, 1.0 / cfg.p) / std::sqrt(angular_sum(powers, q, cfg.p));
}

DiscreteField affine_energy_gradient(const AffineEnergyConfig& cfg, const DiscreteField& u) {
  require_planar(u);
  const auto q = half_circle(cfg.angular_nodes);
  const auto g = fields::gradient(u);
  const auto powers = directional_powers(cfg, g, q);
  const double s = angular_sum(powers, q, cfg.p);
  const double energy = std::pow(cfg.gamma, 1.0 / cfg.p) / std::sqrt(s);

  // d(1/p E^p) = E^(p-1) gamma^(1/p) s^(-3/2) sum_m w_m n_m^(-2-p) dP_m / p,
  // with dP_m / p the adjoint of |g.xi|^(p-2) (g.xi) xi.
  const double outer = std::pow(energy, cfg.p - 1.0) * std::pow(cfg.gamma, 1.0 / cfg.p) *
                       std::pow(s, -1.5);
  Eigen::MatrixXd cell = Eigen::MatrixXd::Zero(g.components.rows(), 2);
  for (std::size_t m = 0; m < powers.size(); ++m) {
    const double wm = outer * q.weight * std::pow(powers[m], (-2.0 - cfg.p) / cfg.p);
    for (Eigen::Index c = 0; c < cell.rows(); ++c) {
      const double d = g.components(c, 0) * q.cos_t[m] + g.components(c, 1) * q.sin_t[m];
      const double f = wm * (d == 0.0 ? 0.0 : abs_pow(d, cfg.p - 2.0) * d);
      cell(c, 0) += f * q.cos_t[m];
      cell(c, 1) += f * q.sin_t[m];
    }
  }
  return {u.grid(), fields::gradient_adjoint(u.grid(), cell)};
}

double AffineTerm::value(const DiscreteField& u) const {
  return std::pow(affine_energy(cfg_, u), cfg_.p);
}

Eigen::VectorXd AffineTerm::gradient(const DiscreteField& u) const {
  return cfg_.p * affine_energy_gradient(cfg_, u).values();
}

std::string AffineTerm::describe() const {
  std::ostringstream os;
  os << "E_" << cfg_.p << "(u)^" << cfg_.p << " [M=" << cfg_.angular_nodes << "]";
  return os.str();
}

void AffineProblem::validate() const {
  config.validate();
  grid.validate();
  if (grid.dim != 2) throw ConfigError("the affine problem needs a 2-D grid");
  const double p = config.p;
  const double p_star = p < 2.0 ? 2.0 * p / (2.0 - p) : std::numeric_limits<double>::infinity();
  if (!(1.0 < q && q < p && p < r && r < p_star)) {
    std::ostringstream os;
    os << "affine problem requires 1 < q < p < r < p*, got q = " << q << ", p = " << p
       << ", r = " << r;
    throw ConfigError(os.str());
  }
  if (!(lambda > 0.0)) throw ConfigError("affine problem requires lambda > 0");
}

AffineProblem AffineProblem::with_lambda(double l) const {
  AffineProblem out = *this;
  out.lambda = l;
  return out;
}

manifold::VariationalProblem make_affine_problem(const AffineProblem& prob) {
  prob.validate();
  std::ostringstream name;
  name << "affine(p=" << prob.config.p << ",q=" << prob.q << ",r=" << prob.r
       << ",lambda=" << prob.lambda << ")";
  return manifold::make_homogeneous_problem(
      name.str(), manifold::SphereGeometry(prob.grid, prob.config.p), {prob.q, prob.config.p, prob.r},
      prob.lambda, std::make_shared<AffineTerm>(prob.config),
      std::make_shared<fields::LebesguePowerTerm>(prob.q),
      std::make_shared<fields::LebesguePowerTerm>(prob.r));
}

double lambda_A_estimate(const AffineProblem& prob, int samples, std::uint64_t seed,
                         unsigned threads) {
  if (samples < 1) throw ContractViolation("lambda_A_estimate needs at least one sample");
  const auto vp = make_affine_problem(prob);
  std::vector<double> lam(static_cast<std::size_t>(samples));
  parallel_for(lam.size(), threads, [&](std::size_t i) {
    auto rng = manifold::stream_rng(seed, i);
    const DiscreteField v = vp.sphere.random_point(rng);
    lam[i] = fibering::lambda_threshold(vp.hint->coefficients(v), vp.hint->degrees).lambda_u;
  });
  double best = std::numeric_limits<double>::infinity();
  for (double x : lam) best = std::min(best, x);
  return best;
}

manifold::BranchLevel solve_affine(const AffineProblem& prob, Branch branch,
                                   const manifold::MinimizeOptions& opts) {
  return manifold::minimize_branch(make_affine_problem(prob), branch, opts);
}

namespace {

bool sign_definite(const DiscreteField& u) {
  const double mx = u.values().maxCoeff();
  const double mn = u.values().minCoeff();
  const double tol = 1e-12 * std::max(std::abs(mx), std::abs(mn));
  return mn >= -tol || mx <= tol;
}

}  // namespace

SweepReport sweep_checks(const AffineProblem& prob, const SweepOptions& opts) {
  prob.validate();
  if (opts.points < 3 || !(opts.lambda_min_frac > 0.0) ||
      !(opts.lambda_max_frac > opts.lambda_min_frac * 10.0) || !(opts.lambda_max_frac < 1.0)) {
    throw ContractViolation("sweep must span at least a decade below the estimate");
  }
  SweepReport rep;
  rep.lambda_estimate =
      lambda_A_estimate(prob, opts.estimate_samples, opts.minimize.seed, opts.minimize.threads);

  // One exact decade from the bottom of the sweep for the slope fit, then a
  // geometric continuation up to the top fraction.
  const double lo = opts.lambda_min_frac * rep.lambda_estimate;
  const double hi = opts.lambda_max_frac * rep.lambda_estimate;
  const int decade_pts = std::max(2, opts.points / 2);
  std::vector<double> lambdas;
  for (int k = 0; k < decade_pts; ++k) lambdas.push_back(lo * std::pow(10.0, double(k) / decade_pts));
  const int upper = opts.points - decade_pts;
  for (int k = 0; k < upper; ++k) {
    lambdas.push_back(10.0 * lo * std::pow(hi / (10.0 * lo), double(k) / (upper - 1)));
  }

  std::optional<DiscreteField> warm_u, warm_v;
  auto solve_at = [&](double lam, Branch b, const std::optional<DiscreteField>& warm) {
    auto o = opts.minimize;
    o.warm_start = warm;
    return solve_affine(prob.with_lambda(lam), b, o);
  };

  std::vector<std::optional<DiscreteField>> v_dirs;
  for (double lam : lambdas) {
    SweepRow row;
    row.lambda = lam;
    try {
      const auto u = solve_at(lam, Branch::Plus, warm_u);
      const auto v = solve_at(lam, Branch::Minus, warm_v);
      warm_u = u.minimizer.direction;
      warm_v = v.minimizer.direction;
      row.feasible = true;
      row.phi_u = u.level;
      row.phi_v = v.level;
      row.norm_u = u.minimizer.t;
      row.norm_v = v.minimizer.t;
      row.residual_u = u.tangent_residual;
      row.residual_v = v.tangent_residual;
      row.converged_u = u.converged;
      row.converged_v = v.converged;
      row.u_sign_definite = sign_definite(u.minimizer.point());
      if (!u.converged || !v.converged) row.note = "not converged";
    } catch (const InfeasibleBranch& e) {
      row.note = e.what();
    }
    rep.rows.push_back(row);
    v_dirs.push_back(warm_v);
  }

  const auto& first = rep.rows.front();
  rep.sign_pattern = first.feasible && first.phi_u < 0.0 && first.phi_v > 0.0;
  rep.ordering = true;
  for (const auto& r : rep.rows) {
    if (r.feasible && !(r.phi_u < r.phi_v)) rep.ordering = false;
  }

  // A positive level needs a converged minimizer to be trusted; a negative
  // value at any point of the branch already bounds the infimum from above.
  auto positive = [](double level, bool converged) { return converged && level > 0.0; };
  for (std::size_t k = 0; k + 1 < rep.rows.size(); ++k) {
    const auto& a = rep.rows[k];
    const auto& b = rep.rows[k + 1];
    if (!(a.feasible && b.feasible && positive(a.phi_v, a.converged_v) && b.phi_v <= 0.0)) continue;
    rep.bracketed = true;
    double l0 = a.lambda, l1 = b.lambda;
    std::optional<DiscreteField> warm;
    if (v_dirs[k]) warm.emplace(*v_dirs[k]);
    while ((l1 - l0) / l0 > opts.bisection_tol) {
      const double mid = std::sqrt(l0 * l1);
      const auto v = solve_at(mid, Branch::Minus, warm);
      ++rep.bisection_steps;
      if (v.level <= 0.0) {
        l1 = mid;
      } else {
        if (!v.converged) rep.bisection_uncertain = true;
        l0 = mid;
        warm.emplace(v.minimizer.direction);
      }
    }
    rep.bar_lo = l0;
    rep.bar_hi = l1;
    rep.lambda_bar = std::sqrt(l0 * l1);
    break;
  }

  const double p = prob.config.p;
  rep.slope_applicable = prob.q > p * (1.0 - 1.0 / 2.0);
  rep.slope_target = p / (p - prob.q);
  if (rep.slope_applicable) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (const auto& r : rep.rows) {
      if (!r.feasible || r.lambda > 10.0 * lo * (1.0 + 1e-12)) continue;
      const double x = std::log(r.lambda), y = std::log(r.norm_u);
      sx += x, sy += y, sxx += x * x, sxy += x * y;
      ++n;
    }
    rep.slope_points = n;
    rep.slope_lo = lo;
    rep.slope_hi = 10.0 * lo;
    if (n >= 2) {
      rep.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
      rep.slope_ok = rep.slope >= 0.8 * rep.slope_target;
    }
  }
  return rep;
}

}  // namespace nehari::affine
