#include "nehari/cli/checks.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

#include "nehari/affine.hpp"
#include "nehari/error.hpp"
#include "nehari/fibering.hpp"
#include "nehari/manifold.hpp"
#include "nehari/parallel.hpp"
#include "nehari/prescribed.hpp"

namespace nehari::cli {

namespace {

using fields::DiscreteField;
using fields::GridDomain;
using manifold::Branch;
using nlohmann::json;

constexpr double kPi = 3.14159265358979323846;

std::string fmt(double x, int digits = 3) {
  std::ostringstream os;
  os << std::setprecision(digits) << x;
  return os.str();
}

double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), std::numeric_limits<double>::min());
}

// ---------------------------------------------------------------- fibering

struct Triple {
  fibering::HomogeneityDegrees deg;
  fibering::FiberingCoefficients coeffs;
};

// 100 random admissible triples; degrees may be negative.
std::vector<Triple> fibering_corpus(std::uint64_t seed) {
  auto rng = manifold::stream_rng(seed, 1001);
  std::uniform_real_distribution<double> first(-1.5, 2.5);
  std::uniform_real_distribution<double> gap(0.25, 2.5);
  std::uniform_real_distribution<double> mag(-1.0, 1.0);
  std::vector<Triple> out;
  while (out.size() < 100) {
    Triple t;
    t.deg.alpha = first(rng);
    t.deg.eta = t.deg.alpha + gap(rng);
    t.deg.beta = t.deg.eta + gap(rng);
    t.coeffs = {std::pow(10.0, mag(rng)), std::pow(10.0, mag(rng)), std::pow(10.0, mag(rng))};
    if (std::abs(t.deg.alpha) < 0.1 || std::abs(t.deg.eta) < 0.1 || std::abs(t.deg.beta) < 0.1) {
      continue;
    }
    out.push_back(t);
  }
  return out;
}

// g(t) = phi'(t) / t^(alpha-1): same sign as phi', free of the t^(alpha-1) factor.
double reduced_slope(const Triple& tr, double lambda, double t) {
  const auto& d = tr.deg;
  const auto& c = tr.coeffs;
  return c.e * std::pow(t, d.eta - d.alpha) - lambda * c.a - c.b * std::pow(t, d.beta - d.alpha);
}

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> t(static_cast<std::size_t>(n));
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < n; ++i) t[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (n - 1));
  return t;
}

constexpr int kScanPoints = 100000;

void criterion1(Report& rep, CriterionSummary& sum, std::uint64_t seed) {
  const auto corpus = fibering_corpus(seed);
  const double mults[] = {0.5, 0.9, 0.999, 1.001, 1.5};
  int cases = 0, matches = 0, bracket_misses = 0;
  double worst_residual = 0.0;
  json mismatches = json::array();
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& tr = corpus[i];
    const auto th = fibering::lambda_threshold(tr.coeffs, tr.deg);
    const auto ts = log_grid(1e-4 * th.t0, 1e4 * th.t0, kScanPoints);
    for (double m : mults) {
      const double lambda = m * th.lambda_u;
      std::vector<std::size_t> changes;
      double prev = reduced_slope(tr, lambda, ts[0]);
      for (std::size_t k = 1; k < ts.size(); ++k) {
        const double cur = reduced_slope(tr, lambda, ts[k]);
        if ((prev < 0.0) != (cur < 0.0)) changes.push_back(k);
        prev = cur;
      }
      const auto expect = changes.size() == 2   ? fibering::RootKind::TwoRoots
                          : changes.empty()     ? fibering::RootKind::NoRoots
                                                : fibering::RootKind::Degenerate;
      const auto roots = fibering::fibering_roots(tr.coeffs, tr.deg, lambda);
      ++cases;
      const bool ok = roots.kind == expect && changes.size() != 1 && changes.size() <= 2;
      if (ok) {
        ++matches;
      } else {
        mismatches.push_back({{"triple", i}, {"multiplier", m}, {"scan_changes", changes.size()},
                              {"kind", std::string(fibering::to_string(roots.kind))}});
      }
      if (roots.kind == fibering::RootKind::TwoRoots) {
        for (double t : {roots.t_plus, roots.t_minus}) {
          const double res = std::abs(fibering::phi_prime(tr.coeffs, tr.deg, lambda, t)) /
                             fibering::phi_prime_scale(tr.coeffs, tr.deg, lambda, t);
          worst_residual = std::max(worst_residual, res);
        }
        if (changes.size() == 2) {
          const bool in_plus = ts[changes[0] - 1] <= roots.t_plus && roots.t_plus <= ts[changes[0]];
          const bool in_minus =
              ts[changes[1] - 1] <= roots.t_minus && roots.t_minus <= ts[changes[1]];
          bracket_misses += (in_plus && in_minus) ? 0 : 1;
        }
      }
    }
  }
  // Exactly at the threshold the band classifies the ray as degenerate.
  int degenerate_hits = 0;
  for (const auto& tr : corpus) {
    const auto th = fibering::lambda_threshold(tr.coeffs, tr.deg);
    degenerate_hits +=
        fibering::fibering_roots(tr.coeffs, tr.deg, th.lambda_u).kind == fibering::RootKind::Degenerate;
  }
  rep.records()["criterion_1"] = {{"triples", corpus.size()},
                                  {"cases", cases},
                                  {"matches", matches},
                                  {"scan_points", kScanPoints},
                                  {"max_relative_root_residual", worst_residual},
                                  {"roots_outside_scan_bracket", bracket_misses},
                                  {"degenerate_at_threshold", degenerate_hits},
                                  {"mismatches", mismatches}};
  rep.check("c1", "classification_match_fraction", static_cast<double>(matches) / cases, ">=", 1.0);
  rep.check("c1", "max_relative_root_residual", worst_residual, "<=", 1e-9);
  rep.check("c1", "roots_outside_scan_bracket", bracket_misses, "<=", 0.0);
  rep.check("c1", "degenerate_at_threshold", degenerate_hits, ">=", static_cast<double>(corpus.size()));
  sum.headline = std::to_string(matches) + "/" + std::to_string(cases) +
                 " classifications match the scan; max root residual " + fmt(worst_residual) +
                 "·scale (limit 1e-9)";
}

// Golden-section maximization of a unimodal f on [lo, hi] in log t.
double golden_max(const std::function<double(double)>& f, double lo, double hi, double& arg) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = std::log(lo), b = std::log(hi);
  double x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = f(std::exp(x1)), f2 = f(std::exp(x2));
  for (int it = 0; it < 200 && b - a > 1e-15; ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + g * (b - a);
      f2 = f(std::exp(x2));
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - g * (b - a);
      f1 = f(std::exp(x1));
    }
  }
  arg = std::exp(0.5 * (a + b));
  return std::max(f1, f2);
}

void criterion2(Report& rep, CriterionSummary& sum, std::uint64_t seed) {
  const auto corpus = fibering_corpus(seed);
  double worst_lambda = 0.0, worst_t0 = 0.0;
  for (const auto& tr : corpus) {
    const auto th = fibering::lambda_threshold(tr.coeffs, tr.deg);
    const auto ts = log_grid(1e-4 * th.t0, 1e4 * th.t0, kScanPoints);
    // lambda for which max_t phi' = 0: max of (e t^(eta-alpha) - b t^(beta-alpha)) / a.
    auto crossing = [&](double t) { return reduced_slope(tr, 0.0, t) / tr.coeffs.a; };
    std::size_t best = 0;
    double best_val = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < ts.size(); ++k) {
      const double v = crossing(ts[k]);
      if (v > best_val) {
        best_val = v;
        best = k;
      }
    }
    double t_scan = ts[best];
    const double lam_scan =
        golden_max(crossing, ts[best > 0 ? best - 1 : 0], ts[std::min(best + 1, ts.size() - 1)], t_scan);
    worst_lambda = std::max(worst_lambda, rel_err(th.lambda_u, lam_scan));
    worst_t0 = std::max(worst_t0, rel_err(th.t0, t_scan));
  }
  const fibering::HomogeneityDegrees q{1.0, 2.0, 3.0};
  const fibering::FiberingCoefficients one{1.0, 1.0, 1.0};
  const auto th = fibering::lambda_threshold(one, q);
  const auto roots = fibering::fibering_roots(one, q, 0.1875);
  const double exact_err =
      std::max({std::abs(th.lambda_u - 0.25), std::abs(th.t0 - 0.5), std::abs(roots.t_plus - 0.25),
                std::abs(roots.t_minus - 0.75)});
  rep.records()["criterion_2"] = {{"triples", corpus.size()},
                                  {"max_relative_lambda_error", worst_lambda},
                                  {"max_relative_t0_error", worst_t0},
                                  {"quadratic",
                                   {{"lambda_u", th.lambda_u},
                                    {"t0", th.t0},
                                    {"t_plus", roots.t_plus},
                                    {"t_minus", roots.t_minus},
                                    {"max_abs_error", exact_err}}}};
  rep.check("c2", "max_relative_lambda_error", worst_lambda, "<=", 1e-6);
  rep.check("c2", "max_relative_t0_error", worst_t0, "<=", 1e-6);
  rep.check("c2", "quadratic_case_max_abs_error", exact_err, "<=", 1e-10);
  rep.require("c2", "quadratic_case_two_roots", roots.kind == fibering::RootKind::TwoRoots);
  sum.headline = "lambda(u) vs scan max rel err " + fmt(worst_lambda) + " (limit 1e-6); quadratic case err " +
                 fmt(exact_err) + " (limit 1e-10)";
}

// ---------------------------------------------------------------- sphere

manifold::VariationalProblem cc_homogeneous(int n, double lambda) {
  return manifold::make_homogeneous_problem(
      "semilinear_cc", manifold::SphereGeometry(GridDomain::line(n), 2.0), {1.5, 2.0, 4.0}, lambda,
      std::make_shared<fields::GradientPowerTerm>(2.0),
      std::make_shared<fields::LebesguePowerTerm>(1.5),
      std::make_shared<fields::LebesguePowerTerm>(4.0));
}

void criterion3(Report& rep, CriterionSummary& sum, std::uint64_t seed) {
  const auto prob = cc_homogeneous(63, 0.1);
  const double eps = 1e-5;
  json rec;
  double worst_all = 0.0;
  for (Branch b : {Branch::Plus, Branch::Minus}) {
    auto rng = manifold::stream_rng(seed, 3000 + static_cast<std::uint64_t>(b));
    double worst = 0.0;
    int done = 0, skipped = 0;
    while (done < 20) {
      const DiscreteField v = prob.sphere.random_point(rng);
      const Eigen::VectorXd w = prob.sphere.random_tangent(v, rng);
      try {
        const Eigen::VectorXd g = manifold::reduced_gradient(prob, v, b);
        const double fwd =
            manifold::reduced_value(prob, prob.sphere.retract(v.values() + eps * w), b);
        const double bwd =
            manifold::reduced_value(prob, prob.sphere.retract(v.values() - eps * w), b);
        const double fd = (fwd - bwd) / (2.0 * eps);
        const double an = prob.sphere.inner(g, w);
        worst = std::max(worst, std::abs(fd - an) / prob.sphere.metric_norm(g));
        ++done;
      } catch (const BranchUnavailable&) {
        ++skipped;
      } catch (const DegenerateRay&) {
        ++skipped;
      }
      if (skipped > 1000) throw NumericalError("criterion 3: too many rays without the branch");
    }
    rec[std::string(manifold::to_string(b))] = {
        {"samples", done}, {"resampled", skipped}, {"max_relative_error", worst}};
    rep.check("c3", std::string("reduced_gradient_fd_") + std::string(manifold::to_string(b)), worst,
              "<=", 1e-4);
    worst_all = std::max(worst_all, worst);
  }
  rec["epsilon"] = eps;
  rec["grid_n"] = 63;
  rep.records()["criterion_3"] = rec;
  sum.headline = "tangential FD of reduced gradient, 20 points/branch: max rel err " + fmt(worst_all) +
                 " (limit 1e-4)";
}

// Shared cache of the expensive model setups.
struct Models {
  prescribed::PrescribedProblem cc =
      prescribed::build_semilinear_cc(GridDomain::line(63), 1.5, fields::Nonlinearity::pure_power(4.0));
  prescribed::PrescribedProblem pq = prescribed::build_pq_laplacian(GridDomain::line(63), 3.0, 2.0, 1.5, 4.0);
  affine::AffineProblem affine{};
  std::map<std::string, prescribed::HGround> ground;
};

manifold::MinimizeOptions minimize_opts(const CheckOptions& o, std::uint64_t stream) {
  manifold::MinimizeOptions m;
  m.starts = o.starts;
  m.seed = o.seed * 1000003ULL + stream;
  m.threads = o.threads;
  return m;
}

json level_json(const manifold::BranchLevel& l) {
  return {{"level", l.level},
          {"t", l.minimizer.t},
          {"tangent_residual", l.tangent_residual},
          {"gradient_dual_norm", l.minimizer.residual},
          {"iterations", l.iterations},
          {"converged", l.converged},
          {"failed_samples", l.failed_samples}};
}

void criterion4(Report& rep, CriterionSummary& sum, const CheckOptions& o, Models& models) {
  struct Case {
    std::string name;
    std::function<manifold::VariationalProblem()> make;
    json meta;
  };
  const double affine_est =
      affine::lambda_A_estimate(models.affine, 100, o.seed, o.threads);
  std::vector<Case> cases{
      {"semilinear_cc", [&] { return prescribed::fixed_lambda_problem(models.cc, 0.1); },
       {{"lambda", 0.1}, {"q", 1.5}, {"r", 4.0}, {"n", 63}}},
      {"pq_laplacian", [&] { return prescribed::fixed_lambda_problem(models.pq, 0.1); },
       {{"lambda", 0.1}, {"p", 3.0}, {"q", 2.0}, {"r1", 1.5}, {"r2", 4.0}, {"n", 63}}},
      {"affine",
       [&] { return affine::make_affine_problem(models.affine.with_lambda(0.1 * affine_est)); },
       {{"lambda", 0.1 * affine_est}, {"lambda_estimate", affine_est}, {"p", 2.0}, {"q", 1.6},
        {"r", 4.0}, {"grid", "15x15"}}}};
  json rec;
  std::ostringstream head;
  std::uint64_t stream = 40;
  for (const auto& c : cases) {
    const auto prob = c.make();
    const auto opts = minimize_opts(o, stream++);
    const auto plus = manifold::minimize_branch(prob, Branch::Plus, opts);
    const auto minus = manifold::minimize_branch(prob, Branch::Minus, opts);
    const double gap = minus.level - plus.level;
    rec[c.name] = {{"model", c.meta},
                   {"plus", level_json(plus)},
                   {"minus", level_json(minus)},
                   {"gap", gap}};
    rep.check("c4", c.name + "_level_gap", gap, ">", 10.0 * opts.tol);
    rep.require("c4", c.name + "_plus_converged", plus.converged);
    rep.require("c4", c.name + "_minus_converged", minus.converged);
    rep.check("c4", c.name + "_plus_level_negative", plus.level, "<", 0.0);
    head << c.name << " gap " << fmt(gap) << "; ";
  }
  rep.records()["criterion_4"] = rec;
  sum.headline = head.str() + "required > " + fmt(10.0 * 1e-6);
}

const prescribed::HGround& ground(Models& m, const std::string& name,
                                  const prescribed::PrescribedProblem& prob, const CheckOptions& o) {
  auto it = m.ground.find(name);
  if (it == m.ground.end()) {
    it = m.ground.emplace(name, prescribed::h_ground_level(prob, minimize_opts(o, 50 + m.ground.size())))
             .first;
  }
  return it->second;
}

void criterion5(Report& rep, CriterionSummary& sum, const CheckOptions& o, Models& models) {
  json rec;
  double worst_phi = 0.0, worst_energy = 0.0;
  int straddle_ok = 0, straddle_total = 0;
  for (const auto& [name, prob] :
       std::vector<std::pair<std::string, const prescribed::PrescribedProblem*>>{
           {"semilinear_cc", &models.cc}, {"pq_laplacian", &models.pq}}) {
    const auto& g = ground(models, name, *prob, o);
    json mrec{{"h0", g.h0}, {"alpha", prob->alpha}};
    rep.check("c5", name + "_h0_positive", g.h0, ">", 0.0);
    // Probe directions: the h0 minimizer plus 50 random rays.
    std::vector<DiscreteField> probes{g.direction};
    auto rng = manifold::stream_rng(o.seed, 5000 + straddle_total);
    for (int i = 0; i < 50; ++i) probes.push_back(prob->sphere.random_point(rng));
    for (double rho : {0.5, 0.9, 1.1}) {
      const double c = -rho * g.h0 / prob->alpha;
      json row{{"rho", rho}, {"c", c}};
      int rootless = 0;
      for (const auto& v : probes) rootless += prescribed::roots_of_H(*prob, v, c).t_c_plus ? 0 : 1;
      const bool h0_ray_rootless = !prescribed::roots_of_H(*prob, g.direction, c).t_c_plus;
      row["rootless_probes"] = rootless;
      row["h0_direction_rootless"] = h0_ray_rootless;
      bool regime_ok = false;
      if (rho < 1.0) {
        prescribed::PrescribedOptions po;
        po.minimize = minimize_opts(o, 60 + static_cast<std::uint64_t>(rho * 10));
        po.h0 = g.h0;
        double levels[2] = {0.0, 0.0};
        for (Branch b : {Branch::Plus, Branch::Minus}) {
          const auto r = prescribed::solve_prescribed(*prob, c, b, po);
          const auto& s = r.solution;
          const std::string key = name + "_rho" + fmt(rho) + "_" + std::string(manifold::to_string(b));
          row[std::string(manifold::to_string(b))] = {{"lambda_star", s.lambda_star},
                                                      {"phi_residual", s.phi_residual},
                                                      {"energy_error", s.energy_error},
                                                      {"certified", s.certified},
                                                      {"polish_iterations", r.polish_iterations},
                                                      {"tangent_residual", r.level.tangent_residual}};
          rep.check("c5", key + "_phi_residual", s.phi_residual, "<=", 1e-6);
          rep.check("c5", key + "_energy_error", s.energy_error, "<=", 1e-6);
          worst_phi = std::max(worst_phi, s.phi_residual);
          worst_energy = std::max(worst_energy, s.energy_error);
          levels[b == Branch::Plus ? 0 : 1] = s.lambda_star;
        }
        rep.check("c5", name + "_rho" + fmt(rho) + "_level_ordering", levels[1] - levels[0], ">", 0.0,
                  "lambda_1c^- - lambda_1c^+");
        regime_ok = rootless == 0;
      } else {
        bool out_of_range = false;
        try {
          prescribed::PrescribedOptions po;
          po.minimize = minimize_opts(o, 70);
          po.h0 = g.h0;
          prescribed::solve_prescribed(*prob, c, Branch::Plus, po);
        } catch (const OutOfRangeLevel&) {
          out_of_range = true;
        }
        row["rejected_out_of_range"] = out_of_range;
        regime_ok = out_of_range && h0_ray_rootless;
      }
      row["two_root_regime_matches"] = regime_ok;
      rep.require("c5", name + "_rho" + fmt(rho) + "_two_root_iff", regime_ok,
                  rho < 1.0 ? "all probe rays have two roots" : "h0 ray rootless and c rejected");
      straddle_ok += regime_ok;
      ++straddle_total;
      mrec["levels"].push_back(row);
    }
    rec[name] = mrec;
  }
  rep.records()["criterion_5"] = rec;
  sum.headline = "max ||Phi'|| " + fmt(worst_phi) + ", max |Phi - c| " + fmt(worst_energy) +
                 " (limit 1e-6); regime check " + std::to_string(straddle_ok) + "/" +
                 std::to_string(straddle_total);
}

json gap_json(const prescribed::GapRecord& g) {
  return {{"c", g.c},
          {"samples", g.samples},
          {"rootless", g.rootless},
          {"min_s_gap", g.min_s_gap},
          {"min_lambda_gap", g.min_lambda_gap},
          {"epsilon", g.epsilon},
          {"derivative_floor", g.derivative_floor},
          {"sup_nplus_norm", g.sup_nplus_norm},
          {"nminus_mass_min", g.nminus_mass_min}};
}

void criterion6(Report& rep, CriterionSummary& sum, const CheckOptions& o, Models& models) {
  json rec;
  std::ostringstream head;
  for (const auto& [name, prob] :
       std::vector<std::pair<std::string, const prescribed::PrescribedProblem*>>{
           {"semilinear_cc", &models.cc}, {"pq_laplacian", &models.pq}}) {
    const auto& g = ground(models, name, *prob, o);
    const double c = -0.5 * g.h0 / prob->alpha;
    const auto gap = prescribed::gap_diagnostics(*prob, c, 200, o.seed, o.threads);
    json mrec{{"h0", g.h0}, {"gaps", gap_json(gap)}};
    rep.check("c6", name + "_rootless", gap.rootless, "<=", 0.0);
    rep.check("c6", name + "_min_s_gap", gap.min_s_gap, ">", 0.0);
    rep.check("c6", name + "_min_lambda_gap", gap.min_lambda_gap, ">", 0.0);
    rep.check("c6", name + "_derivative_floor", gap.derivative_floor, ">", 0.0);
    double prev = std::numeric_limits<double>::infinity();
    double worst_drop = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 6; ++k) {
      const double ck = -g.h0 * std::ldexp(1.0, -k) / prob->alpha;
      const auto gk = prescribed::gap_diagnostics(*prob, ck, 200, o.seed, o.threads);
      mrec["shrinkage"].push_back({{"k", k}, {"c", ck}, {"sup_nplus_norm", gk.sup_nplus_norm},
                                   {"rootless", gk.rootless}});
      if (k > 1) worst_drop = std::min(worst_drop, prev - gk.sup_nplus_norm);
      prev = gk.sup_nplus_norm;
    }
    rep.check("c6", name + "_sup_nplus_strict_decrease", worst_drop, ">", 0.0,
              "min over k of sup_k - sup_{k+1}");
    rec[name] = mrec;
    head << name << " min gaps (" << fmt(gap.min_s_gap) << ", " << fmt(gap.min_lambda_gap) << ", "
         << fmt(gap.derivative_floor) << "); ";
  }
  rep.records()["criterion_6"] = rec;
  sum.headline = head.str() + "sup N+ norm shrinks along c_k";
}

// ---------------------------------------------------------------- affine

DiscreteField smooth_field(const GridDomain& grid, std::mt19937_64& rng) {
  return manifold::SphereGeometry(grid, 2.0).random_point(rng);
}

void criterion7(Report& rep, CriterionSummary& sum, std::uint64_t seed) {
  json rec;
  const GridDomain g15 = GridDomain::rectangle(15, 15);
  auto rng = manifold::stream_rng(seed, 7000);

  double worst_homog = 0.0;
  for (double p : {2.0, 3.0}) {
    const auto cfg = affine::AffineEnergyConfig::make(p, 64);
    for (int i = 0; i < 5; ++i) {
      const DiscreteField u = smooth_field(g15, rng);
      const double e1 = affine::affine_energy(cfg, u);
      for (double t : {0.5, 2.0, 10.0}) {
        worst_homog = std::max(worst_homog, rel_err(affine::affine_energy(cfg, u.scaled(t)), t * e1));
      }
    }
  }
  rec["homogeneity_max_rel_error"] = worst_homog;
  rep.check("c7", "homogeneity", worst_homog, "<=", 1e-12);

  // p = 2: trapezoid vs dense reference vs the closed form 2 pi / sqrt(ac - b^2).
  const auto cfg64 = affine::AffineEnergyConfig::make(2.0, 64);
  const auto cfg_ref = affine::AffineEnergyConfig::make(2.0, 4096);
  double worst_dense = 0.0, worst_exact = 0.0;
  json by_m;
  std::map<int, double> worst_by_m;
  for (int i = 0; i < 5; ++i) {
    const DiscreteField u = smooth_field(g15, rng);
    const auto grad = fields::gradient(u);
    const double vol = g15.cell_volume();
    const Eigen::VectorXd gx = grad.components.col(0), gy = grad.components.col(1);
    const double a = gx.squaredNorm() * vol, b = gx.dot(gy) * vol, c = gy.squaredNorm() * vol;
    const double exact = std::sqrt(cfg64.gamma) * std::pow(2.0 * kPi / std::sqrt(a * c - b * b), -0.5);
    const double ref = affine::affine_energy(cfg_ref, u);
    const double e64 = affine::affine_energy(cfg64, u);
    worst_dense = std::max(worst_dense, rel_err(e64, ref));
    worst_exact = std::max({worst_exact, rel_err(e64, exact), rel_err(ref, exact)});
    for (int m : {8, 16, 32}) {
      worst_by_m[m] = std::max(worst_by_m[m],
                               rel_err(affine::affine_energy(affine::AffineEnergyConfig::make(2.0, m), u), ref));
    }
  }
  for (const auto& [m, e] : worst_by_m) by_m[std::to_string(m)] = e;
  rec["quadrature"] = {{"nodes", 64},
                       {"reference_nodes", 4096},
                       {"max_rel_error_vs_reference", worst_dense},
                       {"max_rel_error_vs_closed_form", worst_exact},
                       {"coarse_nodes_rel_error", by_m}};
  rep.check("c7", "quadrature_vs_dense_reference", worst_dense, "<=", 1e-8);
  rep.check("c7", "quadrature_vs_closed_form", worst_exact, "<=", 1e-8);

  // Anisotropic Gaussian bump, axis-aligned vs rotated by 30 degrees.
  const GridDomain fine = GridDomain::rectangle(255, 255, 2.0, 2.0);
  auto bump = [](double angle) {
    const double ca = std::cos(angle), sa = std::sin(angle);
    return [=](double x, double y) {
      const double dx = x - 1.0, dy = y - 1.0;
      const double xr = ca * dx + sa * dy, yr = -sa * dx + ca * dy;
      return std::exp(-(xr * xr / 0.08 + yr * yr / 0.02));
    };
  };
  json rot;
  double worst_rot = 0.0;
  for (double p : {2.0, 3.0}) {
    const auto cfg = affine::AffineEnergyConfig::make(p, 64);
    const double e0 = affine::affine_energy(cfg, DiscreteField::sample(fine, bump(0.0)));
    const double e30 = affine::affine_energy(cfg, DiscreteField::sample(fine, bump(kPi / 6.0)));
    const double err = rel_err(e30, e0);
    rot[fmt(p)] = {{"energy_0", e0}, {"energy_30", e30}, {"rel_diff", err}};
    worst_rot = std::max(worst_rot, err);
  }
  rec["rotation"] = rot;
  rep.check("c7", "rotation_invariance", worst_rot, "<=", 1e-3);

  // Chain-rule gradient of (1/p) E^p against centered differences.
  const auto cfg3 = affine::AffineEnergyConfig::make(3.0, 64);
  std::normal_distribution<double> normal;
  double worst_fd = 0.0;
  const double eps = 1e-6;
  for (int i = 0; i < 20; ++i) {
    const DiscreteField u = smooth_field(g15, rng);
    Eigen::VectorXd w(u.size());
    for (int k = 0; k < w.size(); ++k) w[k] = normal(rng);
    w /= w.norm();
    const Eigen::VectorXd gr = affine::affine_energy_gradient(cfg3, u).values();
    auto f = [&](double s) {
      return std::pow(affine::affine_energy(cfg3, DiscreteField(g15, u.values() + s * w)), 3.0) / 3.0;
    };
    const double fd = (f(eps) - f(-eps)) / (2.0 * eps);
    const double scale = gr.cwiseAbs().dot(w.cwiseAbs());
    worst_fd = std::max(worst_fd, std::abs(fd - gr.dot(w)) / scale);
  }
  rec["gradient_fd"] = {{"p", 3.0}, {"grid", "15x15"}, {"samples", 20}, {"epsilon", eps},
                        {"max_rel_error", worst_fd}};
  rep.check("c7", "gradient_finite_differences", worst_fd, "<=", 1e-4);
  rep.records()["criterion_7"] = rec;
  sum.headline = "homogeneity " + fmt(worst_homog) + ", quadrature " + fmt(worst_dense) + ", rotation " +
                 fmt(worst_rot) + ", gradient FD " + fmt(worst_fd);
}

void criterion8(Report& rep, CriterionSummary& sum, const CheckOptions& o, Models& models) {
  affine::SweepOptions t;
  t.minimize = minimize_opts(o, 80);
  const auto r = affine::sweep_checks(models.affine, t);
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"lambda", row.lambda},
                    {"feasible", row.feasible},
                    {"note", row.note},
                    {"phi_u", row.phi_u},
                    {"phi_v", row.phi_v},
                    {"norm_u", row.norm_u},
                    {"norm_v", row.norm_v},
                    {"residual_u", row.residual_u},
                    {"residual_v", row.residual_v},
                    {"converged_u", row.converged_u},
                    {"converged_v", row.converged_v},
                    {"u_sign_definite", row.u_sign_definite}});
  }
  const double bar_rel = r.bracketed ? (r.bar_hi - r.bar_lo) / r.lambda_bar : 1.0;
  rep.records()["criterion_8"] = {{"lambda_estimate", r.lambda_estimate},
                                  {"rows", rows},
                                  {"sign_pattern", r.sign_pattern},
                                  {"ordering", r.ordering},
                                  {"bracketed", r.bracketed},
                                  {"bar_lo", r.bar_lo},
                                  {"bar_hi", r.bar_hi},
                                  {"lambda_bar", r.lambda_bar},
                                  {"lambda_bar_over_estimate", r.lambda_bar / r.lambda_estimate},
                                  {"bisection_steps", r.bisection_steps},
                                  {"bisection_uncertain", r.bisection_uncertain},
                                  {"slope_applicable", r.slope_applicable},
                                  {"slope", r.slope},
                                  {"slope_target", r.slope_target},
                                  {"slope_of_norm_power_p", models.affine.config.p * r.slope},
                                  {"slope_window", {r.slope_lo, r.slope_hi}},
                                  {"slope_points", r.slope_points}};
  rep.require("c8", "sign_pattern_at_smallest_lambda", r.sign_pattern, "Phi(u) < 0 < Phi(v)");
  rep.require("c8", "level_ordering_all_feasible", r.ordering);
  rep.require("c8", "phi_v_sign_change_bracketed", r.bracketed);
  rep.check("c8", "lambda_bar_relative_bracket", bar_rel, "<=", 1e-3);
  rep.require("c8", "lambda_bar_bisection_converged_sides", r.bracketed && !r.bisection_uncertain);
  if (r.slope_applicable) {
    rep.check("c8", "norm_slope", r.slope, ">=", 0.8 * r.slope_target,
              "fitted d log||u|| / d log lambda vs 0.8 p/(p-q)");
  }
  sum.headline = "sign pattern " + std::string(r.sign_pattern ? "ok" : "FAILED") + ", lambda_bar " +
                 fmt(r.lambda_bar, 6) + " (bracket rel " + fmt(bar_rel) + "), slope " + fmt(r.slope) +
                 " vs required >= " + fmt(0.8 * r.slope_target);
}

// ---------------------------------------------------------------- discretization

struct SinErrors {
  double energy, l2, l4;
};

SinErrors sin_errors(int n) {
  const auto u = DiscreteField::sample(GridDomain::line(n), [](double x, double) { return std::sin(kPi * x); });
  return {rel_err(fields::dirichlet_energy_p(u, 2.0), kPi * kPi / 2.0),
          rel_err(fields::lp_norm_pow(u, 2.0), 0.5), rel_err(fields::lp_norm_pow(u, 4.0), 3.0 / 8.0)};
}

void criterion9(Report& rep, CriterionSummary& sum) {
  const SinErrors e127 = sin_errors(127);
  const SinErrors e63 = sin_errors(63);
  const GridDomain grid = GridDomain::line(127);
  const double h = grid.h(0);
  const auto u = DiscreteField::sample(grid, [](double x, double) { return std::sin(kPi * x); });
  const Eigen::VectorXd g = fields::energy_gradient_p(u, 2.0).values();
  // Mass-weighted stencil: g = h * (2/h^2)(1 - cos(pi h)) u.
  const double mu = 2.0 / (h * h) * (1.0 - std::cos(kPi * h));
  const double eig_err = (g - h * mu * u.values()).cwiseAbs().maxCoeff() / g.cwiseAbs().maxCoeff();
  const double order = e63.energy / e127.energy;
  rep.records()["criterion_9"] = {{"n", 127},
                                  {"dirichlet_energy_rel_error", e127.energy},
                                  {"l2_rel_error", e127.l2},
                                  {"l4_rel_error", e127.l4},
                                  {"eigenvalue", mu},
                                  {"eigenpair_rel_error", eig_err},
                                  {"energy_error_ratio_63_to_127", order}};
  rep.check("c9", "sin_dirichlet_energy", e127.energy, "<=", 1e-3);
  rep.check("c9", "sin_l2", e127.l2, "<=", 1e-3);
  rep.check("c9", "sin_l4", e127.l4, "<=", 1e-3);
  rep.check("c9", "laplacian_eigenpair", eig_err, "<=", 1e-10);
  rep.check("c9", "energy_error_ratio_on_refinement", order, ">=", 3.5);
  sum.headline = "sin identities max rel err " + fmt(std::max({e127.energy, e127.l2, e127.l4})) +
                 " (limit 1e-3); eigenpair " + fmt(eig_err) + " (limit 1e-10)";
}

bool wants(const CheckOptions& o, int id) { return o.criteria.empty() || o.criteria.count(id) > 0; }

}  // namespace

const std::vector<std::pair<int, std::string>>& criterion_titles() {
  static const std::vector<std::pair<int, std::string>> titles{
      {1, "fibering trichotomy oracle"},
      {2, "closed-form threshold"},
      {3, "reduced-gradient identity"},
      {4, "strict level ordering"},
      {5, "prescribed-energy certification"},
      {6, "gap diagnostics"},
      {7, "affine energy"},
      {8, "affine lambda-sweep suite"},
      {9, "discretization sanity"},
      {10, "determinism across thread counts"}};
  return titles;
}

std::vector<CriterionSummary> run_checks(const CheckOptions& opts, Report& report,
                                         std::ostream* progress) {
  using clock = std::chrono::steady_clock;
  std::vector<CriterionSummary> out;
  std::optional<Models> models;
  auto need_models = [&]() -> Models& {
    if (!models) models.emplace();
    return *models;
  };
  const std::map<int, double> limits{{1, 30.0}, {6, 300.0}, {8, 600.0}};
  for (const auto& [id, title] : criterion_titles()) {
    if (id == 10 || !wants(opts, id)) continue;
    CriterionSummary s;
    s.id = id;
    s.title = title;
    if (auto it = limits.find(id); it != limits.end()) s.time_limit = it->second;
    const std::string group = "c" + std::to_string(id);
    const auto start = clock::now();
    try {
      switch (id) {
        case 1: criterion1(report, s, opts.seed); break;
        case 2: criterion2(report, s, opts.seed); break;
        case 3: criterion3(report, s, opts.seed); break;
        case 4: criterion4(report, s, opts, need_models()); break;
        case 5: criterion5(report, s, opts, need_models()); break;
        case 6: criterion6(report, s, opts, need_models()); break;
        case 7: criterion7(report, s, opts.seed); break;
        case 8: criterion8(report, s, opts, need_models()); break;
        case 9: criterion9(report, s); break;
        default: break;
      }
    } catch (const Error& e) {
      report.fail(group, e.what());
      s.headline = std::string("aborted: ") + e.what();
    }
    s.seconds = std::chrono::duration<double>(clock::now() - start).count();
    s.pass = report.group_passed(group);
    report.time(group, s.seconds);
    if (progress) {
      *progress << "  [" << group << "] " << (s.pass ? "pass" : "FAIL") << " in " << fmt(s.seconds)
                << " s: " << s.headline << std::endl;
    }
    out.push_back(std::move(s));
  }

  if (wants(opts, 10)) {
    CriterionSummary s;
    s.id = 10;
    s.title = "determinism across thread counts";
    const auto start = clock::now();
    // Reference: everything selected except this criterion, at two worker counts.
    CheckOptions base = opts;
    base.criteria.clear();
    for (const auto& [id, _] : criterion_titles()) {
      if (id != 10 && wants(opts, id)) base.criteria.insert(id);
    }
    // Selected alone, it compares the whole suite.
    if (base.criteria.empty()) {
      for (const auto& [id, _] : criterion_titles()) {
        if (id != 10) base.criteria.insert(id);
      }
    }
    const unsigned threads = resolve_threads(opts.threads);
    const unsigned alt = threads == 1 ? 3u : 1u;
    json first;
    if (out.empty()) {
      Report r1("check");
      run_checks(base, r1);
      first = r1.to_json(false);
    } else {
      first = report.to_json(false);
    }
    CheckOptions other = base;
    other.threads = alt;
    Report r2("check");
    run_checks(other, r2);
    const json second = r2.to_json(false);
    int differing = 0;
    for (const char* key : {"records", "assertions", "failures", "warnings"}) {
      differing += first[key] != second[key] ? 1 : 0;
    }
    report.records()["criterion_10"] = {{"criteria_compared", base.criteria},
                                        {"differing_sections", differing},
                                        {"identical", differing == 0}};
    report.require("c10", "reports_identical_across_thread_counts", differing == 0);
    s.seconds = std::chrono::duration<double>(clock::now() - start).count();
    s.pass = report.group_passed("c10");
    s.headline = differing == 0 ? "rerun with a different worker count is bit-identical"
                                 : std::to_string(differing) + " report sections differ";
    report.time("c10", s.seconds);
    if (progress) {
      *progress << "  [c10] " << (s.pass ? "pass" : "FAIL") << " in " << fmt(s.seconds)
                << " s: " << s.headline << std::endl;
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace nehari::cli
