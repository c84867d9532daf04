#include "nehari/cli/commands.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "nehari/cli/checks.hpp"
#include "nehari/cli/config.hpp"
#include "nehari/cli/models.hpp"
#include "nehari/cli/report.hpp"
#include "nehari/error.hpp"
#include "nehari/fibering.hpp"
#include "nehari/parallel.hpp"

namespace nehari::cli {

namespace fs = std::filesystem;
using manifold::Branch;
using nlohmann::json;

namespace {

using Job = std::function<void(Report&, const fs::path&)>;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double x, int digits = 6) {
  std::ostringstream os;
  os << std::setprecision(digits) << x;
  return os.str();
}

std::vector<Branch> parse_branches(const Config& cfg, const std::string& section) {
  const std::string b = cfg.get_string(section, "branches", std::string("both"));
  if (b == "both") return {Branch::Plus, Branch::Minus};
  if (b == "plus") return {Branch::Plus};
  if (b == "minus") return {Branch::Minus};
  cfg.fail(section, "branches", "branches must be plus, minus or both");
}

json level_json(const manifold::BranchLevel& l) {
  json starts = json::array();
  for (const auto& s : l.starts) {
    starts.push_back({{"index", s.index},
                      {"feasible", s.feasible},
                      {"level", s.level},
                      {"tangent_residual", s.tangent_residual},
                      {"iterations", s.iterations},
                      {"converged", s.converged},
                      {"failed_samples", s.failed_samples}});
  }
  return {{"branch", std::string(manifold::to_string(l.branch))},
          {"level", l.level},
          {"t", l.minimizer.t},
          {"minimizer_value", l.minimizer.value},
          {"tangent_residual", l.tangent_residual},
          {"gradient_dual_norm", l.minimizer.residual},
          {"radial_residual", l.minimizer.radial},
          {"curvature", l.minimizer.curvature},
          {"iterations", l.iterations},
          {"converged", l.converged},
          {"failed_samples", l.failed_samples},
          {"starts", starts}};
}

void write_field(const fs::path& path, const fields::DiscreteField& u) {
  std::ofstream os(path);
  if (!os) throw NumericalError("cannot write " + path.string());
  fields::write_csv(os, u);
}

// Builders validate again; anchor anything they reject at the problem kind.
template <class Build>
auto build_checked(const Config& cfg, Build&& build) {
  try {
    return build();
  } catch (const ConfigError& e) {
    cfg.fail("problem", "kind", e.what());
  }
}

// ---------------------------------------------------------------- fibering

Job prepare_fibering(const Config& cfg) {
  const std::string s = "fibering";
  fibering::FiberingCoefficients c{cfg.get_double(s, "e"), cfg.get_double(s, "a"), cfg.get_double(s, "b")};
  for (const char* k : {"e", "a", "b"}) {
    if (!(cfg.get_double(s, k) > 0.0)) cfg.fail(s, k, std::string("coefficient ") + k + " must be positive");
  }
  fibering::HomogeneityDegrees d{cfg.get_double(s, "alpha"), cfg.get_double(s, "eta"),
                                 cfg.get_double(s, "beta")};
  require_increasing(cfg, s, {{"alpha", d.alpha}, {"eta", d.eta}, {"beta", d.beta}}, "fibering");
  for (const char* k : {"alpha", "eta", "beta"}) {
    if (cfg.get_double(s, k) == 0.0) cfg.fail(s, k, std::string(k) + " must be nonzero");
  }
  const auto lambdas = cfg.get_doubles(s, "lambda");
  for (double l : lambdas) {
    if (!(l > 0.0) || !std::isfinite(l)) cfg.fail(s, "lambda", "every lambda must be positive");
  }
  const long points = cfg.get_int(s, "points", 2001);
  if (points < 21 || points > 1000000) cfg.fail(s, "points", "points must lie in [21, 1000000]");
  std::optional<double> t_max;
  if (cfg.has(s, "t_max")) {
    t_max = cfg.get_double(s, "t_max");
    if (!(*t_max > 0.0)) cfg.fail(s, "t_max", "t_max must be positive");
  }

  return [=](Report& rep, const fs::path& dir) {
    const auto th = fibering::lambda_threshold(c, d);
    rep.records()["threshold"] = {{"lambda_u", th.lambda_u}, {"t0", th.t0}, {"c_const", th.c_const}};
    json runs = json::array();
    for (std::size_t k = 0; k < lambdas.size(); ++k) {
      const double lambda = lambdas[k];
      const std::string tag = "lambda[" + std::to_string(k) + "]";
      const auto roots = fibering::fibering_roots(c, d, lambda);
      json run{{"lambda", lambda}, {"kind", std::string(fibering::to_string(roots.kind))}};
      if (roots.kind == fibering::RootKind::TwoRoots) {
        run["t_plus"] = roots.t_plus;
        run["t_minus"] = roots.t_minus;
        run["phi_plus"] = fibering::phi_value(c, d, lambda, roots.t_plus);
        run["phi_minus"] = fibering::phi_value(c, d, lambda, roots.t_minus);
        for (auto [name, t] : {std::pair{"plus", roots.t_plus}, std::pair{"minus", roots.t_minus}}) {
          const double res = std::abs(fibering::phi_prime(c, d, lambda, t)) /
                             fibering::phi_prime_scale(c, d, lambda, t);
          rep.check(tag, std::string("root_residual_") + name, res, "<=", 1e-9);
        }
        rep.require(tag, "plus_is_local_min",
                    fibering::classify_stationary(c, d, lambda, roots.t_plus) ==
                        fibering::Stationarity::LocalMin);
        rep.require(tag, "minus_is_local_max",
                    fibering::classify_stationary(c, d, lambda, roots.t_minus) ==
                        fibering::Stationarity::LocalMax);
        const auto bounds = fibering::root_bounds(c, d, lambda);
        run["bounds"] = {{"t_plus_upper", bounds.t_plus_upper},
                         {"t_minus_lower", bounds.t_minus_lower},
                         {"literal_t_plus_upper", bounds.literal_t_plus_upper},
                         {"literal_t_minus_lower", bounds.literal_t_minus_lower},
                         {"minus_energy_ratio", bounds.minus_energy_ratio},
                         {"minus_energy_ratio_reference", (d.beta - d.eta) / (d.eta - d.alpha)}};
        rep.check(tag, "t_plus_below_bound", roots.t_plus, "<", bounds.t_plus_upper);
        rep.check(tag, "t_minus_above_bound", roots.t_minus, ">=", bounds.t_minus_lower);
      } else if (roots.kind == fibering::RootKind::Degenerate) {
        run["t0"] = roots.t_plus;
      }

      // Series on (0, t_max].
      const double hi = t_max ? *t_max
                        : roots.kind == fibering::RootKind::TwoRoots ? 1.5 * roots.t_minus
                                                                     : 2.0 * th.t0;
      const auto n = static_cast<std::size_t>(points);
      const double h = hi / static_cast<double>(n);
      std::vector<std::vector<double>> rows(n);
      std::vector<double> ts(n), vs(n), ds(n);
      for (std::size_t i = 0; i < n; ++i) {
        ts[i] = h * static_cast<double>(i + 1);
        vs[i] = fibering::phi_value(c, d, lambda, ts[i]);
        ds[i] = fibering::phi_prime(c, d, lambda, ts[i]);
        rows[i] = {ts[i], vs[i], ds[i]};
      }
      const std::string file = "series_" + std::to_string(k) + ".csv";
      write_series(dir / file, {"t", "value", "derivative"}, rows);
      run["series"] = {{"file", file}, {"points", n}, {"t_max", hi}};

      std::vector<double> minima, maxima;
      for (std::size_t i = 1; i + 1 < n; ++i) {
        if (vs[i] < vs[i - 1] && vs[i] <= vs[i + 1]) minima.push_back(ts[i]);
        if (vs[i] > vs[i - 1] && vs[i] >= vs[i + 1]) maxima.push_back(ts[i]);
      }
      run["series"]["local_minima"] = minima;
      run["series"]["local_maxima"] = maxima;
      if (roots.kind == fibering::RootKind::TwoRoots && roots.t_minus < hi - h) {
        auto nearest = [](const std::vector<double>& xs, double t) {
          double best = std::numeric_limits<double>::infinity();
          for (double x : xs) best = std::min(best, std::abs(x - t));
          return best;
        };
        rep.check(tag, "series_min_near_t_plus", nearest(minima, roots.t_plus), "<=", h);
        rep.check(tag, "series_max_near_t_minus", nearest(maxima, roots.t_minus), "<=", h);
      }
      bool tail_decreasing = true;
      for (std::size_t i = n - n / 10; i < n; ++i) tail_decreasing &= vs[i] < vs[i - 1];
      rep.require(tag, "series_tail_decreasing", tail_decreasing, "last 10% of the t range");

      // Centered differences at spacing h and 2h against the derivative column.
      double err_h = 0.0, err_2h = 0.0, dmax = 0.0;
      for (std::size_t i = 2; i + 2 < n; ++i) {
        err_h = std::max(err_h, std::abs((vs[i + 1] - vs[i - 1]) / (2.0 * h) - ds[i]));
        err_2h = std::max(err_2h, std::abs((vs[i + 2] - vs[i - 2]) / (4.0 * h) - ds[i]));
        dmax = std::max(dmax, std::abs(ds[i]));
      }
      const double order = std::log2(err_2h / err_h);
      run["series"]["fd_max_error"] = err_h;
      run["series"]["fd_relative_error"] = err_h / dmax;
      run["series"]["fd_observed_order"] = order;
      rep.check(tag, "series_derivative_fd_order", order, ">=", 1.8, "second-order consistency");
      runs.push_back(run);
    }
    rep.records()["runs"] = runs;
  };
}

// ---------------------------------------------------------------- solve

Job prepare_solve(const Config& cfg, const RunOptions& ro) {
  const ModelSpec spec = parse_model(cfg);
  const auto opts = parse_optimizer(cfg, ro.seed, ro.threads);
  const auto branches = parse_branches(cfg, "solve");
  const long ray_samples = cfg.get_int("solve", "ray_samples", 20);
  if (ray_samples < 0) cfg.fail("solve", "ray_samples", "ray_samples must be nonnegative");
  const long condition_samples = cfg.get_int("solve", "condition_samples", 0);
  if (condition_samples < 0) cfg.fail("solve", "condition_samples", "condition_samples must be nonnegative");
  const bool continuity = cfg.get_bool("solve", "continuity", false);
  const auto prob = build_checked(cfg, [&] { return fixed_lambda_problem(spec); });

  return [=](Report& rep, const fs::path& dir) {
    rep.records()["problem"] = {{"name", prob.name}, {"unknowns", prob.sphere.grid().size()}};
    std::map<Branch, manifold::BranchLevel> levels;
    for (Branch b : branches) {
      const std::string name(manifold::to_string(b));
      const std::string group = "branch_" + name;
      manifold::BranchLevel l;
      try {
        l = manifold::minimize_branch(prob, b, opts);
      } catch (const InfeasibleBranch& e) {
        rep.fail(group, e.what());
        continue;
      }
      rep.records()["levels"][name] = level_json(l);
      write_field(dir / ("minimizer_" + name + ".csv"), l.minimizer.direction.scaled(l.minimizer.t));
      rep.check(group, "tangent_residual", l.tangent_residual, "<=", opts.tol);
      const auto jet = prob.ray_profile(l.minimizer.direction, l.minimizer.t);
      rep.check(group, "nehari_ray_residual", std::abs(jet.d1) / jet.d1_scale, "<=", prob.scan.root_tol,
                "|d/dt Phi(tv)| relative to the derivative scale");
      if (b == Branch::Plus) {
        rep.check(group, "curvature_local_min", l.minimizer.curvature, ">", 0.0);
        rep.check(group, "level_negative", l.level, "<", 0.0);
      } else {
        rep.check(group, "curvature_local_max", l.minimizer.curvature, "<", 0.0);
      }
      if (prob.even) {
        const double neg = manifold::reduced_value(prob, l.minimizer.direction.scaled(-1.0), b);
        rep.check(group, "evenness", std::abs(neg - l.level), "<=",
                  1e-12 * std::max(1.0, std::abs(l.level)));
      }
      levels.emplace(b, std::move(l));
    }
    if (levels.size() == 2) {
      const double gap = levels.at(Branch::Minus).level - levels.at(Branch::Plus).level;
      rep.records()["level_gap"] = gap;
      rep.check("ordering", "level_gap", gap, ">", 10.0 * opts.tol, "lambda_1^- - lambda_1^+");
    }

    if (ray_samples > 0) {
      auto rng = manifold::stream_rng(opts.seed, 9001);
      int both = 0, ordered = 0;
      for (long i = 0; i < ray_samples; ++i) {
        const auto v = prob.sphere.random_point(rng, opts.smoothing);
        try {
          const auto roots = manifold::ray_roots(prob, v);
          if (!roots.t_plus || !roots.t_minus) continue;
          ++both;
          const double vp = manifold::reduced_value(prob, v, Branch::Plus);
          const double vm = manifold::reduced_value(prob, v, Branch::Minus);
          ordered += (*roots.t_plus < *roots.t_minus && vp < vm) ? 1 : 0;
        } catch (const DegenerateRay&) {
        }
      }
      rep.records()["rays"] = {{"samples", ray_samples}, {"two_roots", both}, {"ordered", ordered}};
      rep.check("rays", "ordered_fraction", both ? static_cast<double>(ordered) / both : 1.0, ">=", 1.0,
                "t+ < t- and Psi+ < Psi- on sampled rays");
    }

    if (condition_samples > 0 && prob.hint) {
      const auto cr = manifold::condition_ratios(prob, static_cast<int>(condition_samples), opts.seed);
      rep.records()["condition_constants"] = {{"samples", cr.samples},
                                              {"c_b_by_e", cr.c_b_by_e()},
                                              {"c_e_by_norm", cr.c_e_by_norm()},
                                              {"c_a_by_e", cr.c_a_by_e()},
                                              {"c_a_by_b", cr.c_a_by_b()}};
    } else if (condition_samples > 0) {
      rep.warn("condition_samples ignored: the model has no closed-form fibering");
    }

    if (continuity && !levels.empty()) {
      json rec = json::array();
      for (const auto& [b, l] : levels) {
        std::vector<double> moduli;
        for (double radius : {1e-2, 1e-3, 1e-4}) {
          const auto c = manifold::continuity_probe(prob, l.minimizer.direction, b, radius, 8, opts.seed);
          moduli.push_back(c.modulus);
          rec.push_back({{"branch", std::string(manifold::to_string(b))}, {"radius", radius},
                         {"modulus", c.modulus}, {"t_base", c.t_base}});
        }
        const bool shrinking = moduli[1] <= 2.0 * moduli[0] && moduli[2] <= 2.0 * moduli[1] &&
                               moduli[2] < moduli[0];
        rep.require("continuity", std::string("modulus_shrinks_") + std::string(manifold::to_string(b)),
                    shrinking, "radii 1e-2, 1e-3, 1e-4 within noise factor 2");
      }
      rep.records()["continuity"] = rec;
    }
  };
}

// ---------------------------------------------------------------- prescribed

Job prepare_prescribed(const Config& cfg, const RunOptions& ro) {
  const ModelSpec spec = parse_model(cfg);
  if (!spec.has_prescribed_form()) {
    cfg.fail("problem", "kind", "the prescribed command needs kind = semilinear_cc or pq_laplacian");
  }
  if (cfg.has("problem", "lambda")) {
    cfg.fail("problem", "lambda", "lambda is an output of the prescribed command, not an input");
  }
  const auto opts = parse_optimizer(cfg, ro.seed, ro.threads);
  const std::string s = "prescribed";
  if (cfg.has(s, "rho") && cfg.has(s, "c")) cfg.fail(s, "c", "give either rho or c, not both");
  std::vector<double> rhos, cs;
  if (cfg.has(s, "c")) {
    cs = cfg.get_doubles(s, "c");
    for (double c : cs) {
      if (!(c < 0.0)) cfg.fail(s, "c", "every energy level c must be negative");
    }
  } else {
    rhos = cfg.get_doubles(s, "rho", std::vector<double>{0.5});
    for (double r : rhos) {
      if (!(r > 0.0) || !std::isfinite(r)) cfg.fail(s, "rho", "every rho must be positive");
    }
  }
  const auto branches = parse_branches(cfg, s);
  const long samples = cfg.get_int(s, "samples", 200);
  if (samples < 0) cfg.fail(s, "samples", "samples must be nonnegative");
  const long shrink = cfg.get_int(s, "shrink", 0);
  if (shrink < 0 || shrink > 30) cfg.fail(s, "shrink", "shrink must lie in [0, 30]");
  const auto prob = build_checked(cfg, [&] { return prescribed_problem(spec); });

  return [=](Report& rep, const fs::path& dir) {
    for (const auto& w : prob.warnings) rep.warn(w);
    const auto g = prescribed::h_ground_level(prob, opts);
    rep.records()["h0"] = {{"value", g.h0}, {"identically_zero", g.identically_zero}, {"s", g.s},
                           {"alpha", prob.alpha}};
    if (g.level) rep.records()["h0"]["optimizer"] = level_json(*g.level);
    rep.check("h0", "h0_positive", g.h0, ">", 0.0);
    if (!(g.h0 > 0.0)) return;

    std::vector<std::pair<double, double>> levels;  // (c, rho)
    for (double r : rhos) levels.emplace_back(-r * g.h0 / prob.alpha, r);
    for (double c : cs) levels.emplace_back(c, -prob.alpha * c / g.h0);

    std::vector<std::vector<double>> rows;
    json runs = json::array();
    for (std::size_t k = 0; k < levels.size(); ++k) {
      const auto [c, rho] = levels[k];
      const std::string tag = "c[" + std::to_string(k) + "]";
      json run{{"c", c}, {"rho", rho}};
      std::vector<double> row{c, rho, g.h0};
      if (!(rho < 1.0)) {
        bool rejected = false;
        try {
          prescribed::PrescribedOptions po;
          po.minimize = opts;
          po.h0 = g.h0;
          prescribed::solve_prescribed(prob, c, Branch::Plus, po);
        } catch (const OutOfRangeLevel&) {
          rejected = true;
        } catch (const DegenerateRay&) {
          rejected = true;
        }
        const bool rootless = !prescribed::roots_of_H(prob, g.direction, c).t_c_plus;
        run["status"] = "out_of_range";
        run["h0_direction_rootless"] = rootless;
        rep.require(tag, "out_of_range_rejected", rejected, "-alpha c >= h0");
        rep.require(tag, "h0_direction_rootless", rootless || rho == 1.0);
        row.resize(14, kNaN);
        rows.push_back(row);
        runs.push_back(run);
        continue;
      }
      prescribed::PrescribedOptions po;
      po.minimize = opts;
      po.h0 = g.h0;
      std::map<Branch, double> lam;
      std::map<Branch, std::pair<double, double>> res;
      for (Branch b : branches) {
        const std::string name(manifold::to_string(b));
        try {
          const auto r = prescribed::solve_prescribed(prob, c, b, po);
          const auto& sol = r.solution;
          run[name] = {{"lambda_star", sol.lambda_star},
                       {"phi_residual", sol.phi_residual},
                       {"energy_error", sol.energy_error},
                       {"certified", sol.certified},
                       {"polish_iterations", r.polish_iterations},
                       {"optimizer", level_json(r.level)}};
          write_field(dir / ("solution_" + std::to_string(k) + "_" + name + ".csv"), sol.u_star);
          rep.check(tag, "phi_residual_" + name, sol.phi_residual, "<=", 1e-6);
          rep.check(tag, "energy_error_" + name, sol.energy_error, "<=", 1e-6);
          lam[b] = sol.lambda_star;
          res[b] = {sol.phi_residual, sol.energy_error};
        } catch (const InfeasibleBranch& e) {
          rep.fail(tag, e.what());
        }
      }
      if (lam.size() == 2) {
        rep.check(tag, "level_ordering", lam[Branch::Minus] - lam[Branch::Plus], ">", 0.0,
                  "lambda_1c^- - lambda_1c^+");
      }
      for (Branch b : {Branch::Plus, Branch::Minus}) row.push_back(lam.count(b) ? lam[b] : kNaN);
      for (Branch b : {Branch::Plus, Branch::Minus}) {
        row.push_back(res.count(b) ? res[b].first : kNaN);
        row.push_back(res.count(b) ? res[b].second : kNaN);
      }
      if (samples > 0) {
        const auto gap = prescribed::gap_diagnostics(prob, c, static_cast<int>(samples), opts.seed, opts.threads);
        run["gaps"] = {{"samples", gap.samples},
                       {"rootless", gap.rootless},
                       {"min_s_gap", gap.min_s_gap},
                       {"min_lambda_gap", gap.min_lambda_gap},
                       {"epsilon", gap.epsilon},
                       {"derivative_floor", gap.derivative_floor},
                       {"sup_nplus_norm", gap.sup_nplus_norm},
                       {"nminus_mass_min", gap.nminus_mass_min}};
        rep.check(tag, "rootless_samples", gap.rootless, "<=", 0.0);
        rep.check(tag, "min_s_gap", gap.min_s_gap, ">", 0.0);
        rep.check(tag, "min_lambda_gap", gap.min_lambda_gap, ">", 0.0);
        rep.check(tag, "derivative_floor", gap.derivative_floor, ">", 0.0);
        for (double x : {gap.min_s_gap, gap.min_lambda_gap, gap.derivative_floor, gap.sup_nplus_norm,
                         gap.nminus_mass_min}) {
          row.push_back(x);
        }
      } else {
        row.resize(14, kNaN);
      }
      rows.push_back(row);
      runs.push_back(run);
    }
    rep.records()["levels"] = runs;
    write_series(dir / "sweep.csv",
                 {"c", "rho", "h0", "lambda_plus", "lambda_minus", "phi_residual_plus",
                  "energy_error_plus", "phi_residual_minus", "energy_error_minus", "min_s_gap",
                  "min_lambda_gap", "derivative_floor", "sup_nplus_norm", "nminus_mass_min"},
                 rows);

    if (shrink > 0) {
      const int n = samples > 0 ? static_cast<int>(samples) : 200;
      std::vector<std::vector<double>> srows;
      double prev = std::numeric_limits<double>::infinity();
      double worst = std::numeric_limits<double>::infinity();
      for (long k = 1; k <= shrink; ++k) {
        const double ck = -g.h0 * std::ldexp(1.0, -static_cast<int>(k)) / prob.alpha;
        const auto gk = prescribed::gap_diagnostics(prob, ck, n, opts.seed, opts.threads);
        srows.push_back({static_cast<double>(k), ck, gk.sup_nplus_norm});
        if (k > 1) worst = std::min(worst, prev - gk.sup_nplus_norm);
        prev = gk.sup_nplus_norm;
      }
      write_series(dir / "shrink.csv", {"k", "c", "sup_nplus_norm"}, srows);
      rep.records()["shrink"] = srows;
      if (shrink > 1) {
        rep.check("shrink", "sup_nplus_strict_decrease", worst, ">", 0.0,
                  "min over k of sup_k - sup_{k+1}");
      }
    }
  };
}

// ---------------------------------------------------------------- affine

Job prepare_affine(const Config& cfg, const RunOptions& ro) {
  const ModelSpec spec = parse_model(cfg, "affine");
  if (spec.kind != "affine") cfg.fail("problem", "kind", "the affine command needs kind = affine");
  auto opts = parse_optimizer(cfg, ro.seed, ro.threads);
  const std::string s = "affine";
  affine::SweepOptions sweep;
  sweep.minimize = opts;
  sweep.estimate_samples = static_cast<int>(cfg.get_int(s, "estimate_samples", 100));
  if (sweep.estimate_samples < 1) cfg.fail(s, "estimate_samples", "estimate_samples must be at least 1");
  sweep.lambda_min_frac = cfg.get_double(s, "lambda_min_frac", 0.01);
  sweep.lambda_max_frac = cfg.get_double(s, "lambda_max_frac", 0.99);
  if (!(sweep.lambda_min_frac > 0.0)) cfg.fail(s, "lambda_min_frac", "lambda_min_frac must be positive");
  if (!(sweep.lambda_max_frac < 1.0)) cfg.fail(s, "lambda_max_frac", "lambda_max_frac must be below 1");
  if (!(sweep.lambda_max_frac >= 10.0 * sweep.lambda_min_frac)) {
    cfg.fail(s, "lambda_max_frac", "the sweep must span at least one decade");
  }
  sweep.points = static_cast<int>(cfg.get_int(s, "points", 11));
  if (sweep.points < 3) cfg.fail(s, "points", "points must be at least 3");
  sweep.bisection_tol = cfg.get_double(s, "bisection_tol", 1e-3);
  if (!(sweep.bisection_tol > 0.0)) cfg.fail(s, "bisection_tol", "bisection_tol must be positive");
  const auto prob = build_checked(cfg, [&] {
    auto p = affine_problem(spec);
    p.validate();
    return p;
  });

  return [=](Report& rep, const fs::path& dir) {
    const auto r = affine::sweep_checks(prob, sweep);
    std::vector<std::vector<double>> rows;
    json jrows = json::array();
    for (const auto& row : r.rows) {
      rows.push_back({row.lambda, r.lambda_estimate, row.phi_u, row.phi_v, row.norm_u, row.norm_v,
                      row.residual_u, row.residual_v, row.feasible ? 1.0 : 0.0,
                      row.converged_u ? 1.0 : 0.0, row.converged_v ? 1.0 : 0.0});
      jrows.push_back({{"lambda", row.lambda}, {"feasible", row.feasible}, {"note", row.note},
                       {"phi_u", row.phi_u}, {"phi_v", row.phi_v}, {"norm_u", row.norm_u},
                       {"norm_v", row.norm_v}, {"residual_u", row.residual_u},
                       {"residual_v", row.residual_v}, {"converged_u", row.converged_u},
                       {"converged_v", row.converged_v}, {"u_sign_definite", row.u_sign_definite}});
      if (!row.feasible) rep.warn("lambda = " + fmt(row.lambda) + " flagged: " + row.note);
    }
    write_series(dir / "sweep.csv",
                 {"lambda", "lambda_estimate", "phi_u", "phi_v", "norm_u", "norm_v", "residual_u",
                  "residual_v", "feasible", "converged_u", "converged_v"},
                 rows);
    const double bar_rel = r.bracketed ? (r.bar_hi - r.bar_lo) / r.lambda_bar : 1.0;
    rep.records()["sweep"] = {{"lambda_estimate", r.lambda_estimate},
                              {"rows", jrows},
                              {"sign_pattern", r.sign_pattern},
                              {"ordering", r.ordering},
                              {"bracketed", r.bracketed},
                              {"bar_lo", r.bar_lo},
                              {"bar_hi", r.bar_hi},
                              {"lambda_bar", r.lambda_bar},
                              {"bisection_steps", r.bisection_steps},
                              {"bisection_uncertain", r.bisection_uncertain},
                              {"slope_applicable", r.slope_applicable},
                              {"slope", r.slope},
                              {"slope_target", r.slope_target},
                              {"slope_window", {r.slope_lo, r.slope_hi}},
                              {"slope_points", r.slope_points}};
    rep.require("sweep", "sign_pattern_at_smallest_lambda", r.sign_pattern, "Phi(u) < 0 < Phi(v)");
    rep.require("sweep", "level_ordering_all_feasible", r.ordering);
    rep.require("sweep", "phi_v_sign_change_bracketed", r.bracketed);
    rep.check("sweep", "lambda_bar_relative_bracket", bar_rel, "<=", sweep.bisection_tol);
    rep.require("sweep", "lambda_bar_bisection_converged_sides", r.bracketed && !r.bisection_uncertain);
    if (r.slope_applicable) {
      rep.check("sweep", "norm_slope", r.slope, ">=", 0.8 * r.slope_target,
                "fitted d log||u|| / d log lambda vs 0.8 p/(p-q)");
    }
  };
}

// ---------------------------------------------------------------- check

Job prepare_check(const Config& cfg, const RunOptions& ro, std::ostream& out) {
  CheckOptions co;
  const long seed = cfg.get_int("check", "seed", 0);
  if (seed < 0) cfg.fail("check", "seed", "seed must be nonnegative");
  co.seed = ro.seed ? *ro.seed : static_cast<std::uint64_t>(seed);
  co.threads = ro.threads;
  co.starts = static_cast<int>(cfg.get_int("check", "starts", 4));
  if (co.starts < 1) cfg.fail("check", "starts", "starts must be at least 1");
  if (cfg.has("check", "criteria")) {
    for (double x : cfg.get_doubles("check", "criteria")) {
      if (x != std::floor(x) || x < 1 || x > 10) {
        cfg.fail("check", "criteria", "criteria must be integers in 1..10");
      }
      co.criteria.insert(static_cast<int>(x));
    }
  }
  std::ostream* progress = &out;
  return [co, progress](Report& rep, const fs::path&) {
    const auto summaries = run_checks(co, rep, progress);
    json list = json::array();
    for (const auto& s : summaries) {
      list.push_back({{"id", s.id}, {"title", s.title}, {"pass", s.pass}});
      if (!s.within_time()) {
        rep.fail("c" + std::to_string(s.id), "runtime " + fmt(s.seconds, 3) + " s exceeds the " +
                                                 fmt(s.time_limit, 3) + " s budget");
      }
    }
    rep.records()["criteria"] = list;
  };
}

std::map<std::string, std::set<std::string>> allowed_keys(const std::string& command) {
  std::map<std::string, std::set<std::string>> a{{"output", {"dir"}}};
  if (command == "fibering") {
    a["fibering"] = {"e", "a", "b", "alpha", "eta", "beta", "lambda", "t_max", "points"};
  } else if (command == "check") {
    a["check"] = {"seed", "criteria", "starts"};
  } else {
    a["problem"] = problem_keys();
    a["grid"] = grid_keys();
    a["optimizer"] = optimizer_keys();
    if (command == "solve") a["solve"] = {"branches", "ray_samples", "condition_samples", "continuity"};
    if (command == "prescribed") a["prescribed"] = {"rho", "c", "branches", "samples", "shrink"};
    if (command == "affine") {
      a["affine"] = {"estimate_samples", "lambda_min_frac", "lambda_max_frac", "points", "bisection_tol"};
    }
  }
  return a;
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"fibering", "solve", "prescribed", "affine", "check"};
  return names;
}

int run(const std::string& command, const RunOptions& opts, std::ostream& out, std::ostream& err) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  Config cfg;
  Job job;
  fs::path dir;
  std::uint64_t seed = 0;
  try {
    if (opts.config) {
      cfg = Config::load(*opts.config);
    } else if (command != "check") {
      throw ConfigError("--config is required for '" + command + "'");
    }
    cfg.require_known(allowed_keys(command));
    if (command == "fibering") {
      job = prepare_fibering(cfg);
    } else if (command == "solve") {
      job = prepare_solve(cfg, opts);
    } else if (command == "prescribed") {
      job = prepare_prescribed(cfg, opts);
    } else if (command == "affine") {
      job = prepare_affine(cfg, opts);
    } else if (command == "check") {
      job = prepare_check(cfg, opts, out);
    } else {
      throw ConfigError("unknown subcommand '" + command + "'");
    }
    const std::string section = command == "check" ? "check" : "optimizer";
    const long s = cfg.get_int(section, "seed", 0);
    seed = opts.seed ? *opts.seed : static_cast<std::uint64_t>(s);
    dir = opts.out ? fs::path(*opts.out) : fs::path(cfg.get_string("output", "dir", "results/" + command));
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }

  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    err << "error: cannot create output directory " << dir << ": " << ec.message() << '\n';
    return kConfigError;
  }

  Report rep(command);
  rep.echo_config(cfg);
  rep.set_seed(seed);
  out << command << ": writing to " << dir.string() << std::endl;
  try {
    job(rep, dir);
  } catch (const ConfigError& e) {
    // Semantic checks that only the builders perform.
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const Error& e) {
    rep.fail("run", e.what());
  } catch (const std::exception& e) {
    rep.fail("run", std::string("unexpected failure: ") + e.what());
  }
  const double total = std::chrono::duration<double>(clock::now() - start).count();

  write_json(dir / "report.json", rep.to_json(opts.strict));
  json timing{{"command", command},
              {"threads", resolve_threads(opts.threads)},
              {"total_seconds", total},
              {"sections", rep.timings()}};
  write_json(dir / "timing.json", timing);

  int failed = 0;
  for (const auto& a : rep.assertions()) {
    if (a.pass) continue;
    ++failed;
    err << "FAIL [" << a.group << "] " << a.name << ": measured " << fmt(a.measured) << ' '
        << a.relation << ' ' << fmt(a.threshold);
    if (!a.detail.empty()) err << " (" << a.detail << ')';
    err << '\n';
  }
  const auto doc = rep.to_json(opts.strict);
  for (const auto& f : doc["failures"]) {
    err << "FAIL [" << f["group"].get<std::string>() << "] " << f["message"].get<std::string>() << '\n';
  }
  for (const auto& w : rep.warnings()) err << (opts.strict ? "FAIL (strict) " : "warning: ") << w << '\n';
  const bool ok = rep.passed(opts.strict);
  out << command << ": " << rep.assertions().size() - failed << "/" << rep.assertions().size()
      << " assertions passed, " << rep.warnings().size() << " warning(s), " << fmt(total, 3) << " s -> "
      << (ok ? "PASS" : "FAIL") << std::endl;
  return ok ? kOk : kNumericalFailure;
}

}  // namespace nehari::cli
