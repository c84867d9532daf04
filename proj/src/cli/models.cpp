#include "nehari/cli/models.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "nehari/error.hpp"

namespace nehari::cli {

const std::set<std::string>& problem_keys() {
  static const std::set<std::string> keys{"kind", "lambda", "eta", "alpha", "beta", "q", "r",
                                          "nonlinearity", "p", "r1", "r2", "angular_nodes"};
  return keys;
}

const std::set<std::string>& grid_keys() {
  static const std::set<std::string> keys{"dim", "n", "nx", "ny", "length", "lx", "ly"};
  return keys;
}

const std::set<std::string>& optimizer_keys() {
  static const std::set<std::string> keys{"starts", "max_iter", "tol", "seed", "smoothing"};
  return keys;
}

namespace {

std::string label(const std::pair<std::string, double>& e) {
  if (!e.first.empty()) return e.first;
  std::ostringstream os;
  os << e.second;
  return os.str();
}

}  // namespace

void require_increasing(const Config& cfg, const std::string& section,
                        const std::vector<std::pair<std::string, double>>& chain,
                        const std::string& what) {
  for (std::size_t i = 1; i < chain.size(); ++i) {
    if (chain[i - 1].second < chain[i].second) continue;
    std::ostringstream os;
    os << what << " requires ";
    for (std::size_t k = 0; k < chain.size(); ++k) os << (k ? " < " : "") << label(chain[k]);
    auto term = [&](const std::pair<std::string, double>& e) {
      if (!e.first.empty()) os << e.first << " = ";
      os << e.second;
    };
    os << ", but ";
    term(chain[i - 1]);
    os << " is not below ";
    term(chain[i]);
    // Anchor at whichever side of the broken pair is an actual key.
    const bool right_is_key = !chain[i].first.empty() && chain[i].first != "p*";
    cfg.fail(section, right_is_key ? chain[i].first : chain[i - 1].first, os.str());
  }
}

fields::GridDomain parse_grid(const Config& cfg, int dim_default) {
  const long dim = cfg.get_int("grid", "dim", dim_default);
  if (dim != 1 && dim != 2) cfg.fail("grid", "dim", "grid dim must be 1 or 2");
  auto count = [&](const char* key, long fallback) {
    const long n = cfg.get_int("grid", key, fallback);
    if (n < 3) cfg.fail("grid", key, std::string("grid ") + key + " must be at least 3");
    if (n > 4095) cfg.fail("grid", key, std::string("grid ") + key + " must be at most 4095");
    return static_cast<int>(n);
  };
  auto length = [&](const char* key, double fallback) {
    const double l = cfg.get_double("grid", key, fallback);
    if (!(l > 0.0) || !std::isfinite(l)) {
      cfg.fail("grid", key, std::string("grid ") + key + " must be positive");
    }
    return l;
  };
  if (dim == 1) {
    for (const char* k : {"nx", "ny", "lx", "ly"}) {
      if (cfg.has("grid", k)) cfg.fail("grid", k, std::string("'") + k + "' needs dim = 2");
    }
    return fields::GridDomain::line(count("n", 63), length("length", 1.0));
  }
  const int base = cfg.has("grid", "n") ? count("n", 15) : 15;
  const double lbase = cfg.has("grid", "length") ? length("length", 1.0) : 1.0;
  return fields::GridDomain::rectangle(count("nx", base), count("ny", base), length("lx", lbase),
                                       length("ly", lbase));
}

manifold::MinimizeOptions parse_optimizer(const Config& cfg, std::optional<std::uint64_t> seed,
                                          unsigned threads) {
  manifold::MinimizeOptions o;
  o.starts = static_cast<int>(cfg.get_int("optimizer", "starts", 8));
  if (o.starts < 1) cfg.fail("optimizer", "starts", "starts must be at least 1");
  o.max_iter = static_cast<int>(cfg.get_int("optimizer", "max_iter", 500));
  if (o.max_iter < 1) cfg.fail("optimizer", "max_iter", "max_iter must be at least 1");
  o.tol = cfg.get_double("optimizer", "tol", 1e-6);
  if (!(o.tol > 0.0)) cfg.fail("optimizer", "tol", "tol must be positive");
  const long s = cfg.get_int("optimizer", "seed", 0);
  if (s < 0) cfg.fail("optimizer", "seed", "seed must be nonnegative");
  o.seed = seed ? *seed : static_cast<std::uint64_t>(s);
  o.smoothing = static_cast<int>(cfg.get_int("optimizer", "smoothing", -1));
  o.threads = threads;
  return o;
}

ModelSpec parse_model(const Config& cfg, const std::string& default_kind) {
  ModelSpec m;
  m.kind = default_kind.empty() ? cfg.get_string("problem", "kind")
                                : cfg.get_string("problem", "kind", default_kind);
  const std::string sec = "problem";
  auto only = [&](const std::set<std::string>& allowed) {
    if (!cfg.has_section(sec)) return;
    for (const auto& [key, _] : cfg.entries().at(sec)) {
      if (key != "kind" && !allowed.count(key)) {
        cfg.fail(sec, key, "key '" + key + "' does not apply to kind = " + m.kind);
      }
    }
  };
  if (m.kind == "homogeneous") {
    only({"lambda", "eta", "alpha", "beta"});
    m.grid = parse_grid(cfg, 1);
    m.eta = cfg.get_double(sec, "eta", 2.0);
    m.alpha = cfg.get_double(sec, "alpha", 1.5);
    m.beta = cfg.get_double(sec, "beta", 4.0);
    require_increasing(cfg, sec, {{"", 1.0}, {"alpha", m.alpha}, {"eta", m.eta}, {"beta", m.beta}},
                       "kind = homogeneous");
  } else if (m.kind == "semilinear_cc") {
    only({"lambda", "q", "r", "nonlinearity"});
    m.grid = parse_grid(cfg, 1);
    m.q = cfg.get_double(sec, "q", 1.5);
    m.nonlinearity = cfg.get_string(sec, "nonlinearity", std::string("power"));
    if (m.nonlinearity != "power" && m.nonlinearity != "logarithmic") {
      cfg.fail(sec, "nonlinearity", "nonlinearity must be 'power' or 'logarithmic'");
    }
    if (m.nonlinearity == "logarithmic" && cfg.has(sec, "r")) {
      cfg.fail(sec, "r", "'r' applies to nonlinearity = power only");
    }
    m.r = cfg.get_double(sec, "r", 4.0);
    require_increasing(cfg, sec, {{"", 1.0}, {"q", m.q}, {"", 2.0}}, "kind = semilinear_cc");
    if (m.nonlinearity == "power") {
      const double n = m.grid.dim;
      const double p_star = n > 2.0 ? 2.0 * n / (n - 2.0) : std::numeric_limits<double>::infinity();
      require_increasing(cfg, sec, {{"", 2.0}, {"r", m.r}, {"p*", p_star}}, "kind = semilinear_cc");
    }
  } else if (m.kind == "pq_laplacian") {
    only({"lambda", "p", "q", "r1", "r2"});
    m.grid = parse_grid(cfg, 1);
    m.p = cfg.get_double(sec, "p", 3.0);
    m.q = cfg.get_double(sec, "q", 2.0);
    m.r1 = cfg.get_double(sec, "r1", 1.5);
    m.r2 = cfg.get_double(sec, "r2", 4.0);
    const double n = m.grid.dim;
    const double p_star = m.p < n ? n * m.p / (n - m.p) : std::numeric_limits<double>::infinity();
    require_increasing(cfg, sec,
                       {{"", 1.0}, {"r1", m.r1}, {"q", m.q}, {"p", m.p}, {"r2", m.r2}, {"p*", p_star}},
                       "kind = pq_laplacian");
  } else if (m.kind == "affine") {
    only({"lambda", "p", "q", "r", "angular_nodes"});
    m.grid = parse_grid(cfg, 2);
    if (m.grid.dim != 2) cfg.fail("grid", "dim", "kind = affine needs a 2-D grid");
    m.p = cfg.get_double(sec, "p", 2.0);
    m.q = cfg.get_double(sec, "q", 1.6);
    m.r = cfg.get_double(sec, "r", 4.0);
    const long nodes = cfg.get_int(sec, "angular_nodes", 64);
    if (nodes < 8 || nodes % 2 != 0 || nodes > 1 << 16) {
      cfg.fail(sec, "angular_nodes", "angular_nodes must be even and at least 8");
    }
    m.angular_nodes = static_cast<int>(nodes);
    const double p_star = m.p < 2.0 ? 2.0 * m.p / (2.0 - m.p) : std::numeric_limits<double>::infinity();
    require_increasing(cfg, sec, {{"", 1.0}, {"q", m.q}, {"p", m.p}, {"r", m.r}, {"p*", p_star}},
                       "kind = affine");
  } else {
    cfg.fail(sec, "kind",
             "unknown problem kind '" + m.kind +
                 "' (expected homogeneous, semilinear_cc, pq_laplacian or affine)");
  }
  m.lambda = cfg.get_double(sec, "lambda", 0.1);
  if (!(m.lambda > 0.0) || !std::isfinite(m.lambda)) cfg.fail(sec, "lambda", "lambda must be positive");
  return m;
}

manifold::VariationalProblem fixed_lambda_problem(const ModelSpec& spec) {
  if (spec.kind == "homogeneous") {
    return manifold::make_homogeneous_problem(
        "homogeneous", manifold::SphereGeometry(spec.grid, spec.eta), {spec.alpha, spec.eta, spec.beta},
        spec.lambda, std::make_shared<fields::GradientPowerTerm>(spec.eta),
        std::make_shared<fields::LebesguePowerTerm>(spec.alpha),
        std::make_shared<fields::LebesguePowerTerm>(spec.beta));
  }
  if (spec.kind == "affine") return affine::make_affine_problem(affine_problem(spec));
  return prescribed::fixed_lambda_problem(prescribed_problem(spec), spec.lambda);
}

prescribed::PrescribedProblem prescribed_problem(const ModelSpec& spec) {
  if (spec.kind == "semilinear_cc") {
    auto f = spec.nonlinearity == "power" ? fields::Nonlinearity::pure_power(spec.r)
                                          : fields::Nonlinearity::logarithmic();
    return prescribed::build_semilinear_cc(spec.grid, spec.q, std::move(f));
  }
  if (spec.kind == "pq_laplacian") {
    return prescribed::build_pq_laplacian(spec.grid, spec.p, spec.q, spec.r1, spec.r2);
  }
  throw ConfigError("kind = " + spec.kind + " has no prescribed-energy form");
}

affine::AffineProblem affine_problem(const ModelSpec& spec) {
  affine::AffineProblem prob;
  prob.config = affine::AffineEnergyConfig::make(spec.p, spec.angular_nodes);
  prob.q = spec.q;
  prob.r = spec.r;
  prob.lambda = spec.lambda;
  prob.grid = spec.grid;
  return prob;
}

}  // namespace nehari::cli
