#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "nehari/affine.hpp"
#include "nehari/cli/config.hpp"
#include "nehari/manifold.hpp"
#include "nehari/prescribed.hpp"

namespace nehari::cli {

/// A validated [problem] + [grid] description.
struct ModelSpec {
  std::string kind;  // homogeneous | semilinear_cc | pq_laplacian | affine
  fields::GridDomain grid;
  double lambda = 0.1;
  // homogeneous: E = int |grad u|^eta, A = ||u||_alpha^alpha, B = ||u||_beta^beta
  double eta = 2.0, alpha = 1.5, beta = 4.0;
  // semilinear_cc
  double q = 1.5, r = 4.0;
  std::string nonlinearity = "power";
  // pq_laplacian
  double p = 3.0, r1 = 1.5, r2 = 4.0;
  // affine (p, q, r above)
  int angular_nodes = 64;

  bool has_prescribed_form() const { return kind == "semilinear_cc" || kind == "pq_laplacian"; }
};

/// Keys accepted in [problem] and [grid].
const std::set<std::string>& problem_keys();
const std::set<std::string>& grid_keys();
const std::set<std::string>& optimizer_keys();

/// Reads and validates the model; `default_kind` applies when [problem] kind
/// is absent. Throws ConfigError anchored at the offending line.
ModelSpec parse_model(const Config& cfg, const std::string& default_kind = {});

/// Reads [grid]; `dim_default` applies when no dim key is given.
fields::GridDomain parse_grid(const Config& cfg, int dim_default);

manifold::MinimizeOptions parse_optimizer(const Config& cfg, std::optional<std::uint64_t> seed,
                                          unsigned threads);

/// Phi_lambda as a sphere problem.
manifold::VariationalProblem fixed_lambda_problem(const ModelSpec& spec);
/// The I1 - lambda I2 decomposition (semilinear_cc, pq_laplacian only).
prescribed::PrescribedProblem prescribed_problem(const ModelSpec& spec);
affine::AffineProblem affine_problem(const ModelSpec& spec);

/// Fails at the first adjacent pair of `chain` (keys in `section`) that is not
/// strictly increasing.
void require_increasing(const Config& cfg, const std::string& section,
                        const std::vector<std::pair<std::string, double>>& chain,
                        const std::string& what);

}  // namespace nehari::cli
