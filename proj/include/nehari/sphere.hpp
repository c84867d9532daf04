#pragma once

#include <Eigen/SparseCholesky>
#include <memory>
#include <random>

#include "nehari/fields.hpp"

namespace nehari::manifold {

using fields::DiscreteField;
using fields::GridDomain;

/// The unit sphere S = { v : (int |grad v|^p)^(1/p) = 1 } of a grid,
/// equipped with the discrete H^1_0 metric <w, z> = w^T K z (K the stiffness
/// matrix) for gradients and tangent projections. For p = 2 this is the
/// round sphere of H^1_0; for p != 2 K serves as a preconditioning metric on
/// the constraint surface.
class SphereGeometry {
 public:
  SphereGeometry(GridDomain grid, double p);

  const GridDomain& grid() const { return grid_; }
  double exponent() const { return p_; }

  double norm(const DiscreteField& v) const;
  double norm(const Eigen::VectorXd& v) const;
  /// x / ||x||. Throws DomainError for x == 0.
  DiscreteField retract(const Eigen::VectorXd& x) const;

  /// Covector normal to S at v: the gradient of int |grad v|^p.
  Eigen::VectorXd normal(const DiscreteField& v) const;

  /// K^{-1} g.
  Eigen::VectorXd riesz(const Eigen::VectorXd& covector) const;
  /// Riesz representative of g restricted to the tangent space at v.
  Eigen::VectorXd tangent_gradient(const DiscreteField& v, const Eigen::VectorXd& covector) const;
  /// Metric-orthogonal projection of a vector onto the tangent space at v.
  Eigen::VectorXd project_tangent(const DiscreteField& v, const Eigen::VectorXd& w) const;

  double metric_norm(const Eigen::VectorXd& w) const;
  double dual_norm(const Eigen::VectorXd& covector) const;
  double inner(const Eigen::VectorXd& w, const Eigen::VectorXd& z) const;

  /// Symmetric Gaussian nodal noise, smoothed by `passes` averaging sweeps and
  /// normalized. passes < 0 selects (n_max + 1)^2 / 16 sweeps.
  DiscreteField random_point(std::mt19937_64& rng, int passes = -1) const;
  /// Unit (metric norm) tangent vector at v, smoothed like random_point.
  Eigen::VectorXd random_tangent(const DiscreteField& v, std::mt19937_64& rng,
                                 int passes = -1) const;

 private:
  Eigen::VectorXd smoothed_noise(std::mt19937_64& rng, int passes) const;

  GridDomain grid_;
  double p_;
  Eigen::SparseMatrix<double> stiffness_;
  std::shared_ptr<const Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>> solver_;
};

/// Deterministic per-stream generator: identical (seed, stream) pairs yield
/// identical sequences independent of scheduling.
std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream);

}  // namespace nehari::manifold
