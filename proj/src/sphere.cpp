#include "nehari/sphere.hpp"

#include <cmath>

#include "nehari/error.hpp"

namespace nehari::manifold {

SphereGeometry::SphereGeometry(GridDomain grid, double p)
    : grid_(grid), p_(p), stiffness_(fields::stiffness_matrix(grid)) {
  if (!(p > 1.0)) throw DomainError("sphere exponent must exceed 1");
  auto solver = std::make_shared<Eigen::SimplicialLLT<Eigen::SparseMatrix<double>>>(stiffness_);
  if (solver->info() != Eigen::Success) {
    throw NumericalError("stiffness factorization failed");
  }
  solver_ = std::move(solver);
}

double SphereGeometry::norm(const DiscreteField& v) const {
  return std::pow(fields::dirichlet_energy_p(v, p_), 1.0 / p_);
}

double SphereGeometry::norm(const Eigen::VectorXd& v) const {
  return norm(DiscreteField(grid_, v));
}

DiscreteField SphereGeometry::retract(const Eigen::VectorXd& x) const {
  const double n = norm(x);
  if (!(n > 0.0) || !std::isfinite(n)) throw DomainError("cannot normalize the zero field");
  return {grid_, x / n};
}

Eigen::VectorXd SphereGeometry::normal(const DiscreteField& v) const {
  return p_ * fields::energy_gradient_p(v, p_).values();
}

Eigen::VectorXd SphereGeometry::riesz(const Eigen::VectorXd& covector) const {
  return solver_->solve(covector);
}

Eigen::VectorXd SphereGeometry::tangent_gradient(const DiscreteField& v,
                                                 const Eigen::VectorXd& covector) const {
  const Eigen::VectorXd n = normal(v);
  const Eigen::VectorXd rn = riesz(n);
  const Eigen::VectorXd rg = riesz(covector);
  return rg - (n.dot(rg) / n.dot(rn)) * rn;
}

Eigen::VectorXd SphereGeometry::project_tangent(const DiscreteField& v,
                                                const Eigen::VectorXd& w) const {
  const Eigen::VectorXd n = normal(v);
  const Eigen::VectorXd rn = riesz(n);
  return w - (n.dot(w) / n.dot(rn)) * rn;
}

double SphereGeometry::metric_norm(const Eigen::VectorXd& w) const {
  return std::sqrt(std::max(0.0, w.dot(stiffness_ * w)));
}

double SphereGeometry::dual_norm(const Eigen::VectorXd& covector) const {
  return std::sqrt(std::max(0.0, covector.dot(riesz(covector))));
}

double SphereGeometry::inner(const Eigen::VectorXd& w, const Eigen::VectorXd& z) const {
  return w.dot(stiffness_ * z);
}

Eigen::VectorXd SphereGeometry::smoothed_noise(std::mt19937_64& rng, int passes) const {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd w(grid_.size());
  for (auto& x : w) x = gauss(rng);
  if (passes < 0) {
    const int nmax = grid_.dim == 1 ? grid_.n[0] : std::max(grid_.n[0], grid_.n[1]);
    passes = (nmax + 1) * (nmax + 1) / 16;
  }
  const int nx = grid_.n[0];
  const int ny = grid_.dim == 1 ? 1 : grid_.n[1];
  Eigen::VectorXd next(w.size());
  for (int pass = 0; pass < passes; ++pass) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const int k = i + nx * j;
        double nb = (i > 0 ? w[k - 1] : 0.0) + (i + 1 < nx ? w[k + 1] : 0.0);
        if (grid_.dim == 1) {
          next[k] = 0.5 * w[k] + 0.25 * nb;
        } else {
          nb += (j > 0 ? w[k - nx] : 0.0) + (j + 1 < ny ? w[k + nx] : 0.0);
          next[k] = 0.5 * w[k] + 0.125 * nb;
        }
      }
    }
    w.swap(next);
  }
  return w;
}

DiscreteField SphereGeometry::random_point(std::mt19937_64& rng, int passes) const {
  return retract(smoothed_noise(rng, passes));
}

Eigen::VectorXd SphereGeometry::random_tangent(const DiscreteField& v, std::mt19937_64& rng,
                                               int passes) const {
  Eigen::VectorXd w = project_tangent(v, smoothed_noise(rng, passes));
  return w / metric_norm(w);
}

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x6e656861u};
  return std::mt19937_64(seq);
}

}  // namespace nehari::manifold
