#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <array>
#include <functional>
#include <iosfwd>
#include <string>

#include <nlohmann/json_fwd.hpp>

namespace nehari::fields {

/// Uniform tensor-product grid on [0, L_x] (x [0, L_y]) with homogeneous
/// Dirichlet boundary. Only interior nodes carry unknowns; boundary values are
/// identically zero.
struct GridDomain {
  int dim = 1;
  std::array<double, 2> lengths{1.0, 1.0};
  std::array<int, 2> n{3, 1};  ///< interior node counts; n[1] == 1 when dim == 1

  static GridDomain line(int n, double length = 1.0);
  static GridDomain rectangle(int nx, int ny, double lx = 1.0, double ly = 1.0);

  void validate() const;

  double h(int axis) const { return lengths[axis] / (n[axis] + 1); }
  int size() const { return dim == 1 ? n[0] : n[0] * n[1]; }
  /// Number of difference cells: n+1 per axis.
  int cells() const { return dim == 1 ? n[0] + 1 : (n[0] + 1) * (n[1] + 1); }
  double cell_volume() const { return dim == 1 ? h(0) : h(0) * h(1); }
  double measure() const { return dim == 1 ? lengths[0] : lengths[0] * lengths[1]; }
  /// Interior node (i, j), 1-based along each axis.
  int index(int i, int j = 1) const { return (i - 1) + n[0] * (j - 1); }
  std::array<double, 2> position(int node) const;

  bool operator==(const GridDomain&) const = default;
};

/// Nodal values on the interior nodes of a grid.
class DiscreteField {
 public:
  explicit DiscreteField(GridDomain grid);
  DiscreteField(GridDomain grid, Eigen::VectorXd values);

  /// Samples f(x, y) at the interior nodes (y = 0 in 1-D).
  static DiscreteField sample(const GridDomain& grid,
                              const std::function<double(double, double)>& f);

  const GridDomain& grid() const { return grid_; }
  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }
  int size() const { return static_cast<int>(values_.size()); }
  bool is_zero() const { return values_.isZero(0.0); }

  DiscreteField scaled(double s) const { return {grid_, s * values_}; }

 private:
  GridDomain grid_;
  Eigen::VectorXd values_;
};

/// One gradient vector per difference cell, constant on the cell.
struct GradientField {
  GridDomain grid;
  Eigen::MatrixXd components;  ///< cells x dim
};

/// Forward differences per cell, with the zero boundary extension.
GradientField gradient(const DiscreteField& u);

/// Adjoint of `gradient` weighted by the cell volume: returns the nodal
/// covector c with c . u = sum_cells vol * <w_cell, grad u_cell>.
Eigen::VectorXd gradient_adjoint(const GridDomain& grid, const Eigen::MatrixXd& cell_vectors);

/// int |grad u|^p (without the 1/p).
double dirichlet_energy_p(const DiscreteField& u, double p);

/// ||u||_s^s.
double lp_norm_pow(const DiscreteField& u, double s);

/// sum_j g(u_j) * vol. Throws NumericalError on a non-finite g value.
double composite_integral(const DiscreteField& u, const std::function<double(double)>& g);

/// Gradient of (1/p) int |grad u|^p with respect to the nodal values (the
/// discrete p-Laplacian, mass-weighted). Requires p > 1.
DiscreteField energy_gradient_p(const DiscreteField& u, double p);

/// Gradient of ||u||_s^s with respect to the nodal values.
Eigen::VectorXd lp_norm_pow_gradient(const DiscreteField& u, double s);

/// Stiffness matrix of the discrete Dirichlet form int grad u . grad v.
Eigen::SparseMatrix<double> stiffness_matrix(const GridDomain& grid);

// Serialization. CSV layout:
//   dim,nx,ny,lx,ly
//   <dim>,<nx>,<ny>,<lx>,<ly>
//   value
//   <one nodal value per line>
void write_csv(std::ostream& os, const DiscreteField& u);
DiscreteField read_csv(std::istream& is);

nlohmann::json to_json(const DiscreteField& u);
DiscreteField field_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GridDomain& g);
GridDomain grid_from_json(const nlohmann::json& j);

}  // namespace nehari::fields
