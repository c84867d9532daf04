#include "nehari/fields.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nehari/error.hpp"

namespace nehari::fields {

namespace {

// |x|^p for p >= 1, with the cheap path for p == 2.
double abs_pow(double x, double p) {
  if (p == 2.0) return x * x;
  const double a = std::abs(x);
  return a == 0.0 ? 0.0 : std::exp(p * std::log(a));
}

// (x^2 + y^2)^(p/2).
double norm_pow(double sq, double p) {
  if (p == 2.0) return sq;
  return sq == 0.0 ? 0.0 : std::exp(0.5 * p * std::log(sq));
}

// Nodal value with the zero Dirichlet extension, 0-based along each axis
// including the boundary nodes 0 and n+1.
double at(const GridDomain& g, const Eigen::VectorXd& v, int i, int j) {
  if (i <= 0 || i > g.n[0]) return 0.0;
  if (g.dim == 1) return v[i - 1];
  if (j <= 0 || j > g.n[1]) return 0.0;
  return v[g.index(i, j)];
}

void add_at(const GridDomain& g, Eigen::VectorXd& v, int i, int j, double x) {
  if (i <= 0 || i > g.n[0]) return;
  if (g.dim == 1) {
    v[i - 1] += x;
    return;
  }
  if (j <= 0 || j > g.n[1]) return;
  v[g.index(i, j)] += x;
}

}  // namespace

GridDomain GridDomain::line(int n, double length) {
  GridDomain g;
  g.dim = 1;
  g.lengths = {length, 1.0};
  g.n = {n, 1};
  g.validate();
  return g;
}

GridDomain GridDomain::rectangle(int nx, int ny, double lx, double ly) {
  GridDomain g;
  g.dim = 2;
  g.lengths = {lx, ly};
  g.n = {nx, ny};
  g.validate();
  return g;
}

void GridDomain::validate() const {
  if (dim != 1 && dim != 2) throw DomainError("grid dimension must be 1 or 2");
  for (int a = 0; a < dim; ++a) {
    if (n[a] < 3) throw DomainError("grid needs at least 3 interior nodes per axis");
    if (!(lengths[a] > 0.0) || !std::isfinite(lengths[a])) {
      throw DomainError("grid lengths must be positive");
    }
  }
  if (dim == 1 && n[1] != 1) throw DomainError("1-D grid must have n[1] == 1");
}

std::array<double, 2> GridDomain::position(int node) const {
  if (dim == 1) return {(node + 1) * h(0), 0.0};
  const int i = node % n[0];
  const int j = node / n[0];
  return {(i + 1) * h(0), (j + 1) * h(1)};
}

DiscreteField::DiscreteField(GridDomain grid)
    : grid_(grid), values_(Eigen::VectorXd::Zero(grid.size())) {
  grid_.validate();
}

DiscreteField::DiscreteField(GridDomain grid, Eigen::VectorXd values)
    : grid_(grid), values_(std::move(values)) {
  grid_.validate();
  if (values_.size() != grid_.size()) {
    std::ostringstream os;
    os << "field has " << values_.size() << " values, grid expects " << grid_.size();
    throw DomainError(os.str());
  }
  if (!values_.allFinite()) throw NumericalError("field values must be finite");
}

DiscreteField DiscreteField::sample(const GridDomain& grid,
                                    const std::function<double(double, double)>& f) {
  Eigen::VectorXd v(grid.size());
  for (int k = 0; k < grid.size(); ++k) {
    const auto x = grid.position(k);
    v[k] = f(x[0], x[1]);
  }
  return {grid, std::move(v)};
}

GradientField gradient(const DiscreteField& u) {
  const GridDomain& g = u.grid();
  const auto& v = u.values();
  GradientField out{g, Eigen::MatrixXd(g.cells(), g.dim)};
  if (g.dim == 1) {
    const double h = g.h(0);
    for (int i = 0; i <= g.n[0]; ++i) {
      out.components(i, 0) = (at(g, v, i + 1, 1) - at(g, v, i, 1)) / h;
    }
    return out;
  }
  const double hx = g.h(0);
  const double hy = g.h(1);
  int c = 0;
  for (int j = 0; j <= g.n[1]; ++j) {
    for (int i = 0; i <= g.n[0]; ++i, ++c) {
      const double base = at(g, v, i, j);
      out.components(c, 0) = (at(g, v, i + 1, j) - base) / hx;
      out.components(c, 1) = (at(g, v, i, j + 1) - base) / hy;
    }
  }
  return out;
}

Eigen::VectorXd gradient_adjoint(const GridDomain& g, const Eigen::MatrixXd& w) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(g.size());
  const double vol = g.cell_volume();
  if (g.dim == 1) {
    const double s = vol / g.h(0);
    for (int i = 0; i <= g.n[0]; ++i) {
      add_at(g, out, i + 1, 1, s * w(i, 0));
      add_at(g, out, i, 1, -s * w(i, 0));
    }
    return out;
  }
  const double sx = vol / g.h(0);
  const double sy = vol / g.h(1);
  int c = 0;
  for (int j = 0; j <= g.n[1]; ++j) {
    for (int i = 0; i <= g.n[0]; ++i, ++c) {
      add_at(g, out, i + 1, j, sx * w(c, 0));
      add_at(g, out, i, j + 1, sy * w(c, 1));
      add_at(g, out, i, j, -sx * w(c, 0) - sy * w(c, 1));
    }
  }
  return out;
}

double dirichlet_energy_p(const DiscreteField& u, double p) {
  if (!(p >= 1.0)) throw DomainError("dirichlet_energy_p requires p >= 1");
  const GradientField gf = gradient(u);
  double sum = 0.0;
  for (Eigen::Index c = 0; c < gf.components.rows(); ++c) {
    sum += norm_pow(gf.components.row(c).squaredNorm(), p);
  }
  return sum * u.grid().cell_volume();
}

double lp_norm_pow(const DiscreteField& u, double s) {
  if (!(s >= 1.0)) throw DomainError("lp_norm_pow requires s >= 1");
  double sum = 0.0;
  for (double x : u.values()) sum += abs_pow(x, s);
  return sum * u.grid().cell_volume();
}

double composite_integral(const DiscreteField& u, const std::function<double(double)>& g) {
  double sum = 0.0;
  for (double x : u.values()) {
    const double gx = g(x);
    if (!std::isfinite(gx)) {
      std::ostringstream os;
      os << "composite integrand is not finite at u = " << x;
      throw NumericalError(os.str());
    }
    sum += gx;
  }
  return sum * u.grid().cell_volume();
}

DiscreteField energy_gradient_p(const DiscreteField& u, double p) {
  if (!(p > 1.0)) throw DomainError("energy_gradient_p requires p > 1");
  GradientField gf = gradient(u);
  if (p != 2.0) {
    for (Eigen::Index c = 0; c < gf.components.rows(); ++c) {
      const double sq = gf.components.row(c).squaredNorm();
      const double w = sq == 0.0 ? 0.0 : std::exp(0.5 * (p - 2.0) * std::log(sq));
      gf.components.row(c) *= w;
    }
  }
  return {u.grid(), gradient_adjoint(u.grid(), gf.components)};
}

Eigen::VectorXd lp_norm_pow_gradient(const DiscreteField& u, double s) {
  if (!(s >= 1.0)) throw DomainError("lp_norm_pow_gradient requires s >= 1");
  const double vol = u.grid().cell_volume();
  Eigen::VectorXd out(u.size());
  for (int k = 0; k < u.size(); ++k) {
    const double x = u.values()[k];
    const double a = std::abs(x);
    out[k] = a == 0.0 ? 0.0 : s * std::exp((s - 1.0) * std::log(a)) * (x > 0 ? 1.0 : -1.0) * vol;
  }
  return out;
}

Eigen::SparseMatrix<double> stiffness_matrix(const GridDomain& g) {
  // One rank-one block per difference edge, so u^T K u == dirichlet_energy_p(u, 2).
  std::vector<Eigen::Triplet<double>> trips;
  const double vol = g.cell_volume();
  auto push_edge = [&](int i0, int j0, int i1, int j1, double h) {
    // Contribution (u(i1,j1) - u(i0,j0))^2 / h^2 * vol.
    const bool in0 = i0 >= 1 && i0 <= g.n[0] && (g.dim == 1 || (j0 >= 1 && j0 <= g.n[1]));
    const bool in1 = i1 >= 1 && i1 <= g.n[0] && (g.dim == 1 || (j1 >= 1 && j1 <= g.n[1]));
    const double w = vol / (h * h);
    const int k0 = in0 ? g.index(i0, g.dim == 1 ? 1 : j0) : -1;
    const int k1 = in1 ? g.index(i1, g.dim == 1 ? 1 : j1) : -1;
    if (in0) trips.emplace_back(k0, k0, w);
    if (in1) trips.emplace_back(k1, k1, w);
    if (in0 && in1) {
      trips.emplace_back(k0, k1, -w);
      trips.emplace_back(k1, k0, -w);
    }
  };
  if (g.dim == 1) {
    for (int i = 0; i <= g.n[0]; ++i) push_edge(i, 1, i + 1, 1, g.h(0));
  } else {
    for (int j = 0; j <= g.n[1]; ++j) {
      for (int i = 0; i <= g.n[0]; ++i) {
        push_edge(i, j, i + 1, j, g.h(0));
        push_edge(i, j, i, j + 1, g.h(1));
      }
    }
  }
  Eigen::SparseMatrix<double> k(g.size(), g.size());
  k.setFromTriplets(trips.begin(), trips.end());
  return k;
}

void write_csv(std::ostream& os, const DiscreteField& u) {
  const GridDomain& g = u.grid();
  os.precision(17);
  os << "dim,nx,ny,lx,ly\n"
     << g.dim << ',' << g.n[0] << ',' << g.n[1] << ',' << g.lengths[0] << ',' << g.lengths[1]
     << "\nvalue\n";
  for (double x : u.values()) os << x << '\n';
}

DiscreteField read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "dim,nx,ny,lx,ly") {
    throw NumericalError("field CSV: missing header 'dim,nx,ny,lx,ly'");
  }
  GridDomain g;
  {
    if (!std::getline(is, line)) throw NumericalError("field CSV: missing grid line");
    std::istringstream ls(line);
    char comma = 0;
    ls >> g.dim >> comma >> g.n[0] >> comma >> g.n[1] >> comma >> g.lengths[0] >> comma >>
        g.lengths[1];
    if (!ls) throw NumericalError("field CSV: malformed grid line '" + line + "'");
  }
  g.validate();
  if (!std::getline(is, line) || line != "value") {
    throw NumericalError("field CSV: missing 'value' column header");
  }
  Eigen::VectorXd v(g.size());
  for (int k = 0; k < g.size(); ++k) {
    if (!std::getline(is, line)) throw NumericalError("field CSV: too few values");
    v[k] = std::stod(line);
  }
  return {g, std::move(v)};
}

nlohmann::json to_json(const GridDomain& g) {
  nlohmann::json j;
  j["dim"] = g.dim;
  if (g.dim == 1) {
    j["n"] = {g.n[0]};
    j["lengths"] = {g.lengths[0]};
  } else {
    j["n"] = {g.n[0], g.n[1]};
    j["lengths"] = {g.lengths[0], g.lengths[1]};
  }
  return j;
}

GridDomain grid_from_json(const nlohmann::json& j) {
  const int dim = j.at("dim").get<int>();
  const auto n = j.at("n").get<std::vector<int>>();
  const auto len = j.at("lengths").get<std::vector<double>>();
  if (static_cast<int>(n.size()) != dim || static_cast<int>(len.size()) != dim) {
    throw NumericalError("grid JSON: n/lengths must have dim entries");
  }
  return dim == 1 ? GridDomain::line(n[0], len[0])
                  : GridDomain::rectangle(n[0], n[1], len[0], len[1]);
}

nlohmann::json to_json(const DiscreteField& u) {
  nlohmann::json j = to_json(u.grid());
  j["values"] = std::vector<double>(u.values().begin(), u.values().end());
  return j;
}

DiscreteField field_from_json(const nlohmann::json& j) {
  const GridDomain g = grid_from_json(j);
  const auto vals = j.at("values").get<std::vector<double>>();
  return {g, Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()))};
}

}  // namespace nehari::fields
