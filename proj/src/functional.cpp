#include "nehari/functional.hpp"

#include <cmath>
#include <sstream>

#include "nehari/error.hpp"

namespace nehari::fields {

namespace {

double pw(double t, double k) { return std::exp(k * std::log(t)); }

double signed_pow(double s, double k) {
  const double a = std::abs(s);
  if (a == 0.0) return 0.0;
  return (s > 0 ? 1.0 : -1.0) * std::exp(k * std::log(a));
}

double abs_pow(double s, double k) {
  const double a = std::abs(s);
  return a == 0.0 ? 0.0 : std::exp(k * std::log(a));
}

}  // namespace

RayJet& RayJet::operator+=(const RayJet& o) {
  value += o.value;
  d1 += o.d1;
  d2 += o.d2;
  value_scale += o.value_scale;
  d1_scale += o.d1_scale;
  return *this;
}

RayJet RayJet::scaled(double c) const {
  const double a = std::abs(c);
  return {c * value, c * d1, c * d2, a * value_scale, a * d1_scale};
}

Eigen::VectorXd Term::radial_hessian(const DiscreteField& u) const {
  if (auto k = degree()) return (*k - 1.0) * gradient(u);
  throw ContractViolation("radial_hessian not available for term " + describe());
}

RayFunction Term::ray(const DiscreteField& v) const {
  if (auto deg = degree()) {
    const double k = *deg;
    const double base = value(v);
    return [k, base](double t) {
      const double tk = pw(t, k);
      const double v0 = tk * base;
      const double v1 = k * v0 / t;
      const double v2 = (k - 1.0) * v1 / t;
      return RayJet{v0, v1, v2, std::abs(v0), std::abs(v1)};
    };
  }
  return [this, v](double t) {
    const DiscreteField tv = v.scaled(t);
    const double val = value(tv);
    const double d1 = gradient(tv).dot(v.values());
    const double d2 = radial_hessian(tv).dot(v.values()) / t;
    return RayJet{val, d1, d2, std::abs(val), std::abs(d1)};
  };
}

GradientPowerTerm::GradientPowerTerm(double p) : p_(p) {
  if (!(p > 1.0)) throw DomainError("gradient power term requires p > 1");
}

double GradientPowerTerm::value(const DiscreteField& u) const {
  return dirichlet_energy_p(u, p_);
}

Eigen::VectorXd GradientPowerTerm::gradient(const DiscreteField& u) const {
  return p_ * energy_gradient_p(u, p_).values();
}

std::string GradientPowerTerm::describe() const {
  std::ostringstream os;
  os << "int|grad u|^" << p_;
  return os.str();
}

LebesguePowerTerm::LebesguePowerTerm(double s) : s_(s) {
  if (!(s > 1.0)) throw DomainError("Lebesgue power term requires s > 1");
}

double LebesguePowerTerm::value(const DiscreteField& u) const { return lp_norm_pow(u, s_); }

Eigen::VectorXd LebesguePowerTerm::gradient(const DiscreteField& u) const {
  return lp_norm_pow_gradient(u, s_);
}

std::string LebesguePowerTerm::describe() const {
  std::ostringstream os;
  os << "int|u|^" << s_;
  return os.str();
}

Nonlinearity Nonlinearity::pure_power(double r) {
  if (!(r > 1.0)) throw DomainError("power nonlinearity requires r > 1");
  Nonlinearity nl;
  std::ostringstream os;
  os << "power(r=" << r << ")";
  nl.name = os.str();
  nl.primitive = [r](double s) { return abs_pow(s, r) / r; };
  nl.f = [r](double s) { return signed_pow(s, r - 1.0); };
  nl.f_prime = [r](double s) { return (r - 1.0) * abs_pow(s, r - 2.0); };
  nl.power = r;
  return nl;
}

Nonlinearity Nonlinearity::logarithmic() {
  Nonlinearity nl;
  nl.name = "log";
  nl.primitive = [](double s) {
    const double s2 = s * s;
    return 0.5 * ((1.0 + s2) * std::log1p(s2) - s2);
  };
  nl.f = [](double s) { return s * std::log1p(s * s); };
  nl.f_prime = [](double s) {
    const double s2 = s * s;
    return std::log1p(s2) + 2.0 * s2 / (1.0 + s2);
  };
  return nl;
}

CompositeTerm::CompositeTerm(Nonlinearity nl) : nl_(std::move(nl)) {
  if (!nl_.primitive || !nl_.f || !nl_.f_prime) {
    throw DomainError("nonlinearity needs F, f and f'");
  }
}

double CompositeTerm::value(const DiscreteField& u) const {
  return composite_integral(u, nl_.primitive);
}

Eigen::VectorXd CompositeTerm::gradient(const DiscreteField& u) const {
  const double vol = u.grid().cell_volume();
  Eigen::VectorXd g(u.size());
  for (int k = 0; k < u.size(); ++k) g[k] = nl_.f(u.values()[k]) * vol;
  return g;
}

Eigen::VectorXd CompositeTerm::radial_hessian(const DiscreteField& u) const {
  const double vol = u.grid().cell_volume();
  Eigen::VectorXd g(u.size());
  for (int k = 0; k < u.size(); ++k) {
    const double x = u.values()[k];
    g[k] = nl_.f_prime(x) * x * vol;
  }
  return g;
}

std::string CompositeTerm::describe() const { return "int F(u), F from " + nl_.name; }

RayFunction CompositeTerm::ray(const DiscreteField& v) const {
  return [this, values = v.values(), vol = v.grid().cell_volume()](double t) {
    RayJet jet;
    for (double x : values) {
      const double s = t * x;
      const double F = nl_.primitive(s);
      const double f1 = nl_.f(s) * x;
      jet.value += F;
      jet.d1 += f1;
      jet.d2 += nl_.f_prime(s) * x * x;
      jet.value_scale += std::abs(F);
      jet.d1_scale += std::abs(f1);
    }
    return jet.scaled(vol);
  };
}

Functional& Functional::add(double coeff, TermPtr term) {
  if (!term) throw ContractViolation("null term");
  entries_.push_back({coeff, std::move(term)});
  return *this;
}

double Functional::value(const DiscreteField& u) const {
  double s = 0.0;
  for (const auto& e : entries_) s += e.coeff * e.term->value(u);
  return s;
}

Eigen::VectorXd Functional::gradient(const DiscreteField& u) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(u.size());
  for (const auto& e : entries_) g += e.coeff * e.term->gradient(u);
  return g;
}

Eigen::VectorXd Functional::radial_hessian(const DiscreteField& u) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(u.size());
  for (const auto& e : entries_) g += e.coeff * e.term->radial_hessian(u);
  return g;
}

RayFunction Functional::ray(const DiscreteField& v) const {
  std::vector<std::pair<double, RayFunction>> parts;
  parts.reserve(entries_.size());
  for (const auto& e : entries_) parts.emplace_back(e.coeff, e.term->ray(v));
  return [parts = std::move(parts)](double t) {
    RayJet sum;
    for (const auto& [c, f] : parts) sum += f(t).scaled(c);
    return sum;
  };
}

std::optional<double> Functional::degree() const {
  std::optional<double> d;
  for (const auto& e : entries_) {
    const auto k = e.term->degree();
    if (!k || (d && *d != *k)) return std::nullopt;
    d = k;
  }
  return d;
}

std::string Functional::describe() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (i) os << " + ";
    os << entries_[i].coeff << "*" << entries_[i].term->describe();
  }
  return os.str();
}

}  // namespace nehari::fields
