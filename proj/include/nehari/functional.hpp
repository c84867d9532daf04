#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nehari/fields.hpp"

namespace nehari::fields {

/// Value and first two derivatives of t -> I(tv) at one t, together with the
/// magnitudes the value and first derivative are built from.
struct RayJet {
  double value = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double value_scale = 0.0;
  double d1_scale = 0.0;

  RayJet& operator+=(const RayJet& o);
  RayJet scaled(double c) const;
};

using RayFunction = std::function<RayJet(double)>;

/// A smooth scalar functional on discrete fields. Implementations must be
/// safe for concurrent const use.
class Term {
 public:
  virtual ~Term() = default;

  virtual double value(const DiscreteField& u) const = 0;
  /// Nodal covector I'(u).
  virtual Eigen::VectorXd gradient(const DiscreteField& u) const = 0;
  /// I''(u)u. Homogeneous terms of degree k return (k-1) I'(u).
  virtual Eigen::VectorXd radial_hessian(const DiscreteField& u) const;
  /// Homogeneity degree, when the term has one.
  virtual std::optional<double> degree() const { return std::nullopt; }
  virtual std::string describe() const = 0;

  /// Evaluator of t -> I(tv). The default uses the closed form for
  /// homogeneous terms and nodal re-evaluation otherwise.
  virtual RayFunction ray(const DiscreteField& v) const;
};

using TermPtr = std::shared_ptr<const Term>;

/// int |grad u|^p.
class GradientPowerTerm final : public Term {
 public:
  explicit GradientPowerTerm(double p);
  double value(const DiscreteField& u) const override;
  Eigen::VectorXd gradient(const DiscreteField& u) const override;
  std::optional<double> degree() const override { return p_; }
  std::string describe() const override;

 private:
  double p_;
};

/// ||u||_s^s.
class LebesguePowerTerm final : public Term {
 public:
  explicit LebesguePowerTerm(double s);
  double value(const DiscreteField& u) const override;
  Eigen::VectorXd gradient(const DiscreteField& u) const override;
  std::optional<double> degree() const override { return s_; }
  std::string describe() const override;

 private:
  double s_;
};

/// Scalar nonlinearity: primitive F, f = F', and f'.
struct Nonlinearity {
  std::string name;
  std::function<double(double)> primitive;
  std::function<double(double)> f;
  std::function<double(double)> f_prime;
  /// Set when f(s) = |s|^(r-2) s, enabling the homogeneous closed forms.
  std::optional<double> power;

  static Nonlinearity pure_power(double r);
  /// f(s) = s log(1 + s^2): superlinear, subcritical, not a power.
  static Nonlinearity logarithmic();
};

/// int F(u) for a general nonlinearity.
class CompositeTerm final : public Term {
 public:
  explicit CompositeTerm(Nonlinearity nl);
  double value(const DiscreteField& u) const override;
  Eigen::VectorXd gradient(const DiscreteField& u) const override;
  Eigen::VectorXd radial_hessian(const DiscreteField& u) const override;
  std::string describe() const override;
  RayFunction ray(const DiscreteField& v) const override;

  const Nonlinearity& nonlinearity() const { return nl_; }

 private:
  Nonlinearity nl_;
};

/// Finite linear combination sum_i c_i T_i.
class Functional {
 public:
  struct Entry {
    double coeff;
    TermPtr term;
  };

  Functional() = default;
  Functional& add(double coeff, TermPtr term);

  double value(const DiscreteField& u) const;
  Eigen::VectorXd gradient(const DiscreteField& u) const;
  Eigen::VectorXd radial_hessian(const DiscreteField& u) const;
  RayFunction ray(const DiscreteField& v) const;
  /// Common homogeneity degree when every term shares one.
  std::optional<double> degree() const;
  std::string describe() const;

  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
};

}  // namespace nehari::fields
