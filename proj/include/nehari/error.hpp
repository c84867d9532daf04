#pragma once

#include <stdexcept>
#include <string>

namespace nehari {

/// Root of the library's exception hierarchy. Each subclass maps to one
/// failure class callers are expected to distinguish.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of the operation
/// (nonpositive ray parameter, exponent out of range, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed (bracket expansion, non-finite values).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation was violated by the caller.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// The requested Nehari branch does not exist on the given ray.
class BranchUnavailable : public Error {
 public:
  using Error::Error;
};

/// The ray lies in the degeneracy band: both critical points have merged.
class DegenerateRay : public Error {
 public:
  using Error::Error;
};

/// Every multi-start failed to reach the requested branch.
class InfeasibleBranch : public Error {
 public:
  using Error::Error;
};

/// Prescribed energy level outside the admissible window 0 < -alpha c < h0.
class OutOfRangeLevel : public Error {
 public:
  OutOfRangeLevel(const std::string& what, double h0) : Error(what), h0_(h0) {}
  double h0() const { return h0_; }

 private:
  double h0_;
};

/// A ray along which t -> H(tv) is not increasing-then-decreasing.
class UnimodalityViolation : public Error {
 public:
  using Error::Error;
};

/// A directional derivative norm vanished in the affine energy quadrature.
class DegenerateDirection : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration (exponent ordering, unknown keys, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace nehari
