#pragma once

#include <stdexcept>
#include <string>

namespace sispersist {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model, degree law or weighted vector violates its invariants.
class InvalidModel : public Error {
 public:
  using Error::Error;
};

/// The requested quantity only exists above threshold (R0 > 1).
class Subcritical : public Error {
 public:
  using Error::Error;
};

/// Both infectivity and susceptibility are heterogeneous; no closed form
/// applies and the boundary-value solver has to be used instead.
class MixedHeterogeneity : public Error {
 public:
  using Error::Error;
};

class NoRoot : public Error {
 public:
  using Error::Error;
};

/// An iterative solver stopped without meeting its tolerance.
class ConvergenceFailure : public Error {
 public:
  ConvergenceFailure(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class StateSpaceTooLarge : public Error {
 public:
  using Error::Error;
};

/// r = 0 extinctions in the observation window.
class EstimatorUndefined : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace sispersist
