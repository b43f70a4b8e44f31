#pragma once

#include <stdexcept>
#include <string>

namespace reparam {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Point handed to a derivative or flow lies outside the parametrization's domain,
// or a trajectory touched the domain boundary.
class DomainError : public Error {
 public:
  using Error::Error;
};

// State norm crossed the blow-up threshold. This is the finite-time escape of
// a flow, i.e. the trajectory reached the edge of its flow domain.
class BlowUpError : public Error {
 public:
  BlowUpError(const std::string& what, double escape_time, double norm)
      : Error(what), escape_time_(escape_time), norm_(norm) {}
  double escape_time() const { return escape_time_; }
  double norm() const { return norm_; }

 private:
  double escape_time_;
  double norm_;
};

class StepLimitError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// Jacobian of G lost rank at the point of interest.
class NotRegularError : public Error {
 public:
  NotRegularError(const std::string& what, double sigma_min) : Error(what), sigma_min_(sigma_min) {}
  double sigma_min() const { return sigma_min_; }

 private:
  double sigma_min_;
};

class NonCommutingError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace reparam
