#pragma once

#include <cstddef>
#include <functional>

#include "reparam/types.hpp"

namespace reparam {

enum class IntegrationMethod {
  dopri54,  // adaptive embedded Runge-Kutta 5(4), Dormand-Prince
  rk4,      // fixed-step classical Runge-Kutta, bitwise reproducible
};

struct IntegratorConfig {
  IntegrationMethod method = IntegrationMethod::dopri54;
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  std::size_t max_steps = 5'000'000;
  double blowup_norm = 1e8;
  double fixed_step = 1e-3;  // rk4 only

  // Throws std::invalid_argument when a field is out of range.
  void validate() const;

  // Scalar used by tests and reports as "the integrator tolerance".
  double tolerance() const;
};

struct IntegrationStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t evaluations = 0;

  IntegrationStats& operator+=(const IntegrationStats& other);
};

using OdeRhs = std::function<Vector(double t, const Vector& y)>;

// Called after each accepted step with the new time, state and derivative.
// Returning false stops the integration at that step.
using StepObserver = std::function<bool(double t, const Vector& y, const Vector& dydt)>;

// Called on every accepted state; throws to abort (e.g. DomainError).
using StateCheck = std::function<void(const Vector& y)>;

/// Stateful driver for a single run. Carries the adaptive step size across
/// successive advance() calls so a run split at sample points or loss
/// breakpoints does not restart step-size selection from scratch.
class OdeIntegrator {
 public:
  explicit OdeIntegrator(IntegratorConfig cfg, StateCheck check = {});

  /// Integrates y from t0 to t1 in place. t1 < t0 integrates backward in time.
  /// Returns the time reached: t1, or earlier if the observer asked to stop.
  /// Throws BlowUpError when ||y|| exceeds cfg.blowup_norm and StepLimitError
  /// when cfg.max_steps is exhausted.
  double advance(const OdeRhs& f, Vector& y, double t0, double t1,
                 const StepObserver& observer = {});

  const IntegrationStats& stats() const { return stats_; }
  const IntegratorConfig& config() const { return cfg_; }

 private:
  double advance_dopri(const OdeRhs& f, Vector& y, double t0, double t1,
                       const StepObserver& observer);
  double advance_rk4(const OdeRhs& f, Vector& y, double t0, double t1,
                     const StepObserver& observer);
  void accept(double t, const Vector& y);

  IntegratorConfig cfg_;
  StateCheck check_;
  IntegrationStats stats_;
  double step_hint_ = 0.0;
};

Vector integrate(const OdeRhs& f, Vector y0, double t0, double t1, const IntegratorConfig& cfg);

}  // namespace reparam
