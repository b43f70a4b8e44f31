#pragma once

#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "reparam/families.hpp"
#include "reparam/integrator.hpp"
#include "reparam/legendre.hpp"
#include "reparam/loss.hpp"
#include "reparam/parametrization.hpp"
#include "reparam/types.hpp"

namespace reparam {

/// Sampled run of one of the flows. x and theta are empty when the flow has
/// no such coordinates.
struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> x;
  std::vector<Vector> w;
  std::vector<Vector> theta;
  std::vector<Vector> mu;  // int_0^t -grad L_s(w(s)) ds
  IntegrationStats stats;

  bool converged = false;  // only set by runs with a convergence rule
  double final_velocity = std::numeric_limits<double>::quiet_NaN();  // ||dw/dt|| at the end

  std::size_t size() const { return times.size(); }
  double end_time() const { return times.back(); }
};

/// Stop rule for open-ended runs. The run stops when ||dw/dt|| <= velocity_tol
/// holds over a trailing window of window_fraction * (elapsed time), when the
/// mean speed ||w(t) - w(t - window)|| / window is below velocity_tol, or when
/// residual(w) <= residual_tol.
struct ConvergenceRule {
  double velocity_tol = 1e-8;
  double window_fraction = 0.01;
  std::function<double(const Vector&)> residual;
  double residual_tol = 0.0;
};

struct FlowOptions {
  IntegratorConfig integrator;
  std::vector<double> grid;  // sample times; empty means sample_grid(T, loss)
  std::optional<ConvergenceRule> convergence;
};

// `points` uniform times on [0, T] merged with every loss breakpoint inside (0, T).
std::vector<double> sample_grid(double T, const TimeDependentLoss& loss, int points = 200);

// dx = -dG(x)^T grad L_t(G(x)) dt, with mu co-integrated.
Trajectory gradient_flow(const Parametrization& g, const TimeDependentLoss& loss,
                         const Vector& x_init, double T, const FlowOptions& options = {});

// d theta = -grad L_t(grad Q(theta)) dt from theta(0) = grad R(w_init).
Trajectory mirror_flow(const LegendreFunction& f, const TimeDependentLoss& loss,
                       const Vector& w_init, double T, const FlowOptions& options = {});

// dw = -hess R(w)^{-1} grad L_t(w) dt in primal coordinates.
Trajectory riemannian_flow(const LegendreFunction& f, const TimeDependentLoss& loss,
                           const Vector& w_init, double T, const FlowOptions& options = {});

struct EquivalenceReport {
  double max_deviation = 0.0;
  std::vector<double> times;
  std::vector<double> deviations;  // ||G(x(t)) - w_MF(t)||
  double init_dual_norm = 0.0;     // ||grad R(G(x_init))||
  Trajectory gradient;
  Trajectory mirror;
};

// Refuses (std::invalid_argument) when ||grad R(G(x_init))|| > 1e-6: R must be
// the potential induced by (G, x_init).
EquivalenceReport equivalence_report(const Parametrization& g, const LegendreFunction& f,
                                     const TimeDependentLoss& loss, const Vector& x_init,
                                     double T, const FlowOptions& options = {});

struct ReconstructionReport {
  std::vector<double> times;
  std::vector<double> errors;  // ||x(t) - psi(x_init; mu(t))||
  double max_error = 0.0;
  bool escaped = false;  // psi left its flow domain at some sampled mu(t)
  std::string message;
};

// psi by flow composition at `samples` trajectory points spread over the run.
ReconstructionReport psi_reconstruction_check(const Parametrization& g, const Trajectory& traj,
                                              const IntegratorConfig& cfg, int samples = 10);

// Same with the closed form exp(sum mu_i A_i) x_init.
ReconstructionReport psi_reconstruction_check(const CommutingQuadraticFamily& family,
                                              const Trajectory& traj, int samples = 10);

// max_k ||theta(t_k) + int_0^{t_k} grad L_s(w(s)) ds - theta(0)|| with the
// integral by the trapezoid rule on the sample grid.
double dual_conservation_residual(const Trajectory& traj, const TimeDependentLoss& loss);

// Columns t, x_1..x_D, w_1..w_d, theta_1..theta_d, mu_1..mu_d (absent groups omitted).
void write_csv(const Trajectory& traj, std::ostream& out);
void write_csv(const Trajectory& traj, const std::string& path);

}  // namespace reparam
