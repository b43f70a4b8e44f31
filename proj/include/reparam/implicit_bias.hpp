#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>

#include "reparam/flows.hpp"
#include "reparam/legendre.hpp"
#include "reparam/loss.hpp"
#include "reparam/parametrization.hpp"
#include "reparam/types.hpp"

namespace reparam {

/// Underdetermined least squares: Z is n x d with rows = data points, n < d,
/// full row rank. The constraint reads Z w = Y.
class RegressionProblem {
 public:
  static RegressionProblem from_rows(Matrix z, Vector y);
  // Z given as d x n (columns = data points); transposed on ingestion.
  static RegressionProblem from_columns(const Matrix& z_columns, Vector y);

  const Matrix& z() const { return z_; }
  const Vector& y() const { return y_; }
  Index n() const { return z_.rows(); }
  Index d() const { return z_.cols(); }
  double sigma_min() const { return sigma_min_; }

  Loss loss() const { return regression_loss(z_, y_); }
  double residual(const Vector& w) const { return (z_ * w - y_).norm(); }

 private:
  RegressionProblem(Matrix z, Vector y);
  Matrix z_;
  Vector y_;
  double sigma_min_ = 0.0;
};

// Unit-Gaussian design and labels Y = Z w_bar from a Gaussian planted w_bar
// (|w_bar| entrywise when positive_planted).
RegressionProblem random_problem(Index n, Index d, std::uint64_t seed, bool positive_planted = false);

struct KktSolution {
  Vector w;       // argmin R over {Z w = Y}
  Vector lambda;  // grad R(w) = Z^T lambda
  double feasibility = 0.0;    // ||Z w - Y||
  double dual_distance = 0.0;  // distance of grad R(w) to range(Z^T)
  double kkt_residual = 0.0;   // sum of the two
  int iterations = 0;
};

struct KktOptions {
  double tol = 1e-12;
  int max_iterations = 200;
  int max_halvings = 60;
};

// Damped Newton on Z grad Q(Z^T lambda) = Y. Throws ConvergenceError when the
// feasible set misses int(dom R).
KktSolution kkt_oracle(const LegendreFunction& f, const RegressionProblem& prob,
                       const KktOptions& options = {});

struct FeasibleSampling {
  int samples = 0;
  int improvements = 0;         // feasible w with R(w) < R(w*) beyond rounding
  double min_gap = std::numeric_limits<double>::infinity();  // min R(w) - R(w*)
};

// R(w* + N c) for random null-space directions c with |c| log-uniform in
// [min_magnitude, max_magnitude].
FeasibleSampling feasible_sampling_check(const LegendreFunction& f, const RegressionProblem& prob,
                                         const Vector& w_star, int samples, std::uint64_t seed,
                                         double min_magnitude = 1e-3, double max_magnitude = 1.0);

struct ProjectionCheck {
  double divergence = 0.0;      // D_R(w_inf, w0)
  double min_divergence = 0.0;  // min over {Z w = Y} of D_R(w, w0)
  double gap = 0.0;             // divergence - min_divergence
  Vector w_projection;
  double kkt_residual = 0.0;
};

// Bregman projection of w0 onto {Z w = Y} via the oracle on R - <grad R(w0), .>.
// Throws std::invalid_argument when ||Z w_inf - Y|| > interpolation_tol.
ProjectionCheck bregman_projection_check(const LegendreFunction& f, const Vector& w_inf,
                                         const Vector& w0, const RegressionProblem& prob,
                                         double interpolation_tol = 1e-6);

// max over samples of the distance of grad R(w(t)) - grad R(w(0)) to range(Z^T).
double dual_containment_residual(const LegendreFunction& f, const Trajectory& traj,
                                 const RegressionProblem& prob);

// Residual ||Z w(t) - Y|| non-increasing over the last `fraction` of samples.
bool residual_monotone_tail(const Trajectory& traj, const RegressionProblem& prob,
                            double fraction = 0.9, double slack = 1e-12);

struct BiasOptions {
  double t_max = 1e3;
  double velocity_tol = 1e-9;
  double residual_tol = 1e-10;
  // Tighter than the flow default: the residual an explicit integrator
  // leaves near a stiff equilibrium scales with its tolerance.
  IntegratorConfig integrator{.abs_tol = 1e-12, .rel_tol = 1e-12};
  KktOptions kkt;
};

struct BiasReport {
  Vector w_inf;
  double interpolation_residual = 0.0;
  double r_w_inf = 0.0;
  Vector w_star;
  double r_w_star = 0.0;
  double gap = 0.0;            // R(w_inf) - R(w*), signed
  double bregman_gap = 0.0;    // D_R(w_inf, w0) - min D_R(., w0), signed
  double kkt_residual = 0.0;
  bool oracle_slack = false;   // a gap came out negative beyond rounding
  bool converged = false;
  double stop_time = 0.0;
  double final_velocity = 0.0;
  double dual_containment = 0.0;
  bool residual_monotone = false;
  std::string note;
  Trajectory trajectory;
};

// Gradient flow on L(G(x)) with L = 1/2 ||Z w - Y||^2 until convergence or t_max.
BiasReport run_bias_experiment(const Parametrization& g, const LegendreFunction& f,
                               const RegressionProblem& prob, const Vector& x_init,
                               const BiasOptions& options = {});

}  // namespace reparam
