#include "reparam/implicit_bias.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include <Eigen/SVD>

#include "reparam/errors.hpp"
#include "reparam/linalg.hpp"

namespace reparam {

RegressionProblem::RegressionProblem(Matrix z, Vector y) : z_(std::move(z)), y_(std::move(y)) {
  if (z_.rows() != y_.size()) throw std::invalid_argument("regression: Z has " + std::to_string(z_.rows()) +
                                                          " rows but Y has " + std::to_string(y_.size()) + " entries");
  if (z_.rows() == 0 || !(z_.rows() < z_.cols())) {
    throw std::invalid_argument("regression problem must be underdetermined (0 < n < d)");
  }
  if (!z_.allFinite() || !y_.allFinite()) throw std::invalid_argument("regression data must be finite");
  Eigen::JacobiSVD<Matrix> svd(z_);
  sigma_min_ = svd.singularValues()[z_.rows() - 1];
  if (!(sigma_min_ > 1e-8)) {
    throw std::invalid_argument("design matrix is not full row rank (sigma_min = " +
                                std::to_string(sigma_min_) + ")");
  }
}

RegressionProblem RegressionProblem::from_rows(Matrix z, Vector y) {
  return RegressionProblem(std::move(z), std::move(y));
}

RegressionProblem RegressionProblem::from_columns(const Matrix& z_columns, Vector y) {
  return RegressionProblem(z_columns.transpose(), std::move(y));
}

RegressionProblem random_problem(Index n, Index d, std::uint64_t seed, bool positive_planted) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix z(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) z(i, j) = normal(rng);
  }
  Vector w_bar(d);
  for (Index j = 0; j < d; ++j) w_bar[j] = positive_planted ? std::abs(normal(rng)) : normal(rng);
  return RegressionProblem::from_rows(z, z * w_bar);
}

KktSolution kkt_oracle(const LegendreFunction& f, const RegressionProblem& prob,
                       const KktOptions& options) {
  if (f.dim() != prob.d()) throw std::invalid_argument("kkt_oracle: potential and design disagree on d");
  const Matrix& z = prob.z();
  const Vector& y = prob.y();
  const DualPotential& dual = f.dual();
  const double scale = std::max(1.0, y.norm());

  KktSolution sol;
  sol.lambda = Vector::Zero(prob.n());
  auto residual_at = [&](const Vector& lambda) -> Vector {
    const Vector mu = z.transpose() * lambda;
    if (!dual.domain.contains(mu)) return Vector::Constant(prob.n(), std::numeric_limits<double>::infinity());
    return z * dual.gradient(mu) - y;
  };
  Vector r = residual_at(sol.lambda);
  double rn = r.norm();
  if (!std::isfinite(rn)) throw ConvergenceError("kkt_oracle: lambda = 0 is outside dom grad Q");

  bool polished = false;
  for (int it = 0; it < options.max_iterations; ++it) {
    if (rn <= options.tol * scale) {
      if (polished) break;
      polished = true;
    }
    const Matrix jac = z * dual.hessian(z.transpose() * sol.lambda) * z.transpose();
    const Vector step = -jac.ldlt().solve(r);
    sol.iterations = it + 1;
    if (!step.allFinite()) {
      if (polished) break;
      throw ConvergenceError("kkt_oracle: singular Newton system");
    }
    bool improved = false;
    double alpha = 1.0;
    for (int k = 0; k <= options.max_halvings; ++k, alpha *= 0.5) {
      const Vector candidate = sol.lambda + alpha * step;
      const Vector rc = residual_at(candidate);
      const double rcn = rc.norm();
      if (std::isfinite(rcn) && rcn < rn) {
        sol.lambda = candidate;
        r = rc;
        rn = rcn;
        improved = true;
        break;
      }
    }
    if (!improved || polished) break;
  }
  if (!(rn <= options.tol * scale)) {
    throw ConvergenceError("kkt_oracle: Newton did not converge (residual " + std::to_string(rn) +
                           "); the feasible set may miss int(dom R)");
  }
  sol.w = dual.gradient(z.transpose() * sol.lambda);
  sol.feasibility = prob.residual(sol.w);
  sol.dual_distance = distance_to_span(row_space_basis(z), f.grad_r(sol.w));
  sol.kkt_residual = sol.feasibility + sol.dual_distance;
  return sol;
}

FeasibleSampling feasible_sampling_check(const LegendreFunction& f, const RegressionProblem& prob,
                                         const Vector& w_star, int samples, std::uint64_t seed,
                                         double min_magnitude, double max_magnitude) {
  if (!(min_magnitude > 0.0) || !(max_magnitude >= min_magnitude)) {
    throw std::invalid_argument("feasible sampling: need 0 < min_magnitude <= max_magnitude");
  }
  const Matrix null = null_space_basis(prob.z());
  const double r_star = f.r(w_star);
  const double slack = 1e-12 * std::max(1.0, std::abs(r_star));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  FeasibleSampling out;
  out.samples = samples;
  const double log_lo = std::log(min_magnitude), log_hi = std::log(max_magnitude);
  for (int s = 0; s < samples; ++s) {
    Vector c(null.cols());
    for (Index k = 0; k < c.size(); ++k) c[k] = normal(rng);
    const double magnitude = std::exp(log_lo + (log_hi - log_lo) * unit(rng));
    const Vector w = w_star + null * (magnitude * c.normalized());
    const double gap = f.r(w) - r_star;
    out.min_gap = std::min(out.min_gap, gap);
    if (gap < -slack) ++out.improvements;
  }
  return out;
}

ProjectionCheck bregman_projection_check(const LegendreFunction& f, const Vector& w_inf,
                                         const Vector& w0, const RegressionProblem& prob,
                                         double interpolation_tol) {
  if (prob.residual(w_inf) > interpolation_tol) {
    throw std::invalid_argument("bregman_projection_check: w_inf does not interpolate (residual " +
                                std::to_string(prob.residual(w_inf)) + ")");
  }
  const LegendreFunction shifted_f = shifted(f, f.grad_r(w0));
  const KktSolution sol = kkt_oracle(shifted_f, prob);
  ProjectionCheck out;
  out.w_projection = sol.w;
  out.kkt_residual = sol.kkt_residual;
  out.divergence = bregman(f, w_inf, w0);
  out.min_divergence = bregman(f, sol.w, w0);
  out.gap = out.divergence - out.min_divergence;
  return out;
}

double dual_containment_residual(const LegendreFunction& f, const Trajectory& traj,
                                 const RegressionProblem& prob) {
  const Matrix basis = row_space_basis(prob.z());
  const Vector theta0 = f.grad_r(traj.w.front());
  double worst = 0.0;
  for (const Vector& w : traj.w) worst = std::max(worst, distance_to_span(basis, f.grad_r(w) - theta0));
  return worst;
}

bool residual_monotone_tail(const Trajectory& traj, const RegressionProblem& prob, double fraction,
                            double slack) {
  const std::size_t n = traj.size();
  const auto start = static_cast<std::size_t>(std::floor((1.0 - fraction) * static_cast<double>(n)));
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t k = start; k < n; ++k) {
    const double r = prob.residual(traj.w[k]);
    if (r > previous + slack) return false;
    previous = r;
  }
  return true;
}

BiasReport run_bias_experiment(const Parametrization& g, const LegendreFunction& f,
                               const RegressionProblem& prob, const Vector& x_init,
                               const BiasOptions& options) {
  if (g.w_dim() != prob.d() || f.dim() != prob.d()) {
    throw std::invalid_argument("bias experiment: G, R and Z disagree on d");
  }
  FlowOptions flow;
  flow.integrator = options.integrator;
  ConvergenceRule rule;
  rule.velocity_tol = options.velocity_tol;
  rule.residual_tol = options.residual_tol;
  rule.residual = [&prob](const Vector& w) { return prob.residual(w); };
  flow.convergence = rule;

  BiasReport report;
  report.trajectory = gradient_flow(g, TimeDependentLoss(prob.loss()), x_init, options.t_max, flow);
  const Trajectory& traj = report.trajectory;
  report.converged = traj.converged;
  report.stop_time = traj.end_time();
  report.final_velocity = traj.final_velocity;
  report.w_inf = traj.w.back();
  report.interpolation_residual = prob.residual(report.w_inf);
  report.r_w_inf = f.r(report.w_inf);

  const KktSolution sol = kkt_oracle(f, prob, options.kkt);
  report.w_star = sol.w;
  report.r_w_star = f.r(sol.w);
  report.kkt_residual = sol.kkt_residual;
  report.gap = report.r_w_inf - report.r_w_star;

  const Vector w0 = traj.w.front();
  if (report.interpolation_residual <= 1e-6) {
    report.bregman_gap = bregman_projection_check(f, report.w_inf, w0, prob).gap;
  } else {
    report.bregman_gap = std::numeric_limits<double>::quiet_NaN();
  }
  // To first order R(w_inf) - R(w*) = <lambda, Z w_inf - Y>, so an
  // infeasible w_inf may undercut the oracle by about ||lambda|| * residual.
  const double allowance = 1e-10 * std::max(1.0, std::abs(report.r_w_star)) +
                           2.0 * sol.lambda.norm() * report.interpolation_residual;
  report.oracle_slack = report.gap < -allowance || report.bregman_gap < -allowance;
  report.dual_containment = dual_containment_residual(f, traj, prob);
  report.residual_monotone = residual_monotone_tail(traj, prob);
  if (!report.converged) {
    report.note = "no convergence before t_max; final ||dw/dt|| = " + std::to_string(traj.final_velocity);
  }
  return report;
}

}  // namespace reparam
