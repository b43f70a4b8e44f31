#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "reparam/families.hpp"
#include "reparam/parametrization.hpp"
#include "reparam/types.hpp"

namespace reparam {

enum class Provenance { closed_form, numeric_conjugate };

/// Dual side of a Legendre pair: Q with gradient and Hessian.
struct DualPotential {
  Index dim = 0;
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  std::function<Matrix(const Vector&)> hessian;
  Domain domain = Domain::whole_space();  // interior of dom Q
};

struct LegendreSpec {
  std::string name;
  Provenance provenance = Provenance::closed_form;
  DualPotential dual;
  std::function<double(const Vector&)> r;
  std::function<Vector(const Vector&)> grad_r;
  std::function<Matrix(const Vector&)> hess_r;
  // Inverse Hessian of R, i.e. the Riemannian metric inverse. Defaults to
  // inverting hess_r.
  std::function<Matrix(const Vector&)> metric_inverse;
  Domain primal_domain = Domain::whole_space();  // int(dom R)
  bool primal_has_boundary = false;
};

/// Paired potentials (R, Q = R*). Immutable; copies share state.
class LegendreFunction {
 public:
  explicit LegendreFunction(LegendreSpec spec);

  const std::string& name() const { return spec_->name; }
  Provenance provenance() const { return spec_->provenance; }
  Index dim() const { return spec_->dual.dim; }
  bool primal_has_boundary() const { return spec_->primal_has_boundary; }

  // int(dom R) membership.
  bool contains(const Vector& w) const;
  bool dual_contains(const Vector& mu) const;

  // Primal side; the derivatives throw DomainError outside int(dom R). r()
  // returns +inf outside dom R and extends continuously to its closure.
  double r(const Vector& w) const;
  Vector grad_r(const Vector& w) const;
  Matrix hess_r(const Vector& w) const;
  Matrix metric_inverse(const Vector& w) const;

  double q(const Vector& mu) const;
  Vector grad_q(const Vector& mu) const;
  Matrix hess_q(const Vector& mu) const;

  const DualPotential& dual() const { return spec_->dual; }

 private:
  std::shared_ptr<const LegendreSpec> spec_;
};

struct NewtonOptions {
  double tol = 1e-10;
  int max_iterations = 100;
  int max_halvings = 60;
};

struct ConjugateSolution {
  Vector mu;
  int iterations = 0;
  double residual = 0.0;
};

// Solves grad Q(mu) = w by damped Newton from `start` (mu = 0 by default).
// Throws ConvergenceError when w is outside range(grad Q) = int(dom R).
ConjugateSolution solve_conjugate(const DualPotential& dual, const Vector& w,
                                  const NewtonOptions& options = {},
                                  const std::optional<Vector>& start = std::nullopt);

// Builds the primal side by numeric conjugation of Q.
LegendreFunction conjugate_numeric(const DualPotential& dual, std::string name = "numeric",
                                   const NewtonOptions& options = {});

// Hyperbolic entropy induced by u (.) u - v (.) v at initialization (u0, v0).
LegendreFunction hypentropy_from_init(const Vector& u0, const Vector& v0);

// Entropy induced by x (.) x at x0: R(w) = 1/4 sum w_i (ln(w_i / x0_i^2) - 1).
LegendreFunction entropy_from_init(const Vector& x0);

// R(w) = 1/2 ||w - w0||^2, induced by the identity parametrization at w0.
LegendreFunction euclidean(const Vector& w0);

// Q(mu) = 1/4 ||exp(sum mu_i A_i) x0||^2 with R by numeric conjugation.
// Throws NotRegularError when {A_i x0} are linearly dependent.
LegendreFunction quadratic_family_potential(const CommutingQuadraticFamily& family,
                                            const Vector& x0);

// Q with closed-form derivatives for the quadratic family (no R side).
DualPotential quadratic_family_dual(const CommutingQuadraticFamily& family, const Vector& x0);

// R(w) - <theta, w>; its minimizer over an affine set is the Bregman
// projection with respect to the reference point whose dual coordinate is theta.
LegendreFunction shifted(const LegendreFunction& f, const Vector& theta);

// D_R(w, w_ref). w_ref must lie in int(dom R).
double bregman(const LegendreFunction& f, const Vector& w, const Vector& w_ref);

struct LegendreValidationOptions {
  int samples = 50;
  double sample_scale = 0.5;  // dual samples mu ~ N(0, scale^2)
  std::uint64_t seed = 0;
  int boundary_probes = 20;
  // Boundary point of dom R to approach; probes start at boundary_start
  // (defaults to grad Q(0)) and halve the distance each step.
  std::optional<Vector> boundary_target;
  std::optional<Vector> boundary_start;
  double level = 1.0;       // alpha in the level-set test
  int level_rays = 64;
  double level_max_radius = 1e4;
  double inversion_tol = 1e-8;
  double reciprocity_tol = 1e-6;
};

struct LegendreReport {
  std::string name;
  int samples = 0;
  double min_hessian_eigenvalue = 0.0;  // min over samples of lambda_min(hess Q)
  bool strictly_convex = false;
  double max_inversion_residual = 0.0;   // max ||grad R(grad Q(mu)) - mu||, ||grad Q(grad R(w)) - w||
  bool inversion_ok = false;
  double max_reciprocity_residual = 0.0; // max ||hess R(grad Q(mu)) hess Q(mu) - I||
  bool reciprocity_ok = false;
  double min_bregman = 0.0;
  double max_self_divergence = 0.0;
  bool bregman_nonnegative = false;

  bool boundary_checked = false;
  std::vector<double> boundary_gradient_norms;
  bool boundary_monotone = true;
  bool boundary_unbounded = true;  // increments of the norm do not die out

  double level_set_sup_radius = 0.0;
  bool level_sets_bounded = false;
  std::vector<double> continuity_divergences;
  bool divergence_continuous = false;

  std::string surjectivity = "not checked";
  std::string domain_note;

  bool passed() const;
};

LegendreReport legendre_validate(const LegendreFunction& f,
                                 const LegendreValidationOptions& options = {});

}  // namespace reparam
