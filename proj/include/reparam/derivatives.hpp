#pragma once

#include <functional>

#include "reparam/integrator.hpp"
#include "reparam/parametrization.hpp"
#include "reparam/types.hpp"

namespace reparam {

// Jacobian dG(x), d x D. Analytic when the parametrization provides it,
// central differences otherwise. Throws DomainError / NumericalError.
Matrix jacobian(const Parametrization& g, const Vector& x);

// Always central differences, step eps^(1/3) * max(1, |x_k|).
Matrix jacobian_numeric(const Parametrization& g, const Vector& x);

// Gradient of coordinate i (row i of the Jacobian).
Vector coordinate_gradient(const Parametrization& g, Index i, const Vector& x);

// Hessian of G_i at x applied to v.
Vector hessian_vec(const Parametrization& g, Index i, const Vector& x, const Vector& v);

// Directional central difference of grad G_i, step eps^(1/3) * max(1, ||x||) / ||v||.
Vector hessian_vec_numeric(const Parametrization& g, Index i, const Vector& x, const Vector& v);

// [grad G_i, grad G_j](x) = H_j(x) grad G_i(x) - H_i(x) grad G_j(x).
Vector lie_bracket(const Parametrization& g, Index i, Index j, const Vector& x);

/// Scalar potential on x-space for the descent flow dx = -grad f(x) dt.
struct ScalarPotential {
  std::function<double(const Vector&)> value;  // optional
  std::function<Vector(const Vector&)> gradient;
  Domain domain = Domain::whole_space();
};

// Potential whose descent flow follows +grad G_i (i.e. f = -G_i).
ScalarPotential ascent_potential(const Parametrization& g, Index i);
// Potential f = G_i, descent flow along -grad G_i.
ScalarPotential coordinate_potential(const Parametrization& g, Index i);

/// Flow map phi_f^t(x). Negative t integrates the reversed field.
/// Throws BlowUpError (with escape time estimate) past the blow-up norm.
Vector flow(const ScalarPotential& f, const Vector& x, double t, const IntegratorConfig& cfg);

}  // namespace reparam
