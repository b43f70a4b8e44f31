#include "reparam/derivatives.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "reparam/errors.hpp"

namespace reparam {

namespace {

const double kFdScale = std::cbrt(std::numeric_limits<double>::epsilon());

void require_domain(const Parametrization& g, const Vector& x) {
  if (x.size() != g.x_dim()) {
    throw std::invalid_argument(g.name() + ": point has dimension " + std::to_string(x.size()) +
                                ", expected " + std::to_string(g.x_dim()));
  }
  if (!g.contains(x)) {
    std::ostringstream msg;
    msg << g.name() << ": point outside domain (" << g.domain().description() << ")";
    throw DomainError(msg.str());
  }
}

template <class T>
const T& require_finite(const T& value, const char* what) {
  if (!value.allFinite()) throw NumericalError(std::string(what) + " produced non-finite values");
  return value;
}

Vector gradient_numeric(const Parametrization& g, Index i, const Vector& x) {
  Vector grad(x.size());
  Vector xp = x;
  for (Index k = 0; k < x.size(); ++k) {
    const double h = kFdScale * std::max(1.0, std::abs(x[k]));
    xp[k] = x[k] + h;
    const double fp = g(xp)[i];
    xp[k] = x[k] - h;
    const double fm = g(xp)[i];
    xp[k] = x[k];
    grad[k] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

Vector gradient_unchecked(const Parametrization& g, Index i, const Vector& x) {
  if (g.has_analytic_jacobian()) return g.analytic_jacobian(x).row(i).transpose();
  return gradient_numeric(g, i, x);
}

}  // namespace

Matrix jacobian_numeric(const Parametrization& g, const Vector& x) {
  require_domain(g, x);
  Matrix jac(g.w_dim(), g.x_dim());
  Vector xp = x;
  for (Index k = 0; k < x.size(); ++k) {
    const double h = kFdScale * std::max(1.0, std::abs(x[k]));
    xp[k] = x[k] + h;
    const Vector fp = g(xp);
    xp[k] = x[k] - h;
    const Vector fm = g(xp);
    xp[k] = x[k];
    jac.col(k) = (fp - fm) / (2.0 * h);
  }
  return require_finite(jac, "numeric Jacobian");
}

Matrix jacobian(const Parametrization& g, const Vector& x) {
  if (!g.has_analytic_jacobian()) return jacobian_numeric(g, x);
  require_domain(g, x);
  Matrix jac = g.analytic_jacobian(x);
  if (jac.rows() != g.w_dim() || jac.cols() != g.x_dim()) {
    throw std::logic_error(g.name() + ": analytic Jacobian has wrong shape");
  }
  return require_finite(jac, "Jacobian");
}

Vector coordinate_gradient(const Parametrization& g, Index i, const Vector& x) {
  require_domain(g, x);
  if (i < 0 || i >= g.w_dim()) throw std::out_of_range("coordinate index out of range");
  return require_finite(gradient_unchecked(g, i, x), "gradient");
}

Vector hessian_vec_numeric(const Parametrization& g, Index i, const Vector& x, const Vector& v) {
  require_domain(g, x);
  if (i < 0 || i >= g.w_dim()) throw std::out_of_range("coordinate index out of range");
  const double vn = v.norm();
  if (!std::isfinite(vn)) throw std::invalid_argument("direction must be finite");
  if (vn == 0.0) return Vector::Zero(x.size());
  // Differencing a finite-difference gradient needs a larger step: the
  // optimum is the cube root of the gradient's own rounding error.
  const double scale = g.has_analytic_jacobian() ? kFdScale : std::pow(kFdScale, 2.0 / 3.0);
  const double h = scale * std::max(1.0, x.norm()) / vn;
  const Vector gp = gradient_unchecked(g, i, x + h * v);
  const Vector gm = gradient_unchecked(g, i, x - h * v);
  return require_finite(Vector((gp - gm) / (2.0 * h)), "numeric Hessian-vector product");
}

Vector hessian_vec(const Parametrization& g, Index i, const Vector& x, const Vector& v) {
  if (!g.has_analytic_hessian()) return hessian_vec_numeric(g, i, x, v);
  require_domain(g, x);
  if (i < 0 || i >= g.w_dim()) throw std::out_of_range("coordinate index out of range");
  if (!v.allFinite()) throw std::invalid_argument("direction must be finite");
  return require_finite(g.analytic_hessian_vec(i, x, v), "Hessian-vector product");
}

Vector lie_bracket(const Parametrization& g, Index i, Index j, const Vector& x) {
  const Vector gi = coordinate_gradient(g, i, x);
  const Vector gj = coordinate_gradient(g, j, x);
  return hessian_vec(g, j, x, gi) - hessian_vec(g, i, x, gj);
}

ScalarPotential ascent_potential(const Parametrization& g, Index i) {
  return ScalarPotential{
      [g, i](const Vector& x) { return -g(x)[i]; },
      [g, i](const Vector& x) -> Vector { return -coordinate_gradient(g, i, x); },
      g.domain()};
}

ScalarPotential coordinate_potential(const Parametrization& g, Index i) {
  return ScalarPotential{
      [g, i](const Vector& x) { return g(x)[i]; },
      [g, i](const Vector& x) -> Vector { return coordinate_gradient(g, i, x); },
      g.domain()};
}

Vector flow(const ScalarPotential& f, const Vector& x, double t, const IntegratorConfig& cfg) {
  if (!f.gradient) throw std::invalid_argument("potential needs a gradient");
  if (!std::isfinite(t)) throw std::invalid_argument("flow time must be finite");
  if (!f.domain.contains(x)) throw DomainError("flow start point outside the potential's domain");
  if (t == 0.0) return x;
  const double sign = t > 0.0 ? -1.0 : 1.0;
  const Domain domain = f.domain;
  OdeIntegrator integrator(cfg, [&domain](const Vector& y) {
    if (!domain.contains(y)) throw DomainError("flow left the domain (" + domain.description() + ")");
  });
  Vector y = x;
  integrator.advance([&](double, const Vector& s) -> Vector { return sign * f.gradient(s); }, y,
                     0.0, std::abs(t));
  return y;
}

}  // namespace reparam
