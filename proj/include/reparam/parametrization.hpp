#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "reparam/types.hpp"

namespace reparam {

/// Open subset of R^D on which a parametrization is defined.
class Domain {
 public:
  enum class Kind { whole_space, positive_orthant, predicate };

  static Domain whole_space() { return Domain(Kind::whole_space, {}, "R^D"); }
  // Points within boundary_margin of the boundary count as outside.
  static Domain positive_orthant(double boundary_margin = 1e-12);
  static Domain from_predicate(std::function<bool(const Vector&)> inside, std::string description);

  bool contains(const Vector& x) const;
  Kind kind() const { return kind_; }
  const std::string& description() const { return description_; }

 private:
  Domain(Kind kind, std::function<bool(const Vector&)> inside, std::string description)
      : kind_(kind), inside_(std::move(inside)), description_(std::move(description)) {}

  Kind kind_;
  std::function<bool(const Vector&)> inside_;
  std::string description_;
  double margin_ = 0.0;
};

enum class Commutativity { commuting, non_commuting, unknown };

using EvalFn = std::function<Vector(const Vector& x)>;
using JacobianFn = std::function<Matrix(const Vector& x)>;
// Returns the Hessian of coordinate i at x applied to v.
using HessianVecFn = std::function<Vector(Index i, const Vector& x, const Vector& v)>;

struct ParametrizationSpec {
  std::string name;
  Index x_dim = 0;  // D
  Index w_dim = 0;  // d
  EvalFn eval;
  JacobianFn jacobian;        // optional; finite differences otherwise
  HessianVecFn hessian_vec;   // optional; finite differences of the gradient otherwise
  Domain domain = Domain::whole_space();
  // When non-empty, G_i(x) = 1/2 x^T A_i x with A_i = quadratic_forms[i].
  std::vector<Matrix> quadratic_forms;
  Commutativity commutativity = Commutativity::unknown;
  std::vector<std::string> coordinate_names;
};

/// A map G from an open subset of R^D into R^d together with its derivative
/// providers. Immutable once built; copies share the underlying callables.
class Parametrization {
 public:
  explicit Parametrization(ParametrizationSpec spec);

  const std::string& name() const { return spec_->name; }
  Index x_dim() const { return spec_->x_dim; }
  Index w_dim() const { return spec_->w_dim; }
  const Domain& domain() const { return spec_->domain; }
  Commutativity commutativity() const { return spec_->commutativity; }

  bool has_analytic_jacobian() const { return static_cast<bool>(spec_->jacobian); }
  bool has_analytic_hessian() const { return static_cast<bool>(spec_->hessian_vec); }
  bool is_quadratic() const { return !spec_->quadratic_forms.empty(); }
  const std::vector<Matrix>& quadratic_forms() const { return spec_->quadratic_forms; }
  const std::string& coordinate_name(Index i) const;

  bool contains(const Vector& x) const { return spec_->domain.contains(x); }

  // Raw evaluation; no domain check.
  Vector operator()(const Vector& x) const;

  // Analytic providers; callers check has_analytic_*() first.
  Matrix analytic_jacobian(const Vector& x) const { return spec_->jacobian(x); }
  Vector analytic_hessian_vec(Index i, const Vector& x, const Vector& v) const {
    return spec_->hessian_vec(i, x, v);
  }

  const ParametrizationSpec& spec() const { return *spec_; }

 private:
  std::shared_ptr<const ParametrizationSpec> spec_;
};

}  // namespace reparam
