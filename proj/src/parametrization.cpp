#include "reparam/parametrization.hpp"

#include <stdexcept>

namespace reparam {

Domain Domain::positive_orthant(double boundary_margin) {
  Domain d(Kind::positive_orthant, {}, "open positive orthant");
  d.margin_ = boundary_margin;
  return d;
}

Domain Domain::from_predicate(std::function<bool(const Vector&)> inside, std::string description) {
  if (!inside) throw std::invalid_argument("domain predicate must be callable");
  return Domain(Kind::predicate, std::move(inside), std::move(description));
}

bool Domain::contains(const Vector& x) const {
  if (!x.allFinite()) return false;
  switch (kind_) {
    case Kind::whole_space:
      return true;
    case Kind::positive_orthant:
      return (x.array() > margin_).all();
    case Kind::predicate:
      return inside_(x);
  }
  return false;
}

Parametrization::Parametrization(ParametrizationSpec spec) {
  if (spec.x_dim <= 0 || spec.w_dim <= 0) {
    throw std::invalid_argument("parametrization dimensions must be positive");
  }
  if (!spec.eval) throw std::invalid_argument("parametrization needs an evaluation function");
  if (!spec.quadratic_forms.empty()) {
    if (static_cast<Index>(spec.quadratic_forms.size()) != spec.w_dim) {
      throw std::invalid_argument("one quadratic form per output coordinate required");
    }
    for (const Matrix& a : spec.quadratic_forms) {
      if (a.rows() != spec.x_dim || a.cols() != spec.x_dim) {
        throw std::invalid_argument("quadratic form has wrong shape");
      }
    }
  }
  if (spec.coordinate_names.empty()) {
    for (Index i = 0; i < spec.w_dim; ++i) spec.coordinate_names.push_back(std::to_string(i));
  } else if (static_cast<Index>(spec.coordinate_names.size()) != spec.w_dim) {
    throw std::invalid_argument("coordinate name count does not match w dimension");
  }
  spec_ = std::make_shared<const ParametrizationSpec>(std::move(spec));
}

const std::string& Parametrization::coordinate_name(Index i) const {
  return spec_->coordinate_names.at(static_cast<std::size_t>(i));
}

Vector Parametrization::operator()(const Vector& x) const {
  if (x.size() != spec_->x_dim) {
    throw std::invalid_argument(name() + ": expected x of dimension " +
                                std::to_string(spec_->x_dim) + ", got " +
                                std::to_string(x.size()));
  }
  return spec_->eval(x);
}

}  // namespace reparam
