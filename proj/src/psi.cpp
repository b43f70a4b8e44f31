#include "reparam/psi.hpp"

#include <Eigen/SVD>
#include <numeric>
#include <sstream>

#include "reparam/derivatives.hpp"
#include "reparam/linalg.hpp"

namespace reparam {

RegularityReport check_regular(const Parametrization& g, const Vector& x, double sigma_min_tol) {
  const Matrix jac = jacobian(g, x);
  Eigen::JacobiSVD<Matrix> svd(jac);
  RegularityReport report;
  report.singular_values = svd.singularValues();
  report.sigma_min =
      g.w_dim() <= report.singular_values.size() ? report.singular_values[g.w_dim() - 1] : 0.0;
  report.regular = report.sigma_min > sigma_min_tol;
  return report;
}

Vector psi(const Parametrization& g, const Vector& x, const Vector& mu,
           const IntegratorConfig& cfg, const std::vector<Index>& order) {
  if (mu.size() != g.w_dim()) throw std::invalid_argument("mu has wrong dimension");
  if (!g.contains(x)) throw DomainError("psi: start point outside the domain");
  std::vector<Index> axes = order;
  if (axes.empty()) {
    axes.resize(static_cast<std::size_t>(g.w_dim()));
    std::iota(axes.rbegin(), axes.rend(), Index{0});
  } else if (static_cast<Index>(axes.size()) != g.w_dim()) {
    throw std::invalid_argument("psi order must list every axis once");
  }
  Vector y = x;
  for (Index axis : axes) {
    const double t = mu[axis];
    if (t == 0.0) continue;
    try {
      y = flow(ascent_potential(g, axis), y, t, cfg);
    } catch (const BlowUpError& e) {
      std::ostringstream msg;
      msg << "psi leg " << axis << " escaped at |t|=" << e.escape_time() << " (requested mu="
          << t << "): the " << (t > 0 ? "upper" : "lower") << " end of the flow domain was hit";
      throw PsiEscapeError(msg.str(), axis, t > 0, e.escape_time(), e.norm());
    }
  }
  return y;
}

Vector psi_closed_form(const CommutingQuadraticFamily& family, const Vector& x, const Vector& mu) {
  if (x.size() != family.x_dim()) throw std::invalid_argument("x has wrong dimension");
  return symmetric_expm_apply(family.combination(mu), x);
}

bool Hyperrectangle::contains(const Vector& mu) const {
  if (mu.size() != static_cast<Index>(axes.size())) return false;
  for (std::size_t i = 0; i < axes.size(); ++i) {
    if (!axes[i].contains(mu[static_cast<Index>(i)])) return false;
  }
  return true;
}

Hyperrectangle domain_probe(const Parametrization& g, const Vector& x, double per_axis_budget,
                            const IntegratorConfig& cfg) {
  if (!(per_axis_budget > 0.0)) throw std::invalid_argument("probe budget must be positive");
  if (!g.contains(x)) throw DomainError("domain_probe: start point outside the domain");
  Hyperrectangle box;
  box.budget = per_axis_budget;
  for (Index j = 0; j < g.w_dim(); ++j) {
    AxisInterval interval;
    const ScalarPotential field = ascent_potential(g, j);
    for (const double sign : {1.0, -1.0}) {
      double endpoint = sign * std::numeric_limits<double>::infinity();
      bool beyond = true;
      try {
        flow(field, x, sign * per_axis_budget, cfg);
      } catch (const BlowUpError& e) {
        endpoint = sign * e.escape_time();
        beyond = false;
      }
      if (sign > 0) {
        interval.upper = endpoint;
        interval.upper_beyond_budget = beyond;
      } else {
        interval.lower = endpoint;
        interval.lower_beyond_budget = beyond;
      }
    }
    box.axes.push_back(interval);
  }
  return box;
}

}  // namespace reparam
