#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "reparam/errors.hpp"
#include "reparam/families.hpp"
#include "reparam/integrator.hpp"
#include "reparam/parametrization.hpp"

namespace reparam {

struct RegularityReport {
  bool regular = false;
  double sigma_min = 0.0;   // sigma_d of dG(x); zero when d > D
  Vector singular_values;
};

// Regular iff sigma_d(dG(x)) > sigma_min_tol.
RegularityReport check_regular(const Parametrization& g, const Vector& x, double sigma_min_tol);

/// Leg `axis` of psi escaped (blow-up or domain exit) before time mu_axis.
class PsiEscapeError : public BlowUpError {
 public:
  PsiEscapeError(const std::string& what, Index axis, bool upper, double escape_time, double norm)
      : BlowUpError(what, escape_time, norm), axis_(axis), upper_(upper) {}
  Index axis() const { return axis_; }
  // True if the upper end of the axis interval was hit (mu_axis > 0).
  bool upper() const { return upper_; }

 private:
  Index axis_;
  bool upper_;
};

/// psi(x; mu): flow for time mu_i along +grad G_i, composed with the last
/// coordinate innermost. `order`, when given, lists axes in application order
/// (first applied first); the default is d-1, ..., 0.
Vector psi(const Parametrization& g, const Vector& x, const Vector& mu,
           const IntegratorConfig& cfg, const std::vector<Index>& order = {});

// exp(sum_i mu_i A_i) x by eigendecomposition of the symmetric sum.
Vector psi_closed_form(const CommutingQuadraticFamily& family, const Vector& x, const Vector& mu);

struct AxisInterval {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  // True when the probe ran out of budget: the true endpoint lies beyond +-budget.
  bool lower_beyond_budget = true;
  bool upper_beyond_budget = true;

  bool contains(double t) const { return t > lower && t < upper; }
};

/// Per-axis estimate of the flow domain U(x), a product of open intervals
/// containing 0.
struct Hyperrectangle {
  std::vector<AxisInterval> axes;
  double budget = 0.0;

  bool contains(const Vector& mu) const;
};

Hyperrectangle domain_probe(const Parametrization& g, const Vector& x, double per_axis_budget,
                            const IntegratorConfig& cfg);

}  // namespace reparam
