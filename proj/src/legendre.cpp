#include "reparam/legendre.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <random>

#include "reparam/errors.hpp"
#include "reparam/linalg.hpp"

namespace reparam {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_dim(Index expected, const Vector& v, const char* what) {
  if (v.size() != expected) {
    throw std::invalid_argument(std::string(what) + " has dimension " + std::to_string(v.size()) +
                                ", expected " + std::to_string(expected));
  }
}

void require_positive(const Vector& v, const char* what) {
  if (v.size() == 0 || !(v.array() > 0.0).all() || !v.allFinite()) {
    throw std::invalid_argument(std::string(what) + " must be strictly positive");
  }
}

}  // namespace

LegendreFunction::LegendreFunction(LegendreSpec spec) {
  if (spec.dual.dim <= 0) throw std::invalid_argument("Legendre function needs a positive dimension");
  if (!spec.dual.gradient || !spec.dual.hessian || !spec.grad_r || !spec.hess_r) {
    throw std::invalid_argument("Legendre function needs gradients and Hessians on both sides");
  }
  if (!spec.metric_inverse) {
    auto hess = spec.hess_r;
    spec.metric_inverse = [hess](const Vector& w) -> Matrix {
      const Matrix h = hess(w);
      return h.ldlt().solve(Matrix::Identity(h.rows(), h.cols()));
    };
  }
  spec_ = std::make_shared<const LegendreSpec>(std::move(spec));
}

bool LegendreFunction::contains(const Vector& w) const {
  return w.size() == dim() && spec_->primal_domain.contains(w);
}

bool LegendreFunction::dual_contains(const Vector& mu) const {
  return mu.size() == dim() && spec_->dual.domain.contains(mu);
}

double LegendreFunction::r(const Vector& w) const {
  require_dim(dim(), w, "w");
  if (!spec_->r) throw std::logic_error(name() + ": R value not available");
  return spec_->r(w);
}

Vector LegendreFunction::grad_r(const Vector& w) const {
  require_dim(dim(), w, "w");
  if (!contains(w)) throw DomainError(name() + ": point outside int(dom R)");
  return spec_->grad_r(w);
}

Matrix LegendreFunction::hess_r(const Vector& w) const {
  require_dim(dim(), w, "w");
  if (!contains(w)) throw DomainError(name() + ": point outside int(dom R)");
  return spec_->hess_r(w);
}

Matrix LegendreFunction::metric_inverse(const Vector& w) const {
  require_dim(dim(), w, "w");
  if (!contains(w)) throw DomainError(name() + ": point outside int(dom R)");
  return spec_->metric_inverse(w);
}

double LegendreFunction::q(const Vector& mu) const {
  require_dim(dim(), mu, "mu");
  if (!spec_->dual.value) throw std::logic_error(name() + ": Q value not available");
  return spec_->dual.value(mu);
}

Vector LegendreFunction::grad_q(const Vector& mu) const {
  require_dim(dim(), mu, "mu");
  if (!dual_contains(mu)) throw DomainError(name() + ": point outside dom grad Q");
  return spec_->dual.gradient(mu);
}

Matrix LegendreFunction::hess_q(const Vector& mu) const {
  require_dim(dim(), mu, "mu");
  if (!dual_contains(mu)) throw DomainError(name() + ": point outside dom grad Q");
  return spec_->dual.hessian(mu);
}

ConjugateSolution solve_conjugate(const DualPotential& dual, const Vector& w,
                                  const NewtonOptions& options, const std::optional<Vector>& start) {
  require_dim(dual.dim, w, "w");
  if (!w.allFinite()) throw ConvergenceError("conjugate solve: non-finite target");
  ConjugateSolution sol;
  sol.mu = start ? *start : Vector::Zero(dual.dim);
  Vector residual = dual.gradient(sol.mu) - w;
  double rn = residual.norm();
  if (!std::isfinite(rn)) throw ConvergenceError("conjugate solve: non-finite start");
  const double scale = std::max(1.0, w.norm());

  // One extra Newton step after reaching tolerance; quadratic convergence
  // takes the residual to rounding level.
  bool polishing = false;
  for (int it = 0; it < options.max_iterations; ++it) {
    if (rn <= options.tol * scale) {
      if (polishing) break;
      polishing = true;
    }
    const Matrix h = dual.hessian(sol.mu);
    const Vector step = -h.ldlt().solve(residual);
    if (!step.allFinite()) {
      if (polishing) break;
      throw ConvergenceError("conjugate solve: singular Hessian of Q");
    }
    double alpha = 1.0;
    bool improved = false;
    for (int k = 0; k <= options.max_halvings; ++k, alpha *= 0.5) {
      const Vector candidate = sol.mu + alpha * step;
      if (!dual.domain.contains(candidate)) continue;
      const Vector r_candidate = dual.gradient(candidate) - w;
      const double rc = r_candidate.norm();
      if (std::isfinite(rc) && rc < rn) {
        sol.mu = candidate;
        residual = r_candidate;
        rn = rc;
        improved = true;
        break;
      }
    }
    sol.iterations = it + 1;
    if (!improved) {
      if (polishing) break;
      throw ConvergenceError(
          "conjugate solve: no decrease in ||grad Q(mu) - w||; w is likely outside "
          "range(grad Q) = int(dom R)");
    }
    if (polishing) break;
  }
  sol.residual = rn;
  if (!(rn <= options.tol * scale)) {
    throw ConvergenceError("conjugate solve did not converge (residual " + std::to_string(rn) +
                           "); w is outside range(grad Q) = int(dom R)");
  }
  return sol;
}

LegendreFunction conjugate_numeric(const DualPotential& dual, std::string name,
                                   const NewtonOptions& options) {
  if (!dual.gradient || !dual.hessian) {
    throw std::invalid_argument("numeric conjugation needs grad Q and hess Q");
  }
  LegendreSpec spec;
  spec.name = std::move(name);
  spec.provenance = Provenance::numeric_conjugate;
  spec.dual = dual;
  spec.r = [dual, options](const Vector& w) {
    if (!dual.value) throw std::logic_error("R value needs Q value");
    try {
      const ConjugateSolution sol = solve_conjugate(dual, w, options);
      return sol.mu.dot(w) - dual.value(sol.mu);
    } catch (const ConvergenceError&) {
      return kInf;
    }
  };
  spec.grad_r = [dual, options](const Vector& w) -> Vector {
    return solve_conjugate(dual, w, options).mu;
  };
  spec.hess_r = [dual, options](const Vector& w) -> Matrix {
    const Matrix h = dual.hessian(solve_conjugate(dual, w, options).mu);
    return h.ldlt().solve(Matrix::Identity(h.rows(), h.cols()));
  };
  spec.metric_inverse = [dual, options](const Vector& w) -> Matrix {
    return dual.hessian(solve_conjugate(dual, w, options).mu);
  };
  spec.primal_domain = Domain::from_predicate(
      [dual, options](const Vector& w) {
        try {
          solve_conjugate(dual, w, options);
          return true;
        } catch (const ConvergenceError&) {
          return false;
        }
      },
      "range(grad Q), decided by Newton convergence");
  return LegendreFunction(std::move(spec));
}

LegendreFunction hypentropy_from_init(const Vector& u0, const Vector& v0) {
  require_positive(u0, "u0");
  require_positive(v0, "v0");
  if (u0.size() != v0.size()) throw std::invalid_argument("u0 and v0 must have equal length");
  const Index d = u0.size();
  const Vector u2 = u0.array().square();
  const Vector v2 = v0.array().square();
  const Vector c = 2.0 * u0.cwiseProduct(v0);            // 2 u0 v0
  const Vector log_ratio = (u0.array() / v0.array()).log();  // ln(u0 / v0)

  LegendreSpec spec;
  spec.name = "hypentropy";
  spec.dual.dim = d;
  spec.dual.value = [u2, v2](const Vector& mu) {
    return 0.25 * (u2.array() * (4.0 * mu.array()).exp() + v2.array() * (-4.0 * mu.array()).exp()).sum();
  };
  spec.dual.gradient = [u2, v2](const Vector& mu) -> Vector {
    return u2.array() * (4.0 * mu.array()).exp() - v2.array() * (-4.0 * mu.array()).exp();
  };
  spec.dual.hessian = [u2, v2](const Vector& mu) -> Matrix {
    const Vector diag =
        4.0 * (u2.array() * (4.0 * mu.array()).exp() + v2.array() * (-4.0 * mu.array()).exp());
    return diag.asDiagonal();
  };
  spec.r = [c, log_ratio](const Vector& w) {
    double total = 0.0;
    for (Index i = 0; i < w.size(); ++i) {
      total += w[i] * std::asinh(w[i] / c[i]) - std::hypot(w[i], c[i]) - w[i] * log_ratio[i];
    }
    return 0.25 * total;
  };
  spec.grad_r = [c, log_ratio](const Vector& w) -> Vector {
    return 0.25 * ((w.array() / c.array()).asinh() - log_ratio.array());
  };
  spec.hess_r = [c](const Vector& w) -> Matrix {
    Vector diag(w.size());
    for (Index i = 0; i < w.size(); ++i) diag[i] = 0.25 / std::hypot(w[i], c[i]);
    return diag.asDiagonal();
  };
  spec.metric_inverse = [c](const Vector& w) -> Matrix {
    Vector diag(w.size());
    for (Index i = 0; i < w.size(); ++i) diag[i] = 4.0 * std::hypot(w[i], c[i]);
    return diag.asDiagonal();
  };
  return LegendreFunction(std::move(spec));
}

LegendreFunction entropy_from_init(const Vector& x0) {
  require_positive(x0, "x0");
  const Vector x2 = x0.array().square();
  LegendreSpec spec;
  spec.name = "entropy";
  spec.dual.dim = x0.size();
  spec.dual.value = [x2](const Vector& mu) {
    return 0.25 * (x2.array() * (4.0 * mu.array()).exp()).sum();
  };
  spec.dual.gradient = [x2](const Vector& mu) -> Vector {
    return x2.array() * (4.0 * mu.array()).exp();
  };
  spec.dual.hessian = [x2](const Vector& mu) -> Matrix {
    return (4.0 * x2.array() * (4.0 * mu.array()).exp()).matrix().asDiagonal();
  };
  spec.r = [x2](const Vector& w) {
    double total = 0.0;
    for (Index i = 0; i < w.size(); ++i) {
      if (w[i] < 0.0 || std::isnan(w[i])) return kInf;
      if (w[i] > 0.0) total += w[i] * (std::log(w[i] / x2[i]) - 1.0);
    }
    return 0.25 * total;
  };
  spec.grad_r = [x2](const Vector& w) -> Vector { return 0.25 * (w.array() / x2.array()).log(); };
  spec.hess_r = [](const Vector& w) -> Matrix { return (0.25 / w.array()).matrix().asDiagonal(); };
  spec.metric_inverse = [](const Vector& w) -> Matrix { return (4.0 * w).asDiagonal(); };
  spec.primal_domain = Domain::positive_orthant(0.0);
  spec.primal_has_boundary = true;
  return LegendreFunction(std::move(spec));
}

LegendreFunction euclidean(const Vector& w0) {
  const Index d = w0.size();
  if (d == 0) throw std::invalid_argument("euclidean potential needs a reference point");
  LegendreSpec spec;
  spec.name = "euclidean";
  spec.dual.dim = d;
  spec.dual.value = [w0](const Vector& mu) { return 0.5 * mu.squaredNorm() + w0.dot(mu); };
  spec.dual.gradient = [w0](const Vector& mu) -> Vector { return mu + w0; };
  spec.dual.hessian = [d](const Vector&) -> Matrix { return Matrix::Identity(d, d); };
  spec.r = [w0](const Vector& w) { return 0.5 * (w - w0).squaredNorm(); };
  spec.grad_r = [w0](const Vector& w) -> Vector { return w - w0; };
  spec.hess_r = [d](const Vector&) -> Matrix { return Matrix::Identity(d, d); };
  spec.metric_inverse = spec.hess_r;
  return LegendreFunction(std::move(spec));
}

DualPotential quadratic_family_dual(const CommutingQuadraticFamily& family, const Vector& x0) {
  require_dim(family.x_dim(), x0, "x0");
  const Index d = family.w_dim();
  Matrix images(family.x_dim(), d);
  for (Index i = 0; i < d; ++i) images.col(i) = family.matrices()[static_cast<std::size_t>(i)] * x0;
  Eigen::JacobiSVD<Matrix> svd(images);
  const Vector& s = svd.singularValues();
  const double smin = s[s.size() - 1];
  if (!(smin > 1e-10 * std::max(1.0, s[0]))) {
    throw NotRegularError("{A_i x0} are linearly dependent; the family is not regular at x0", smin);
  }

  DualPotential dual;
  dual.dim = d;
  dual.value = [family, x0](const Vector& mu) {
    return 0.25 * symmetric_expm_apply(family.combination(mu), x0).squaredNorm();
  };
  dual.gradient = [family, x0](const Vector& mu) -> Vector {
    const Vector y = symmetric_expm_apply(family.combination(mu), x0);
    Vector g(family.w_dim());
    for (Index j = 0; j < family.w_dim(); ++j) {
      g[j] = 0.5 * y.dot(family.matrices()[static_cast<std::size_t>(j)] * y);
    }
    return g;
  };
  dual.hessian = [family, x0](const Vector& mu) -> Matrix {
    const Vector y = symmetric_expm_apply(family.combination(mu), x0);
    Matrix ay(y.size(), family.w_dim());
    for (Index j = 0; j < family.w_dim(); ++j) {
      ay.col(j) = family.matrices()[static_cast<std::size_t>(j)] * y;
    }
    // (A_j y)^T (A_k y) = y^T A_j A_k y for symmetric A_j.
    return ay.transpose() * ay;
  };
  return dual;
}

LegendreFunction quadratic_family_potential(const CommutingQuadraticFamily& family,
                                            const Vector& x0) {
  return conjugate_numeric(quadratic_family_dual(family, x0), "quadratic_family");
}

LegendreFunction shifted(const LegendreFunction& f, const Vector& theta) {
  require_dim(f.dim(), theta, "theta");
  LegendreSpec spec;
  spec.name = f.name() + "-shifted";
  spec.provenance = f.provenance();
  spec.dual.dim = f.dim();
  const DualPotential base = f.dual();
  if (base.value) {
    spec.dual.value = [base, theta](const Vector& mu) { return base.value(mu + theta); };
  }
  spec.dual.gradient = [base, theta](const Vector& mu) -> Vector { return base.gradient(mu + theta); };
  spec.dual.hessian = [base, theta](const Vector& mu) -> Matrix { return base.hessian(mu + theta); };
  spec.dual.domain = Domain::from_predicate(
      [base, theta](const Vector& mu) { return base.domain.contains(mu + theta); },
      "shifted dual domain");
  spec.r = [f, theta](const Vector& w) { return f.r(w) - theta.dot(w); };
  spec.grad_r = [f, theta](const Vector& w) -> Vector { return f.grad_r(w) - theta; };
  spec.hess_r = [f](const Vector& w) -> Matrix { return f.hess_r(w); };
  spec.metric_inverse = [f](const Vector& w) -> Matrix { return f.metric_inverse(w); };
  spec.primal_domain =
      Domain::from_predicate([f](const Vector& w) { return f.contains(w); }, "int(dom R)");
  spec.primal_has_boundary = f.primal_has_boundary();
  return LegendreFunction(std::move(spec));
}

double bregman(const LegendreFunction& f, const Vector& w, const Vector& w_ref) {
  require_dim(f.dim(), w, "w");
  if (!f.contains(w_ref)) throw DomainError("bregman: reference point outside int(dom R)");
  const double rw = f.r(w);
  if (std::isinf(rw)) return kInf;
  return rw - f.r(w_ref) - f.grad_r(w_ref).dot(w - w_ref);
}

bool LegendreReport::passed() const {
  return strictly_convex && inversion_ok && reciprocity_ok && bregman_nonnegative &&
         (!boundary_checked || (boundary_monotone && boundary_unbounded)) && level_sets_bounded && divergence_continuous;
}

LegendreReport legendre_validate(const LegendreFunction& f, const LegendreValidationOptions& opt) {
  LegendreReport report;
  report.name = f.name();
  report.samples = opt.samples;
  report.domain_note =
      "int(dom R) is identified with range(grad Q), the computable proxy for the reachable set";
  const Index d = f.dim();
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto random_vector = [&](double scale) {
    Vector v(d);
    for (Index i = 0; i < d; ++i) v[i] = scale * normal(rng);
    return v;
  };

  report.min_hessian_eigenvalue = kInf;
  report.min_bregman = kInf;
  std::vector<Vector> ws;
  for (int s = 0; s < opt.samples; ++s) {
    const Vector mu = random_vector(opt.sample_scale);
    const Matrix hq = f.hess_q(mu);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(hq);
    report.min_hessian_eigenvalue = std::min(report.min_hessian_eigenvalue, eig.eigenvalues()[0]);

    const Vector w = f.grad_q(mu);
    try {
      const Vector back = f.grad_r(w);
      const double r1 = (back - mu).norm() / std::max(1.0, mu.norm());
      const double r2 = (f.grad_q(back) - w).norm() / std::max(1.0, w.norm());
      report.max_inversion_residual = std::max({report.max_inversion_residual, r1, r2});
      const Matrix prod = f.hess_r(w) * hq;
      report.max_reciprocity_residual = std::max(
          report.max_reciprocity_residual, (prod - Matrix::Identity(d, d)).norm());
    } catch (const Error&) {
      report.max_inversion_residual = kInf;
      report.max_reciprocity_residual = kInf;
    }
    report.max_self_divergence = std::max(report.max_self_divergence, std::abs(bregman(f, w, w)));
    if (!ws.empty()) {
      report.min_bregman = std::min(report.min_bregman, bregman(f, w, ws.back()));
      report.min_bregman = std::min(report.min_bregman, bregman(f, ws.back(), w));
    }
    ws.push_back(w);
  }
  report.strictly_convex = report.min_hessian_eigenvalue > 0.0;
  report.inversion_ok = report.max_inversion_residual <= opt.inversion_tol;
  report.reciprocity_ok = report.max_reciprocity_residual <= opt.reciprocity_tol;
  report.bregman_nonnegative = report.min_bregman >= -1e-10 && report.max_self_divergence <= 1e-10;

  const Vector center = f.grad_q(Vector::Zero(d));

  // Essential smoothness: ||grad R|| along a geometric approach to the boundary.
  if (f.primal_has_boundary() && opt.boundary_target) {
    report.boundary_checked = true;
    const Vector& target = *opt.boundary_target;
    const Vector start = opt.boundary_start ? *opt.boundary_start : center;
    double previous = -kInf;
    for (int k = 1; k <= opt.boundary_probes; ++k) {
      const Vector w = target + std::ldexp(1.0, -k) * (start - target);
      const double norm = f.grad_r(w).norm();
      report.boundary_gradient_norms.push_back(norm);
      if (!(norm > previous)) report.boundary_monotone = false;
      previous = norm;
    }
    // A bounded gradient shows up as geometrically shrinking increments.
    const auto& norms = report.boundary_gradient_norms;
    if (norms.size() >= 3) {
      const double first = norms[1] - norms[0];
      const double last = norms.back() - norms[norms.size() - 2];
      report.boundary_unbounded = last >= 1e-3 * first;
    }
  }

  // Level sets {y : D(w, y) <= alpha} probed along rays from w.
  {
    std::vector<Vector> directions;
    for (Index i = 0; i < d; ++i) {
      directions.push_back(Vector::Unit(d, i));
      directions.push_back(-Vector::Unit(d, i));
    }
    for (int k = 0; k < opt.level_rays; ++k) directions.push_back(random_vector(1.0).normalized());
    report.level_sets_bounded = true;
    for (const Vector& u : directions) {
      double inside_radius = 0.0;
      bool exited = false;
      for (double s = 1.0 / 64.0; s <= opt.level_max_radius; s *= 2.0) {
        const Vector y = center + s * u;
        if (!f.contains(y)) {
          exited = true;
          break;
        }
        const double div = bregman(f, center, y);
        if (div > opt.level) {
          exited = true;
          break;
        }
        inside_radius = s;
      }
      report.level_set_sup_radius = std::max(report.level_set_sup_radius, inside_radius);
      if (!exited) report.level_sets_bounded = false;
    }
  }

  // Divergence continuity D(w, w_k) -> 0 for w_k -> w, at an interior point and,
  // when available, at the boundary target.
  {
    std::vector<std::pair<Vector, Vector>> limits;  // (limit point, approach direction)
    limits.emplace_back(center, random_vector(1.0).normalized());
    if (opt.boundary_target) {
      const Vector start = opt.boundary_start ? *opt.boundary_start : center;
      limits.emplace_back(*opt.boundary_target, start - *opt.boundary_target);
    }
    report.divergence_continuous = true;
    for (const auto& [limit, direction] : limits) {
      double first = 0.0, last = 0.0;
      for (int k = 1; k <= 20; ++k) {
        const Vector wk = limit + std::ldexp(1.0, -k) * direction;
        if (!f.contains(wk)) {
          report.divergence_continuous = false;
          break;
        }
        last = bregman(f, limit, wk);
        if (k == 1) first = last;
        report.continuity_divergences.push_back(last);
      }
      if (!(std::abs(last) <= 1e-5 * std::max(1.0, first))) report.divergence_continuous = false;
    }
  }
  return report;
}

}  // namespace reparam
