#include <doctest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <limits>
#include <random>

#include "reparam/errors.hpp"
#include "reparam/families.hpp"
#include "reparam/legendre.hpp"

using namespace reparam;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

const Vector kU0 = vec({0.5, 0.6, 0.7, 0.8});
const Vector kV0 = vec({0.9, 0.4, 0.6, 0.5});

}  // namespace

TEST_CASE("hypentropy gradient matches root-finding on the dual gradient") {
  const LegendreFunction h = hypentropy_from_init(kU0, kV0);
  // Frozen from bracketed root finding of u0^2 e^{4 mu} - v0^2 e^{-4 mu} = w.
  const Vector expected =
      vec({0.22880920378484437, -0.513174063619815, 0.4141848838139424, -0.11750090731143392});
  const Vector w = vec({0.3, -1.2, 2.5, 0.0});
  CHECK((h.grad_r(w) - expected).norm() < 1e-12);
  CHECK((h.grad_q(expected) - w).norm() < 1e-12);
  CHECK(h.grad_r(kU0.cwiseAbs2() - kV0.cwiseAbs2()).norm() < 1e-14);
}

TEST_CASE("closed-form and numeric conjugates agree") {
  const LegendreFunction h = hypentropy_from_init(kU0, kV0);
  const LegendreFunction n = conjugate_numeric(h.dual());
  CHECK(n.provenance() == Provenance::numeric_conjugate);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z(0.0, 2.0);
  for (int k = 0; k < 20; ++k) {
    Vector w(4);
    for (Index i = 0; i < 4; ++i) w[i] = z(rng);
    CHECK(std::abs(h.r(w) - n.r(w)) < 1e-9 * std::max(1.0, std::abs(h.r(w))));
    CHECK((h.grad_r(w) - n.grad_r(w)).norm() < 1e-9);
    CHECK((h.hess_r(w) - n.hess_r(w)).norm() < 1e-8 * h.hess_r(w).norm());
  }
}

TEST_CASE("entropy potential") {
  const Vector x0 = vec({1.0, 0.5});
  const LegendreFunction e = entropy_from_init(x0);
  CHECK(e.primal_has_boundary());
  const Vector w = vec({0.3, 2.0});
  Matrix expected = Matrix::Zero(2, 2);
  expected.diagonal() = 4.0 * w;
  CHECK((e.metric_inverse(w) - expected).norm() < 1e-14);
  CHECK((e.hess_r(w) * e.metric_inverse(w) - Matrix::Identity(2, 2)).norm() < 1e-12);
  CHECK(e.r(vec({-0.1, 1.0})) == std::numeric_limits<double>::infinity());
  // Continuous extension to the boundary with 0 ln 0 = 0.
  CHECK(std::isfinite(e.r(vec({0.0, 1.0}))));
  CHECK_THROWS_AS(e.grad_r(vec({0.0, 1.0})), DomainError);
  CHECK_THROWS_AS(solve_conjugate(e.dual(), vec({-1.0, 1.0})), ConvergenceError);
  const LegendreFunction n = conjugate_numeric(e.dual());
  CHECK((n.grad_r(w) - e.grad_r(w)).norm() < 1e-9);
  CHECK(std::isinf(n.r(vec({-1.0, 1.0}))));
}

TEST_CASE("Bregman divergence") {
  const Vector w0 = vec({0.1, 0.2, -0.3, 0.4});
  const LegendreFunction eu = euclidean(w0);
  const Vector a = vec({1.0, 0.0, 2.0, -1.0}), b = vec({0.5, 0.5, 0.5, 0.5});
  CHECK(bregman(eu, a, b) == doctest::Approx(0.5 * (a - b).squaredNorm()));
  const LegendreFunction h = hypentropy_from_init(kU0, kV0);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> z;
  for (int k = 0; k < 50; ++k) {
    Vector p(4), q(4);
    for (Index i = 0; i < 4; ++i) {
      p[i] = z(rng);
      q[i] = z(rng);
    }
    CHECK(bregman(h, p, q) >= -1e-14);
    CHECK(std::abs(bregman(h, p, p)) < 1e-14);
  }
}

TEST_CASE("quadratic family dual gradient is G of the exponential flow") {
  const CommutingQuadraticFamily fam = random_commuting_family(4, 2, 3);
  const Parametrization g = fam.parametrization();
  const Vector x0 = vec({0.3, -0.8, 1.1, 0.4});
  const DualPotential q = quadratic_family_dual(fam, x0);
  const Vector mu = vec({0.2, -0.35});
  const Vector psi = (mu[0] * fam.matrices()[0] + mu[1] * fam.matrices()[1]).exp() * x0;
  CHECK((q.gradient(mu) - g(psi)).norm() < 1e-10);
  CHECK(q.value(mu) == doctest::Approx(0.25 * psi.squaredNorm()).epsilon(1e-12));
  // Central differences of the gradient reproduce the Hessian.
  const double h = 1e-5;
  Matrix fd(2, 2);
  for (Index k = 0; k < 2; ++k) {
    const Vector e = Vector::Unit(2, k) * h;
    fd.col(k) = (q.gradient(mu + e) - q.gradient(mu - e)) / (2.0 * h);
  }
  CHECK((fd - q.hessian(mu)).norm() < 1e-6 * q.hessian(mu).norm());

  const LegendreFunction f = quadratic_family_potential(fam, x0);
  CHECK(f.grad_r(g(x0)).norm() < 1e-9);
  CHECK((f.grad_r(g(psi)) - mu).norm() < 1e-8);

  // A_1 x0 and A_2 x0 parallel: the dual Hessian is singular.
  Matrix a1 = Matrix::Identity(2, 2), a2 = 2.0 * Matrix::Identity(2, 2);
  CHECK_THROWS_AS(quadratic_family_dual(CommutingQuadraticFamily({a1, a2}), vec({1.0, 1.0})),
                  NotRegularError);
}

TEST_CASE("shifted potential moves the minimizer") {
  const LegendreFunction eu = euclidean(Vector::Zero(3));
  const Vector theta = vec({1.0, -2.0, 0.5});
  const LegendreFunction s = shifted(eu, theta);
  CHECK(s.grad_r(theta).norm() < 1e-14);
  CHECK(s.r(Vector::Zero(3)) == doctest::Approx(0.0));
}

TEST_CASE("Legendre validation passes for the builtin potentials") {
  LegendreValidationOptions opts;
  opts.samples = 20;
  const LegendreReport hr = legendre_validate(hypentropy_from_init(kU0, kV0), opts);
  CHECK(hr.passed());
  CHECK(hr.level_sets_bounded);
  CHECK(hr.min_bregman >= -1e-12);

  LegendreValidationOptions eopts = opts;
  eopts.boundary_target = vec({0.0, 0.0});
  const LegendreReport er = legendre_validate(entropy_from_init(vec({1.0, 0.7})), eopts);
  CHECK(er.passed());
  CHECK(er.boundary_checked);
  CHECK(er.boundary_monotone);
  CHECK(er.divergence_continuous);

  CHECK(legendre_validate(euclidean(vec({0.1, 0.2})), opts).passed());
}

TEST_CASE("Legendre validation rejects a potential with bounded boundary gradient") {
  // R(w) = 1/2 w^2 - w on w > 0: grad R = w - 1 stays bounded as w -> 0, so R
  // is not essentially smooth. Q(mu) = 1/2 (mu + 1)^2 is its conjugate on the
  // sampled dual region.
  LegendreSpec spec;
  spec.name = "half_line_quadratic";
  spec.dual.dim = 1;
  spec.dual.value = [](const Vector& mu) { return 0.5 * (mu.array() + 1.0).square().sum(); };
  spec.dual.gradient = [](const Vector& mu) { return Vector(mu.array() + 1.0); };
  spec.dual.hessian = [](const Vector&) { return Matrix::Identity(1, 1); };
  spec.r = [](const Vector& w) {
    return w[0] < 0.0 ? std::numeric_limits<double>::infinity() : 0.5 * w.squaredNorm() - w[0];
  };
  spec.grad_r = [](const Vector& w) { return Vector(w.array() - 1.0); };
  spec.hess_r = [](const Vector&) { return Matrix::Identity(1, 1); };
  spec.primal_domain = Domain::positive_orthant(0.0);
  spec.primal_has_boundary = true;
  LegendreValidationOptions opts;
  opts.sample_scale = 0.05;
  opts.boundary_target = Vector::Zero(1);
  const LegendreReport rep = legendre_validate(LegendreFunction(spec), opts);
  CHECK(rep.inversion_ok);
  CHECK(rep.boundary_monotone);
  CHECK_FALSE(rep.boundary_unbounded);
  CHECK_FALSE(rep.passed());
}
