#include <doctest.h>

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <random>

#include "reparam/derivatives.hpp"
#include "reparam/errors.hpp"
#include "reparam/families.hpp"
#include "reparam/linalg.hpp"
#include "reparam/psi.hpp"

using namespace reparam;

namespace {

// Pade-approximant exponential, independent of the eigendecomposition route.
Vector pade_psi(const CommutingQuadraticFamily& fam, const Vector& x, const Vector& mu) {
  Matrix s = Matrix::Zero(fam.x_dim(), fam.x_dim());
  for (Index i = 0; i < fam.w_dim(); ++i) s += mu[i] * fam.matrices()[i];
  return s.exp() * x;
}

Vector gaussian(Index n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> z(0.0, scale);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = z(rng);
  return v;
}

IntegratorConfig tight() {
  IntegratorConfig cfg;
  cfg.abs_tol = cfg.rel_tol = 1e-12;
  return cfg;
}

}  // namespace

TEST_CASE("symmetric exponential matches the Pade exponential") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    Matrix a(4, 4);
    for (Index i = 0; i < 4; ++i)
      for (Index j = 0; j < 4; ++j) a(i, j) = std::normal_distribution<double>()(rng);
    const Matrix s = 0.5 * (a + a.transpose());
    const Matrix ref = s.exp();
    CHECK((symmetric_expm(s) - ref).norm() < 1e-10 * ref.norm());
    const Vector x = gaussian(4, rng);
    CHECK((symmetric_expm_apply(s, x) - ref * x).norm() < 1e-10 * ref.norm() * x.norm());
  }
}

TEST_CASE("psi closed form and flow composition agree with the Pade oracle") {
  std::mt19937_64 rng(9);
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const CommutingQuadraticFamily fam = random_commuting_family(4, 3, seed);
    const Parametrization g = fam.parametrization();
    const Vector x = gaussian(4, rng);
    const Vector mu = gaussian(3, rng, 0.3);
    const Vector ref = pade_psi(fam, x, mu);
    CHECK((psi_closed_form(fam, x, mu) - ref).norm() < 1e-10 * std::max(1.0, ref.norm()));
    CHECK((psi(g, x, mu, tight()) - ref).norm() < 1e-8 * std::max(1.0, ref.norm()));
    // Commuting flows: any application order gives the same point.
    CHECK((psi(g, x, mu, tight(), {0, 1, 2}) - ref).norm() < 1e-8 * std::max(1.0, ref.norm()));
  }
}

TEST_CASE("psi for u2v2 has the exponential closed form") {
  // Flow along +grad(u_i^2 - v_i^2) for time mu_i: u_i e^{2 mu_i}, v_i e^{-2 mu_i}.
  const Parametrization g = u2_minus_v2(2);
  Vector x(4), mu(2);
  x << 0.5, 0.8, 0.3, 0.9;
  mu << 0.4, -0.7;
  Vector expected(4);
  expected << 0.5 * std::exp(0.8), 0.8 * std::exp(-1.4), 0.3 * std::exp(-0.8), 0.9 * std::exp(1.4);
  CHECK((psi(g, x, mu, tight()) - expected).norm() < 1e-9);
}

TEST_CASE("psi on non-commuting U U^T depends on the order") {
  const Parametrization g = select_coordinates(symmetric_factorization(2, 1), {0, 1});
  Vector u(2), mu(2);
  u << 1.0, 0.5;
  mu << 0.3, 0.3;
  const Vector a = psi(g, u, mu, tight(), {0, 1});
  const Vector b = psi(g, u, mu, tight(), {1, 0});
  CHECK((a - b).norm() > 1e-3);
}

TEST_CASE("regularity of the Jacobian") {
  const Parametrization g = symmetric_factorization(2, 1);
  const RegularityReport rep = check_regular(g, Vector::Unit(2, 0), 1e-8);
  CHECK_FALSE(rep.regular);  // d = 3 > D = 2
  CHECK(rep.sigma_min == 0.0);
  Vector x(4);
  x << 0.5, 0.6, 0.7, 0.8;
  const RegularityReport ok = check_regular(u2_minus_v2(2), x, 1e-8);
  CHECK(ok.regular);
  CHECK(ok.sigma_min > 1.0);
  CHECK(ok.singular_values.size() == 2);
}

TEST_CASE("domain probe finds the escape time of a cubic potential") {
  // G(x) = x^3 / 3: the ascent flow x' = x^2 from x0 escapes at t = 1/x0;
  // the reversed flow decays and never escapes.
  ParametrizationSpec spec;
  spec.name = "cubic";
  spec.x_dim = 1;
  spec.w_dim = 1;
  spec.eval = [](const Vector& x) { return Vector(x.array().cube() / 3.0); };
  spec.jacobian = [](const Vector& x) { return Matrix::Constant(1, 1, x[0] * x[0]); };
  const Parametrization g(spec);
  const Hyperrectangle box = domain_probe(g, Vector::Constant(1, 2.0), 5.0, IntegratorConfig{});
  REQUIRE(box.axes.size() == 1);
  CHECK(box.axes[0].upper == doctest::Approx(0.5).epsilon(1e-4));
  CHECK_FALSE(box.axes[0].upper_beyond_budget);
  CHECK(box.axes[0].lower_beyond_budget);
  CHECK(box.contains(Vector::Constant(1, 0.4)));
  CHECK_FALSE(box.contains(Vector::Constant(1, 0.6)));

  try {
    psi(g, Vector::Constant(1, 2.0), Vector::Constant(1, 1.0), IntegratorConfig{});
    FAIL("expected PsiEscapeError");
  } catch (const PsiEscapeError& e) {
    CHECK(e.axis() == 0);
    CHECK(e.upper());
  }
}

TEST_CASE("row and null space helpers") {
  Matrix a(2, 3);
  a << 1, 0, 1, 0, 1, 1;
  const Matrix row = row_space_basis(a);
  const Matrix null = null_space_basis(a);
  CHECK(row.cols() == 2);
  CHECK(null.cols() == 1);
  CHECK((a * null).norm() < 1e-12);
  CHECK(distance_to_span(row, a.row(0).transpose()) < 1e-12);
  CHECK(distance_to_span(row, null.col(0)) == doctest::Approx(1.0));
}
