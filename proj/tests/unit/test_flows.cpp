#include <doctest.h>

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "reparam/families.hpp"
#include "reparam/flows.hpp"
#include "reparam/legendre.hpp"
#include "reparam/loss.hpp"

using namespace reparam;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Matrix design() {
  Matrix z(2, 4);
  z << 1.0, -0.5, 0.3, 2.0, 0.2, 1.5, -1.0, 0.4;
  return z;
}

const Vector kY = vec({1.0, -0.7});
const Vector kU0 = vec({0.5, 0.6, 0.7, 0.8});
const Vector kV0 = vec({0.9, 0.4, 0.6, 0.5});

Vector stacked_init() {
  Vector x(8);
  x << kU0, kV0;
  return x;
}

FlowOptions tight() {
  FlowOptions opts;
  opts.integrator.abs_tol = opts.integrator.rel_tol = 1e-12;
  return opts;
}

}  // namespace

TEST_CASE("identity parametrization with quadratic loss decays exponentially") {
  const Vector target = vec({1.0, -2.0});
  const Vector x0 = vec({0.5, 0.5});
  const Trajectory traj = gradient_flow(identity_parametrization(2), quadratic_loss(target), x0, 3.0);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const Vector expected = target + std::exp(-traj.times[k]) * (x0 - target);
    CHECK((traj.w[k] - expected).norm() < 1e-8);
    CHECK((traj.mu[k] - (traj.w[k] - x0)).norm() < 1e-8);
  }
}

TEST_CASE("u2v2 gradient flow matches an independent high-order solve") {
  const Trajectory traj =
      gradient_flow(u2_minus_v2(4), regression_loss(design(), kY), stacked_init(), 5.0, tight());
  // Frozen from DOP853 at rtol = atol = 1e-13.
  const Vector expected =
      vec({-0.44857499883464635, -0.1727506440535335, 0.5883009146361867, 0.5928547012085651});
  CHECK(traj.end_time() == doctest::Approx(5.0));
  CHECK((traj.w.back() - expected).norm() < 1e-9);
}

TEST_CASE("loss is non-increasing along gradient flow") {
  const Loss loss = regression_loss(design(), kY);
  const Trajectory traj = gradient_flow(u2_minus_v2(4), loss, stacked_init(), 10.0);
  for (std::size_t k = 1; k < traj.size(); ++k) {
    CHECK(loss.value(traj.w[k]) <= loss.value(traj.w[k - 1]) + 1e-12);
  }
}

TEST_CASE("mirror flow with a linear loss moves theta linearly") {
  const LegendreFunction h = hypentropy_from_init(kU0, kV0);
  const Vector c = vec({0.3, -0.2, 0.1, 0.05});
  const Vector w0 = kU0.cwiseAbs2() - kV0.cwiseAbs2();
  const Trajectory traj = mirror_flow(h, linear_loss(c), w0, 2.0);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const Vector theta = -c * traj.times[k];
    CHECK((traj.theta[k] - theta).norm() < 1e-9);
    CHECK((traj.w[k] - h.grad_q(theta)).norm() < 1e-9);
  }
}

TEST_CASE("dual conservation holds across loss breakpoints") {
  const LegendreFunction e = entropy_from_init(vec({1.0, 0.8, 0.6}));
  std::vector<TimeDependentLoss::Segment> segs;
  segs.push_back({0.0, linear_loss(vec({0.5, -0.2, 0.1}))});
  segs.push_back({0.7, linear_loss(vec({-0.3, 0.4, 0.2}))});
  segs.push_back({1.9, quadratic_loss(vec({0.2, 0.3, 0.4}))});
  const TimeDependentLoss loss(segs);
  const Trajectory traj = mirror_flow(e, loss, vec({1.0, 0.64, 0.36}), 2.5);
  CHECK(dual_conservation_residual(traj, loss) < 1e-4);
  // Breakpoints are sampled exactly.
  bool has_07 = false;
  for (double t : traj.times) has_07 = has_07 || t == 0.7;
  CHECK(has_07);
  for (const auto& w : traj.w) CHECK(w.minCoeff() > 0.0);

  const Trajectory riem = riemannian_flow(e, loss, vec({1.0, 0.64, 0.36}), 2.5);
  CHECK((riem.w.back() - traj.w.back()).norm() < 1e-7);
}

TEST_CASE("equivalence of gradient flow and mirror flow on u2v2") {
  const LegendreFunction h = hypentropy_from_init(kU0, kV0);
  const EquivalenceReport rep =
      equivalence_report(u2_minus_v2(4), h, regression_loss(design(), kY), stacked_init(), 5.0);
  CHECK(rep.max_deviation < 1e-7);
  CHECK(rep.init_dual_norm < 1e-12);
  CHECK(rep.deviations.size() == rep.times.size());

  // A potential not induced by the initialization is refused.
  CHECK_THROWS_AS(equivalence_report(u2_minus_v2(4), hypentropy_from_init(kV0, kU0),
                                     regression_loss(design(), kY), stacked_init(), 1.0),
                  std::invalid_argument);
}

TEST_CASE("psi reconstruction along a trajectory") {
  const Trajectory traj =
      gradient_flow(u2_minus_v2(4), regression_loss(design(), kY), stacked_init(), 5.0, tight());
  const ReconstructionReport rep = psi_reconstruction_check(u2_minus_v2(4), traj, tight().integrator);
  CHECK_FALSE(rep.escaped);
  CHECK(rep.times.size() == 10);
  CHECK(rep.max_error < 1e-8);

  const CommutingQuadraticFamily fam = random_commuting_family(4, 2, 1);
  const Vector x0 = vec({0.4, -0.3, 0.8, 0.2});
  const Trajectory q = gradient_flow(fam.parametrization(), quadratic_loss(vec({0.1, -0.2})), x0, 3.0,
                                     tight());
  CHECK(psi_reconstruction_check(fam, q).max_error < 1e-8);
}

TEST_CASE("convergence rule stops an open-ended run") {
  FlowOptions opts;
  ConvergenceRule rule;
  rule.velocity_tol = 1e-6;
  opts.convergence = rule;
  const Trajectory traj =
      gradient_flow(identity_parametrization(2), quadratic_loss(vec({1.0, 1.0})), vec({0.0, 0.0}),
                    1e3, opts);
  CHECK(traj.converged);
  CHECK(traj.end_time() < 100.0);
  CHECK(traj.final_velocity < 1e-5);
}

TEST_CASE("time-dependent loss validation and sampling grid") {
  CHECK_THROWS_AS(TimeDependentLoss({{0.5, zero_loss(2)}}), std::invalid_argument);
  CHECK_THROWS_AS(TimeDependentLoss({{0.0, zero_loss(2)}, {0.0, zero_loss(2)}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(TimeDependentLoss({{0.0, zero_loss(2)}, {1.0, zero_loss(3)}}),
                  std::invalid_argument);
  const TimeDependentLoss loss({{0.0, zero_loss(2)}, {1.25, linear_loss(vec({1.0, 0.0}))}});
  CHECK(loss.segment_index(0.0) == 0);
  CHECK(loss.segment_index(1.25) == 1);
  CHECK(loss.breakpoints() == std::vector<double>{1.25});
  const std::vector<double> grid = sample_grid(2.0, loss, 5);
  CHECK(grid.front() == 0.0);
  CHECK(grid.back() == 2.0);
  CHECK(std::is_sorted(grid.begin(), grid.end()));
  CHECK(std::find(grid.begin(), grid.end(), 1.25) != grid.end());
}

TEST_CASE("csv output") {
  const Trajectory traj =
      gradient_flow(elementwise_square(2), quadratic_loss(vec({1.0, 2.0})), vec({0.5, 0.5}), 1.0);
  std::ostringstream out;
  write_csv(traj, out);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,x_1,x_2,w_1,w_2,mu_1,mu_2");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == traj.size());
}
