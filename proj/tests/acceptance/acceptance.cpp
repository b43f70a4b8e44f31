#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "reparam/commutation.hpp"
#include "reparam/derivatives.hpp"
#include "reparam/errors.hpp"
#include "reparam/families.hpp"
#include "reparam/flows.hpp"
#include "reparam/implicit_bias.hpp"
#include "reparam/legendre.hpp"
#include "reparam/linalg.hpp"
#include "reparam/psi.hpp"

using namespace reparam;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Vector uniform(Index n, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
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

Vector u2v2_init(double alpha, Index d) { return Vector::Constant(2 * d, alpha); }

// Independent finite-difference nested bracket, built from evaluations of G only.
using Field = std::function<Vector(const Vector&)>;

Field fd_gradient(const Parametrization& g, Index i) {
  return [g, i](const Vector& x) {
    const double h = 1e-4;
    Vector out(x.size());
    for (Index k = 0; k < x.size(); ++k) {
      Vector xp = x, xm = x;
      xp[k] += h;
      xm[k] -= h;
      out[k] = (g(xp)[i] - g(xm)[i]) / (2.0 * h);
    }
    return out;
  };
}

Field fd_bracket(Field a, Field b) {
  return [a, b](const Vector& x) {
    const double h = 1e-3;
    const Vector ax = a(x), bx = b(x);
    return Vector((b(x + h * ax) - b(x - h * ax)) / (2.0 * h) - (a(x + h * bx) - a(x - h * bx)) / (2.0 * h));
  };
}

Outcome equivalence() {
  double worst = 0.0, slowest = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const Vector x = uniform(8, rng, 0.2, 1.0);
    const RegressionProblem prob = random_problem(2, 4, seed);
    const auto start = std::chrono::steady_clock::now();
    const EquivalenceReport rep = equivalence_report(u2_minus_v2(4), hypentropy_from_init(x.head(4), x.tail(4)),
                                                     prob.loss(), x, 50.0);
    slowest = std::max(slowest, seconds_since(start));
    worst = std::max(worst, rep.max_deviation);
  }
  return {worst <= 1e-6 && slowest < 10.0,
          fmt("max deviation %.3g over seeds 0-9, slowest seed %.3f s", worst, slowest)};
}

Outcome legendre_construction() {
  double worst = 0.0;
  int draws = 0;
  std::mt19937_64 rng(2024);
  for (std::uint64_t k = 0; draws < 100; ++k) {
    const Index D = 2 + static_cast<Index>(k % 5);
    const Index d = std::min<Index>(D, 1 + static_cast<Index>(k % 3));
    const CommutingQuadraticFamily fam = random_commuting_family(D, d, k);
    const Vector x0 = gaussian(D, rng);
    const Vector mu = gaussian(d, rng, 0.3);
    DualPotential q;
    try {
      q = quadratic_family_dual(fam, x0);
    } catch (const NotRegularError&) {
      continue;
    }
    const Parametrization g = fam.parametrization();
    worst = std::max(worst, (q.gradient(mu) - g(psi(g, x0, mu, tight()))).norm());
    ++draws;
  }
  return {worst <= 1e-8, fmt("max |grad Q(mu) - G(psi)| %.3g over %.0f draws, D<=6, d<=3", worst, draws)};
}

Outcome conjugates() {
  std::mt19937_64 rng(31);
  const Vector u0 = uniform(4, rng, 0.2, 1.0), v0 = uniform(4, rng, 0.2, 1.0);
  const LegendreFunction h = hypentropy_from_init(u0, v0);
  const LegendreFunction n = conjugate_numeric(h.dual());
  double grad_err = 0.0;
  for (int k = 0; k < 50; ++k) {
    const Vector w = gaussian(4, rng, 2.0);
    grad_err = std::max(grad_err, (h.grad_r(w) - n.grad_r(w)).norm());
  }
  const LegendreFunction e = entropy_from_init(uniform(4, rng, 0.2, 1.5));
  double metric_err = 0.0;
  for (int k = 0; k < 50; ++k) {
    const Vector w = uniform(4, rng, 1e-3, 5.0);
    Matrix expected = Matrix::Zero(4, 4);
    expected.diagonal() = 4.0 * w;
    const Matrix inv = e.hess_r(w).inverse();
    metric_err = std::max(metric_err, (inv - expected).norm() / std::max(1.0, expected.norm()));
  }
  return {grad_err <= 1e-8 && metric_err <= 1e-8,
          fmt("hypentropy grad R vs numeric conjugate %.3g; entropy inverse Hessian vs 4 diag(w) %.3g", grad_err,
              metric_err)};
}

struct BiasRun {
  BiasReport report;
  KktSolution oracle;
  FeasibleSampling sampling;
  double seconds = 0.0;
};

const BiasRun& benchmark_bias() {
  static const BiasRun run = [] {
    BiasRun r;
    const RegressionProblem prob = random_problem(2, 4, 0);
    const Vector x = u2v2_init(0.5, 4);
    const LegendreFunction h = hypentropy_from_init(x.head(4), x.tail(4));
    const auto start = std::chrono::steady_clock::now();
    r.report = run_bias_experiment(u2_minus_v2(4), h, prob, x);
    r.seconds = seconds_since(start);
    r.oracle = kkt_oracle(h, prob);
    r.sampling = feasible_sampling_check(h, prob, r.oracle.w, 10000, 7);
    return r;
  }();
  return run;
}

Outcome implicit_bias() {
  const BiasRun& run = benchmark_bias();
  const BiasReport& rep = run.report;
  const bool ok = rep.interpolation_residual <= 1e-6 && rep.gap <= 1e-6 && run.oracle.kkt_residual <= 1e-8 &&
                  run.sampling.improvements == 0;
  return {ok, fmt("residual %.3g, R(w_inf) - R(w*) %.3g, oracle KKT residual %.3g", rep.interpolation_residual,
                  rep.gap, run.oracle.kkt_residual) +
                  fmt(", %.0f of %.0f feasible samples improve", run.sampling.improvements, run.sampling.samples)};
}

Outcome bregman_projection() {
  const BiasReport& rep = benchmark_bias().report;
  return {std::abs(rep.bregman_gap) <= 1e-6 && rep.dual_containment <= 1e-6,
          fmt("Bregman gap %.3g, dual increment distance to range(Z^T) %.3g", rep.bregman_gap, rep.dual_containment)};
}

Outcome commuting_verdicts() {
  std::mt19937_64 rng(6);
  Matrix lambdas(2, 3);
  lambdas << 1.0, -2.0, 0.5, 0.3, 0.0, 1.0;
  std::vector<Parametrization> commuting{identity_parametrization(3), elementwise_square(3), u2_minus_v2(3),
                                         diagonal_lambda(lambdas)};
  for (std::uint64_t s = 0; s < 3; ++s) commuting.push_back(random_commuting_family(5, 3, s).parametrization());

  double worst_commuting = 0.0, worst_flow = 0.0;
  bool verdicts = true;
  for (const auto& g : commuting) {
    std::vector<Vector> samples;
    for (int k = 0; k < 50; ++k) samples.push_back(uniform(g.x_dim(), rng, 0.1, 2.0));
    const BracketReport rep = commuting_check(g, samples, 1e-8);
    verdicts = verdicts && rep.verdict == "commuting";
    worst_commuting = std::max(worst_commuting, rep.max_bracket_norm);
    for (double s : {0.25, 1.0}) {
      for (double t : {0.5, 1.0}) {
        worst_flow = std::max(worst_flow, flow_commutation_test(g, samples[0], 0, g.w_dim() - 1, s, t, tight()));
      }
    }
  }

  const Parametrization uut = symmetric_factorization(2, 1);
  std::vector<Vector> samples;
  while (samples.size() < 100) {
    const Vector u = uniform(2, rng, -1.5, 1.5);
    if (u.norm() > 0.1) samples.push_back(u);
  }
  const BracketReport rep = commuting_check(uut, samples, 1e-8);
  double weakest = INFINITY;
  for (double v : rep.point_worst) weakest = std::min(weakest, v);
  const bool ok = verdicts && worst_flow <= 1e-8 && rep.verdict == "non-commuting" && weakest > 1e-1;
  return {ok, fmt("commuting families max bracket %.3g, flow discrepancy %.3g; U U^T min bracket %.3g", worst_commuting,
                  worst_flow, weakest)};
}

Outcome necessary_condition() {
  const Parametrization g = select_coordinates(symmetric_factorization(2, 1), {0, 1});
  const Vector u = Vector::Unit(2, 0);
  const BracketReport rep = necessary_condition_check(g, u, 3);
  const double depth3 = rep.depth_max_projection.at(1);

  Matrix jac(2, 2);
  for (Index i = 0; i < 2; ++i) jac.row(i) = fd_gradient(g, i)(u).transpose();
  const Matrix basis = row_space_basis(jac);
  double oracle = 0.0;
  for (Index a = 0; a < 2; ++a) {
    for (Index b = 0; b < 2; ++b) {
      for (Index c = 0; c < 2; ++c) {
        const Vector v = fd_bracket(fd_bracket(fd_gradient(g, a), fd_gradient(g, b)), fd_gradient(g, c))(u);
        oracle = std::max(oracle, (basis * (basis.transpose() * v)).norm());
      }
    }
  }
  const double rel = std::abs(depth3 - oracle) / oracle;
  return {depth3 > 1e-2 && rel <= 1e-4,
          fmt("depth-3 projection %.6g, finite-difference oracle %.6g, relative difference %.3g", depth3, oracle, rel)};
}

Outcome commutator_loops() {
  Vector u(2);
  u << 1.0, 0.5;
  const std::vector<double> deltas = log_spaced(1e-1, 1e-3, 5);
  const LoopResult uut = commutator_loop(symmetric_factorization(2, 1), u, {0, 1}, deltas, tight());
  Vector x(6);
  x << 0.5, 0.8, 1.1, 0.7, 0.4, 0.9;
  const LoopResult sep = commutator_loop(u2_minus_v2(3), x, {0, 1}, deltas, tight());
  double worst = 0.0;
  for (double v : sep.displacements) worst = std::max(worst, v);
  const bool ok = uut.slope >= 0.9 && uut.slope <= 1.1 && uut.cosine >= 0.95 && worst <= 1e-8;
  return {ok, fmt("U U^T slope %.4f, cosine %.6f; u2v2 max displacement %.3g", uut.slope, uut.cosine, worst)};
}

Outcome reconstruction() {
  double worst = 0.0;
  bool escaped = false;
  {
    std::mt19937_64 rng(0);
    const Vector x = uniform(8, rng, 0.2, 1.0);
    FlowOptions opts;
    opts.integrator = tight();
    const Trajectory traj = gradient_flow(u2_minus_v2(4), random_problem(2, 4, 0).loss(), x, 50.0, opts);
    const ReconstructionReport rep = psi_reconstruction_check(u2_minus_v2(4), traj, tight(), 10);
    worst = std::max(worst, rep.max_error);
    escaped = escaped || rep.escaped;
  }
  {
    const CommutingQuadraticFamily fam = random_commuting_family(5, 2, 3);
    std::vector<TimeDependentLoss::Segment> segs;
    Vector c1(2), c2(2), target(2);
    c1 << 0.3, -0.2;
    c2 << -0.1, 0.25;
    target << 0.4, -0.3;
    segs.push_back({0.0, linear_loss(c1)});
    segs.push_back({2.0, linear_loss(c2)});
    segs.push_back({4.0, quadratic_loss(target)});
    const TimeDependentLoss loss(segs);
    std::mt19937_64 rng(3);
    const Vector x0 = gaussian(5, rng);
    FlowOptions opts;
    opts.integrator = tight();
    const Trajectory traj = gradient_flow(fam.parametrization(), loss, x0, 6.0, opts);
    const ReconstructionReport closed = psi_reconstruction_check(fam, traj, 10);
    const ReconstructionReport composed = psi_reconstruction_check(fam.parametrization(), traj, tight(), 10);
    worst = std::max({worst, closed.max_error, composed.max_error});
    escaped = escaped || closed.escaped || composed.escaped;
  }
  return {worst <= 1e-6 && !escaped, fmt("max |x(t) - psi(x_init; mu(t))| %.3g at 10 times per benchmark", worst)};
}

Outcome alpha_sweep() {
  bool ok = true;
  std::string detail;
  const RegressionProblem prob = random_problem(2, 4, 0);
  for (double alpha : {0.01, 0.5, 10.0}) {
    const Vector x = u2v2_init(alpha, 4);
    const auto start = std::chrono::steady_clock::now();
    const BiasReport rep = run_bias_experiment(u2_minus_v2(4), hypentropy_from_init(x.head(4), x.tail(4)), prob, x);
    const double secs = seconds_since(start);
    ok = ok && rep.interpolation_residual <= 1e-6 && rep.stop_time <= 1e3 && secs < 30.0;
    if (!detail.empty()) detail += "; ";
    detail += fmt("alpha %g: residual %.3g in %.3f s", alpha, rep.interpolation_residual, secs);
  }
  return {ok, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient flow equals mirror flow on u2v2", equivalence},
      {"dual gradient equals G of psi", legendre_construction},
      {"closed-form and numeric conjugates", conjugates},
      {"implicit bias against the KKT oracle", implicit_bias},
      {"Bregman projection and dual containment", bregman_projection},
      {"commuting verdicts", commuting_verdicts},
      {"nested-bracket counterexample", necessary_condition},
      {"commutator loops", commutator_loops},
      {"trajectory representation", reconstruction},
      {"alpha sweep convergence", alpha_sweep},
  };
  int failures = 0;
  int index = 0;
  for (const auto& [name, check] : criteria) {
    ++index;
    Outcome out;
    try {
      out = check();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    if (!out.pass) ++failures;
    std::printf("%s [%d] %s: %s\n", out.pass ? "PASS" : "FAIL", index, name, out.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
