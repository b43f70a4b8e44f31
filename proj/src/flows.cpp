#include "reparam/flows.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include "reparam/derivatives.hpp"
#include "reparam/errors.hpp"
#include "reparam/psi.hpp"

namespace reparam {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Everything the piecewise driver needs to know about one flow.
struct FlowSystem {
  std::function<OdeRhs(const Loss&)> rhs;
  std::function<double(const Vector& y, const Vector& dydt)> w_speed;
  std::function<Vector(const Vector& y)> w_of;
  std::function<void(double t, const Vector& y)> record;
  StateCheck check;
};

std::vector<double> resolve_grid(double T, const TimeDependentLoss& loss, const FlowOptions& opt) {
  if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("flow horizon T must be positive");
  if (opt.grid.empty()) return sample_grid(T, loss);
  std::vector<double> grid = opt.grid;
  for (double b : loss.breakpoints()) {
    if (b > 0.0 && b < T) grid.push_back(b);
  }
  grid.push_back(0.0);
  grid.push_back(T);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.front() < 0.0 || grid.back() > T) throw std::invalid_argument("sample grid outside [0, T]");
  return grid;
}

void run_piecewise(const FlowSystem& sys, const TimeDependentLoss& loss, Vector y,
                   const std::vector<double>& grid, const FlowOptions& opt, Trajectory& traj) {
  if (sys.check) sys.check(y);
  OdeIntegrator integrator(opt.integrator, sys.check);
  sys.record(grid.front(), y);

  double below_since = kNaN;
  bool stop = false;
  std::deque<std::pair<double, Vector>> window;  // accepted (t, w) over the trailing window
  StepObserver observer;
  if (opt.convergence) {
    const ConvergenceRule& rule = *opt.convergence;
    observer = [&](double t, const Vector& state, const Vector& dydt) {
      const Vector w = sys.w_of(state);
      if (rule.residual && rule.residual(w) <= rule.residual_tol) {
        stop = true;
        return false;
      }
      // Mean speed over the window. Near a stiff equilibrium an explicit
      // integrator leaves a jitter of the size of its tolerance whose
      // pointwise speed never drops below the threshold.
      const double window_start = (1.0 - rule.window_fraction) * t;
      window.emplace_back(t, w);
      while (window.size() > 2 && window[1].first <= window_start) window.pop_front();
      const double span = t - window.front().first;
      if (t > 0.0 && span >= rule.window_fraction * t &&
          (w - window.front().second).norm() <= rule.velocity_tol * span) {
        stop = true;
        return false;
      }
      if (sys.w_speed(state, dydt) <= rule.velocity_tol) {
        if (std::isnan(below_since)) below_since = t;
        if (t > 0.0 && t - below_since >= rule.window_fraction * t) {
          stop = true;
          return false;
        }
      } else {
        below_since = kNaN;
      }
      return true;
    };
  }

  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double a = grid[k], b = grid[k + 1];
    const OdeRhs f = sys.rhs(loss.at(a));
    const double reached = integrator.advance(f, y, a, b, observer);
    sys.record(reached, y);
    if (stop) break;
  }
  traj.stats = integrator.stats();
  traj.converged = stop;
  const OdeRhs f_end = sys.rhs(loss.at(traj.times.back()));
  traj.final_velocity = sys.w_speed(y, f_end(traj.times.back(), y));
}

// Stage evaluations may step slightly outside an open domain; accepted states
// are checked separately.
Matrix stage_jacobian(const Parametrization& g, const Vector& x) {
  return g.has_analytic_jacobian() ? g.analytic_jacobian(x) : jacobian(g, x);
}

Vector head(const Vector& y, Index n) { return y.head(n); }
Vector tail(const Vector& y, Index n) { return y.tail(n); }

}  // namespace

std::vector<double> sample_grid(double T, const TimeDependentLoss& loss, int points) {
  if (!(T > 0.0)) throw std::invalid_argument("sample grid needs T > 0");
  if (points < 2) throw std::invalid_argument("sample grid needs at least 2 points");
  std::vector<double> grid;
  for (int i = 0; i < points; ++i) grid.push_back(T * static_cast<double>(i) / (points - 1));
  grid.back() = T;
  for (double b : loss.breakpoints()) {
    if (b > 0.0 && b < T) grid.push_back(b);
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

Trajectory gradient_flow(const Parametrization& g, const TimeDependentLoss& loss,
                         const Vector& x_init, double T, const FlowOptions& options) {
  const Index D = g.x_dim(), d = g.w_dim();
  if (x_init.size() != D) throw std::invalid_argument("x_init has the wrong dimension");
  if (loss.dim() != d) throw std::invalid_argument("loss dimension does not match G");
  if (!g.contains(x_init)) throw DomainError("x_init outside the domain of " + g.name());
  const std::vector<double> grid = resolve_grid(T, loss, options);

  Trajectory traj;
  FlowSystem sys;
  sys.rhs = [&g, D, d](const Loss& l) -> OdeRhs {
    return [&g, &l, D, d](double, const Vector& y) -> Vector {
      const Vector x = y.head(D);
      const Vector grad = l.gradient(g(x));
      Vector dy(D + d);
      dy.head(D) = -stage_jacobian(g, x).transpose() * grad;
      dy.tail(d) = -grad;
      return dy;
    };
  };
  sys.w_speed = [&g, D](const Vector& y, const Vector& dydt) {
    return (jacobian(g, y.head(D)) * dydt.head(D)).norm();
  };
  sys.w_of = [&g, D](const Vector& y) { return g(y.head(D)); };
  sys.record = [&](double t, const Vector& y) {
    traj.times.push_back(t);
    traj.x.push_back(head(y, D));
    traj.w.push_back(g(traj.x.back()));
    traj.mu.push_back(tail(y, d));
  };
  sys.check = [&g, D](const Vector& y) {
    if (!g.contains(y.head(D))) throw DomainError("gradient flow left the domain of " + g.name());
  };
  Vector y0(D + d);
  y0 << x_init, Vector::Zero(d);
  run_piecewise(sys, loss, y0, grid, options, traj);
  return traj;
}

Trajectory mirror_flow(const LegendreFunction& f, const TimeDependentLoss& loss,
                       const Vector& w_init, double T, const FlowOptions& options) {
  const Index d = f.dim();
  if (w_init.size() != d || loss.dim() != d) throw std::invalid_argument("mirror flow dimension mismatch");
  if (!f.contains(w_init)) throw DomainError("w_init outside int(dom R)");
  const std::vector<double> grid = resolve_grid(T, loss, options);
  const Vector theta0 = f.grad_r(w_init);

  Trajectory traj;
  FlowSystem sys;
  sys.rhs = [&f](const Loss& l) -> OdeRhs {
    return [&f, &l](double, const Vector& theta) -> Vector { return -l.gradient(f.grad_q(theta)); };
  };
  sys.w_speed = [&f](const Vector& theta, const Vector& dtheta) {
    return (f.hess_q(theta) * dtheta).norm();
  };
  sys.w_of = [&f](const Vector& theta) { return f.grad_q(theta); };
  sys.record = [&](double t, const Vector& theta) {
    traj.times.push_back(t);
    traj.theta.push_back(theta);
    traj.w.push_back(f.grad_q(theta));
    traj.mu.push_back(theta - theta0);
  };
  sys.check = [&f](const Vector& theta) {
    if (!f.dual_contains(theta)) throw DomainError("mirror flow: dual state left dom grad Q");
    if (!f.grad_q(theta).allFinite()) throw BlowUpError("mirror flow: grad Q overflowed", kNaN, kNaN);
  };
  run_piecewise(sys, loss, theta0, grid, options, traj);
  return traj;
}

Trajectory riemannian_flow(const LegendreFunction& f, const TimeDependentLoss& loss,
                           const Vector& w_init, double T, const FlowOptions& options) {
  const Index d = f.dim();
  if (w_init.size() != d || loss.dim() != d) {
    throw std::invalid_argument("Riemannian flow dimension mismatch");
  }
  if (!f.contains(w_init)) throw DomainError("w_init outside int(dom R)");
  const std::vector<double> grid = resolve_grid(T, loss, options);

  Trajectory traj;
  FlowSystem sys;
  sys.rhs = [&f, d](const Loss& l) -> OdeRhs {
    return [&f, &l, d](double, const Vector& y) -> Vector {
      const Vector w = y.head(d);
      const Vector grad = l.gradient(w);
      Vector dy(2 * d);
      dy.head(d) = -f.metric_inverse(w) * grad;
      dy.tail(d) = -grad;
      return dy;
    };
  };
  sys.w_speed = [d](const Vector&, const Vector& dydt) { return dydt.head(d).norm(); };
  sys.w_of = [d](const Vector& y) { return head(y, d); };
  sys.record = [&](double t, const Vector& y) {
    traj.times.push_back(t);
    traj.w.push_back(head(y, d));
    traj.mu.push_back(tail(y, d));
  };
  sys.check = [&f, d](const Vector& y) {
    if (!f.contains(y.head(d))) throw DomainError("Riemannian flow left int(dom R)");
  };
  Vector y0(2 * d);
  y0 << w_init, Vector::Zero(d);
  run_piecewise(sys, loss, y0, grid, options, traj);
  return traj;
}

EquivalenceReport equivalence_report(const Parametrization& g, const LegendreFunction& f,
                                     const TimeDependentLoss& loss, const Vector& x_init,
                                     double T, const FlowOptions& options) {
  if (g.w_dim() != f.dim()) throw std::invalid_argument("G and R live on different w-spaces");
  EquivalenceReport report;
  const Vector w_init = g(x_init);
  report.init_dual_norm = f.grad_r(w_init).norm();
  if (report.init_dual_norm > 1e-6) {
    throw std::invalid_argument(
        "equivalence_report: grad R(G(x_init)) = " + std::to_string(report.init_dual_norm) +
        " is not 0; R was not built from this initialization");
  }
  FlowOptions opt = options;
  opt.convergence.reset();
  opt.grid = resolve_grid(T, loss, options);
  report.gradient = gradient_flow(g, loss, x_init, T, opt);
  report.mirror = mirror_flow(f, loss, w_init, T, opt);
  report.times = report.gradient.times;
  for (std::size_t k = 0; k < report.times.size(); ++k) {
    const double dev = (report.gradient.w[k] - report.mirror.w[k]).norm();
    report.deviations.push_back(dev);
    report.max_deviation = std::max(report.max_deviation, dev);
  }
  return report;
}

namespace {

std::vector<std::size_t> spread_indices(std::size_t n, int samples) {
  if (n == 0) throw std::invalid_argument("empty trajectory");
  if (samples < 1) throw std::invalid_argument("need at least one sample");
  std::vector<std::size_t> idx;
  const auto m = static_cast<std::size_t>(samples);
  for (std::size_t s = 1; s <= m; ++s) idx.push_back(std::min(n - 1, (s * (n - 1) + m - 1) / m));
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  return idx;
}

template <class Psi>
ReconstructionReport reconstruct(const Trajectory& traj, int samples, Psi&& psi_at) {
  if (traj.x.empty()) throw std::invalid_argument("reconstruction needs a gradient-flow trajectory");
  ReconstructionReport report;
  for (std::size_t k : spread_indices(traj.size(), samples)) {
    report.times.push_back(traj.times[k]);
    try {
      const double err = (traj.x[k] - psi_at(traj.mu[k])).norm();
      report.errors.push_back(err);
      report.max_error = std::max(report.max_error, err);
    } catch (const BlowUpError& e) {
      report.escaped = true;
      report.message = std::string("psi escaped: mu(t) is outside U(x_init): ") + e.what();
      report.errors.push_back(std::numeric_limits<double>::infinity());
      report.max_error = std::numeric_limits<double>::infinity();
    }
  }
  return report;
}

}  // namespace

ReconstructionReport psi_reconstruction_check(const Parametrization& g, const Trajectory& traj,
                                              const IntegratorConfig& cfg, int samples) {
  const Vector& x_init = traj.x.at(0);
  return reconstruct(traj, samples, [&](const Vector& mu) { return psi(g, x_init, mu, cfg); });
}

ReconstructionReport psi_reconstruction_check(const CommutingQuadraticFamily& family,
                                              const Trajectory& traj, int samples) {
  const Vector& x_init = traj.x.at(0);
  return reconstruct(traj, samples,
                     [&](const Vector& mu) { return psi_closed_form(family, x_init, mu); });
}

double dual_conservation_residual(const Trajectory& traj, const TimeDependentLoss& loss) {
  if (traj.theta.empty()) throw std::invalid_argument("dual conservation needs a mirror-flow trajectory");
  Vector integral = Vector::Zero(traj.theta.front().size());
  double worst = 0.0;
  for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
    const double a = traj.times[k], b = traj.times[k + 1];
    const Loss& l = loss.at(a);
    integral += 0.5 * (b - a) * (l.gradient(traj.w[k]) + l.gradient(traj.w[k + 1]));
    worst = std::max(worst, (traj.theta[k + 1] + integral - traj.theta.front()).norm());
  }
  return worst;
}

void write_csv(const Trajectory& traj, std::ostream& out) {
  auto group = [&](const std::vector<Vector>& rows, const char* prefix) {
    if (rows.empty()) return;
    for (Index i = 0; i < rows.front().size(); ++i) out << ',' << prefix << '_' << (i + 1);
  };
  out << 't';
  group(traj.x, "x");
  group(traj.w, "w");
  group(traj.theta, "theta");
  group(traj.mu, "mu");
  out << '\n';
  out << std::setprecision(17);
  auto values = [&](const std::vector<Vector>& rows, std::size_t k) {
    if (rows.empty()) return;
    for (Index i = 0; i < rows[k].size(); ++i) out << ',' << rows[k][i];
  };
  for (std::size_t k = 0; k < traj.size(); ++k) {
    out << traj.times[k];
    values(traj.x, k);
    values(traj.w, k);
    values(traj.theta, k);
    values(traj.mu, k);
    out << '\n';
  }
}

void write_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_csv(traj, out);
  if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace reparam
