#include "reparam/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "reparam/errors.hpp"

namespace reparam {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

double error_norm(const Vector& err, const Vector& y0, const Vector& y1, double atol,
                  double rtol) {
  double acc = 0.0;
  for (Index i = 0; i < err.size(); ++i) {
    const double scale = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double r = err[i] / scale;
    acc += r * r;
  }
  return err.size() == 0 ? 0.0 : std::sqrt(acc / static_cast<double>(err.size()));
}

}  // namespace

void IntegratorConfig::validate() const {
  if (!(abs_tol > 0.0) || !(rel_tol > 0.0)) {
    throw std::invalid_argument("integrator tolerances must be positive");
  }
  if (!(blowup_norm >= 1e6)) {
    throw std::invalid_argument("blow-up threshold must be at least 1e6");
  }
  if (max_steps == 0) throw std::invalid_argument("max_steps must be positive");
  if (method == IntegrationMethod::rk4 && !(fixed_step > 0.0)) {
    throw std::invalid_argument("rk4 fixed_step must be positive");
  }
}

double IntegratorConfig::tolerance() const {
  return method == IntegrationMethod::rk4 ? std::pow(fixed_step, 4) : std::max(abs_tol, rel_tol);
}

IntegrationStats& IntegrationStats::operator+=(const IntegrationStats& other) {
  accepted += other.accepted;
  rejected += other.rejected;
  evaluations += other.evaluations;
  return *this;
}

OdeIntegrator::OdeIntegrator(IntegratorConfig cfg, StateCheck check)
    : cfg_(cfg), check_(std::move(check)) {
  cfg_.validate();
}

void OdeIntegrator::accept(double t, const Vector& y) {
  ++stats_.accepted;
  const double norm = y.norm();
  if (!std::isfinite(norm) || norm > cfg_.blowup_norm) {
    std::ostringstream msg;
    msg << "state norm exceeded blow-up threshold " << cfg_.blowup_norm << " at t=" << t;
    throw BlowUpError(msg.str(), t, norm);
  }
  if (check_) check_(y);
}

double OdeIntegrator::advance(const OdeRhs& f, Vector& y, double t0, double t1,
                              const StepObserver& observer) {
  if (!std::isfinite(t0) || !std::isfinite(t1)) {
    throw std::invalid_argument("integration bounds must be finite");
  }
  if (t0 == t1) return t1;
  return cfg_.method == IntegrationMethod::rk4 ? advance_rk4(f, y, t0, t1, observer)
                                               : advance_dopri(f, y, t0, t1, observer);
}

double OdeIntegrator::advance_rk4(const OdeRhs& f, Vector& y, double t0, double t1,
                                  const StepObserver& observer) {
  const double span = t1 - t0;
  const auto n = static_cast<std::size_t>(std::ceil(std::abs(span) / cfg_.fixed_step - 1e-9));
  const std::size_t steps = std::max<std::size_t>(n, 1);
  if (stats_.accepted + steps > cfg_.max_steps) {
    throw StepLimitError("rk4 step budget exhausted");
  }
  const double h = span / static_cast<double>(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    const double t = t0 + static_cast<double>(s) * h;
    const Vector k1 = f(t, y);
    const Vector k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
    const Vector k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
    const Vector k4 = f(t + h, y + h * k3);
    stats_.evaluations += 4;
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double t_new = (s + 1 == steps) ? t1 : t0 + static_cast<double>(s + 1) * h;
    accept(t_new, y);
    if (observer) {
      ++stats_.evaluations;
      if (!observer(t_new, y, f(t_new, y))) return t_new;
    }
  }
  return t1;
}

double OdeIntegrator::advance_dopri(const OdeRhs& f, Vector& y, double t0, double t1,
                                    const StepObserver& observer) {
  const double direction = t1 > t0 ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);
  double t = t0;

  Vector k1 = f(t, y);
  ++stats_.evaluations;

  double h = step_hint_;
  if (!(h > 0.0)) {
    // Hairer-Norsett-Wanner starting step, first-order estimate only.
    const double d0 = y.norm() / std::sqrt(std::max<double>(1.0, static_cast<double>(y.size())));
    const double d1 = k1.norm() / std::sqrt(std::max<double>(1.0, static_cast<double>(y.size())));
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h = std::max(h, 1e-10);
  }

  const std::size_t budget_start = stats_.accepted + stats_.rejected;
  while (true) {
    const double remaining = span - std::abs(t - t0);
    if (remaining <= 0.0) break;
    if (stats_.accepted + stats_.rejected - budget_start > cfg_.max_steps) {
      throw StepLimitError("adaptive integrator step budget exhausted at t=" + std::to_string(t));
    }
    const double min_step = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));
    if (h < min_step) {
      const double norm = y.norm();
      if (norm * norm >= cfg_.blowup_norm) {
        throw BlowUpError("step size collapsed near finite-time escape at t=" + std::to_string(t), t,
                          norm);
      }
      throw StepLimitError("step size underflow at t=" + std::to_string(t));
    }
    const bool last = h >= remaining;
    const double step = direction * (last ? remaining : h);

    const Vector k2 = f(t + c2 * step, y + step * (a21 * k1));
    const Vector k3 = f(t + c3 * step, y + step * (a31 * k1 + a32 * k2));
    const Vector k4 = f(t + c4 * step, y + step * (a41 * k1 + a42 * k2 + a43 * k3));
    const Vector k5 = f(t + c5 * step, y + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const Vector k6 =
        f(t + step, y + step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const Vector y_new = y + step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    const Vector k7 = f(t + step, y_new);
    stats_.evaluations += 6;

    const Vector err = step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double en = error_norm(err, y, y_new, cfg_.abs_tol, cfg_.rel_tol);

    if (!std::isfinite(en) || en > 1.0) {
      ++stats_.rejected;
      const double factor = std::isfinite(en) ? std::max(0.2, 0.9 * std::pow(en, -0.2)) : 0.2;
      h = std::abs(step) * factor;
      continue;
    }

    const double factor = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
    const double next = std::abs(step) * factor;
    // A step shortened to land on t1 should not shrink the carried hint.
    h = last ? std::max(next, h) : next;
    t = last ? t1 : t + step;
    y = y_new;
    k1 = k7;
    accept(t, y);
    if (observer && !observer(t, y, k1)) {
      step_hint_ = h;
      return t;
    }
    if (last) break;
  }
  step_hint_ = h;
  return t1;
}

Vector integrate(const OdeRhs& f, Vector y0, double t0, double t1, const IntegratorConfig& cfg) {
  OdeIntegrator integrator(cfg);
  integrator.advance(f, y0, t0, t1);
  return y0;
}

}  // namespace reparam
