#include "reparam/commutation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <stdexcept>
#include <thread>

#include <Eigen/SVD>

#include "reparam/derivatives.hpp"
#include "reparam/errors.hpp"
#include "reparam/flows.hpp"
#include "reparam/linalg.hpp"
#include "reparam/loss.hpp"

namespace reparam {

namespace {


// Relative rounding error of the depth-k bracket field computed by nested
// central differences; each differencing level maps e to e^(2/3).
double field_noise(const Parametrization& g, std::size_t depth) {
  const double eps = std::numeric_limits<double>::epsilon();
  double noise = g.has_analytic_jacobian() ? eps : std::pow(eps, 2.0 / 3.0);
  if (!g.has_analytic_hessian()) noise = std::pow(noise, 2.0 / 3.0);
  for (std::size_t k = 2; k < depth; ++k) noise = std::pow(noise, 2.0 / 3.0);
  return noise;
}

void require_index(const Parametrization& g, Index j) {
  if (j < 0 || j >= g.w_dim()) {
    throw std::out_of_range(g.name() + ": coordinate index " + std::to_string(j) + " out of range");
  }
}

}  // namespace

BracketReport commuting_check(const Parametrization& g, const std::vector<Vector>& samples,
                              double tol) {
  if (samples.empty()) throw std::invalid_argument("commuting_check needs at least one sample");
  const Index d = g.w_dim();
  BracketReport report;
  report.threshold = tol;
  report.samples = samples.size();
  for (Index i = 0; i < d; ++i) {
    for (Index j = i + 1; j < d; ++j) report.pairs.push_back({i, j, 0.0});
  }
  for (const Vector& x : samples) {
    double worst = 0.0;
    std::pair<Index, Index> worst_pair{0, 0};
    for (PairBracket& pair : report.pairs) {
      const double n = lie_bracket(g, pair.i, pair.j, x).norm();
      pair.max_norm = std::max(pair.max_norm, n);
      if (n > worst) {
        worst = n;
        worst_pair = {pair.i, pair.j};
      }
    }
    report.point_worst.push_back(worst);
    report.point_worst_pair.push_back(worst_pair);
    report.max_bracket_norm = std::max(report.max_bracket_norm, worst);
  }
  report.verdict = report.max_bracket_norm <= tol ? "commuting" : "non-commuting";
  report.coverage = std::to_string(samples.size()) +
                    " sampled points; commutation elsewhere is not certified";
  return report;
}

double flow_commutation_test(const Parametrization& g, const Vector& x, Index i, Index j, double s,
                             double t, const IntegratorConfig& cfg) {
  require_index(g, i);
  require_index(g, j);
  const ScalarPotential fi = coordinate_potential(g, i);
  const ScalarPotential fj = coordinate_potential(g, j);
  const Vector ij = flow(fi, flow(fj, x, t, cfg), s, cfg);
  const Vector ji = flow(fj, flow(fi, x, s, cfg), t, cfg);
  return (ij - ji).norm();
}

Vector nested_bracket(const Parametrization& g, const std::vector<Index>& sequence, const Vector& x) {
  if (sequence.empty()) throw std::invalid_argument("nested bracket needs a non-empty sequence");
  for (Index j : sequence) require_index(g, j);
  if (g.is_quadratic()) {
    // Linear fields X = M x: [M x, A x] = (A M - M A) x.
    const auto& forms = g.quadratic_forms();
    Matrix m = forms[static_cast<std::size_t>(sequence.front())];
    for (std::size_t k = 1; k < sequence.size(); ++k) {
      const Matrix& a = forms[static_cast<std::size_t>(sequence[k])];
      m = a * m - m * a;
    }
    return m * x;
  }
  if (sequence.size() == 1) return coordinate_gradient(g, sequence.front(), x);
  if (sequence.size() == 2) return lie_bracket(g, sequence[0], sequence[1], x);

  const std::vector<Index> inner(sequence.begin(), sequence.end() - 1);
  const Index j = sequence.back();
  const Vector field = nested_bracket(g, inner, x);
  const Vector v = coordinate_gradient(g, j, x);
  Vector derivative = Vector::Zero(x.size());
  const double vn = v.norm();
  if (vn > 0.0) {
    const double h = std::cbrt(field_noise(g, inner.size())) * std::max(1.0, x.norm()) / vn;
    derivative = (nested_bracket(g, inner, x + h * v) - nested_bracket(g, inner, x - h * v)) / (2.0 * h);
  }
  return hessian_vec(g, j, x, field) - derivative;
}

BracketReport necessary_condition_check(const Parametrization& g, const Vector& x, int max_depth,
                                        double tol) {
  if (max_depth != 2 && max_depth != 3) throw std::invalid_argument("max_depth must be 2 or 3");
  const Index d = g.w_dim();
  if (d < 2) throw std::invalid_argument("necessary_condition_check needs d >= 2");
  const Matrix jac = jacobian(g, x);
  Eigen::JacobiSVD<Matrix> svd(jac);
  const Vector& sv = svd.singularValues();
  const double sigma_min = d > g.x_dim() ? 0.0 : sv[d - 1];
  if (!(sigma_min > 1e-10 * std::max(1.0, sv[0]))) {
    throw NotRegularError(g.name() + ": dG(x) has rank < d; the theorem's regularity premise fails",
                          sigma_min);
  }
  const Matrix basis = row_space_basis(jac);

  BracketReport report;
  report.threshold = tol;
  report.samples = 1;
  report.sigma_min = sigma_min;
  report.matrix_route = g.is_quadratic();
  report.depth_max_projection.assign(static_cast<std::size_t>(max_depth - 1), 0.0);

  std::vector<std::vector<Index>> level;
  for (Index a = 0; a < d; ++a) {
    for (Index b = a + 1; b < d; ++b) level.push_back({a, b});
  }
  for (int depth = 2; depth <= max_depth; ++depth) {
    std::vector<std::vector<Index>> next;
    for (const auto& seq : level) {
      NestedBracket nb;
      nb.sequence = seq;
      nb.value = nested_bracket(g, seq, x);
      nb.norm = nb.value.norm();
      nb.projection = (basis.transpose() * nb.value).norm();
      nb.gradient_inner = jac * nb.value;
      auto& slot = report.depth_max_projection[static_cast<std::size_t>(depth - 2)];
      slot = std::max(slot, nb.projection);
      report.max_projection = std::max(report.max_projection, nb.projection);
      report.nested.push_back(std::move(nb));
      for (Index j = 0; j < d; ++j) {
        auto extended = seq;
        extended.push_back(j);
        next.push_back(std::move(extended));
      }
    }
    level = std::move(next);
  }
  report.verdict = report.max_projection <= tol ? "satisfied" : "violated";
  report.coverage = "single point; the condition is required at every x";
  return report;
}

std::vector<LoopLeg> loop_schedule(const std::vector<Index>& j_seq, double delta) {
  if (j_seq.empty()) throw std::invalid_argument("loop schedule needs indices");
  if (!(delta > 0.0)) throw std::invalid_argument("loop delta must be positive");
  if (j_seq.size() == 1) return {{j_seq.front(), -1, delta}};
  const double root = std::sqrt(delta);
  const std::vector<Index> inner(j_seq.begin(), j_seq.end() - 1);
  const Index j = j_seq.back();
  const std::vector<LoopLeg> prev = loop_schedule(inner, root);
  std::vector<LoopLeg> legs = prev;
  legs.push_back({j, -1, root});
  for (auto it = prev.rbegin(); it != prev.rend(); ++it) legs.push_back({it->j, -it->sign, it->duration});
  legs.push_back({j, 1, root});
  return legs;
}

double loop_duration(std::size_t k, double delta) {
  if (k == 0) throw std::invalid_argument("loop depth must be positive");
  if (k == 1) return delta;
  return 2.0 * std::sqrt(delta) + 2.0 * loop_duration(k - 1, std::sqrt(delta));
}

SlopeFit fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("slope fit: size mismatch");
  if (x.size() < 3) throw std::invalid_argument("slope fit needs at least 3 points");
  SlopeFit fit;
  fit.points = x.size();
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0) || !(y[k] > 0.0) || !std::isfinite(y[k])) return fit;
  }
  auto least_squares = [&](const std::vector<std::size_t>& idx, double& slope, double& intercept) {
    double mx = 0, my = 0;
    for (auto k : idx) {
      mx += std::log(x[k]);
      my += std::log(y[k]);
    }
    mx /= static_cast<double>(idx.size());
    my /= static_cast<double>(idx.size());
    double sxy = 0, sxx = 0;
    for (auto k : idx) {
      const double dx = std::log(x[k]) - mx;
      sxy += dx * (std::log(y[k]) - my);
      sxx += dx * dx;
    }
    slope = sxy / sxx;
    intercept = my - slope * mx;
  };
  std::vector<std::size_t> all(x.size());
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
  const std::size_t largest =
      static_cast<std::size_t>(std::max_element(x.begin(), x.end()) - x.begin());
  std::vector<std::size_t> rest;
  for (auto k : all) {
    if (k != largest) rest.push_back(k);
  }

  double slope = 0, intercept = 0;
  least_squares(all, slope, intercept);
  fit.slope = slope;
  if (rest.size() >= 3) {
    double s_rest = 0, i_rest = 0;
    least_squares(rest, s_rest, i_rest);
    double ss = 0.0;
    for (auto k : rest) {
      const double r = std::log(y[k]) - (i_rest + s_rest * std::log(x[k]));
      ss += r * r;
    }
    const double sigma = std::sqrt(ss / static_cast<double>(rest.size()));
    const double r_large = std::abs(std::log(y[largest]) - (i_rest + s_rest * std::log(x[largest])));
    if (r_large > 3.0 * sigma) {
      fit.slope = s_rest;
      fit.points = rest.size();
      fit.dropped_largest = true;
    }
  }
  return fit;
}

std::vector<double> log_spaced(double hi, double lo, int count) {
  if (count < 2 || !(hi > lo) || !(lo > 0.0)) throw std::invalid_argument("log_spaced: need hi > lo > 0, count >= 2");
  std::vector<double> out;
  for (int i = 0; i < count; ++i) {
    out.push_back(hi * std::pow(lo / hi, static_cast<double>(i) / (count - 1)));
  }
  out.back() = lo;
  return out;
}

LoopResult commutator_loop(const Parametrization& g, const Vector& x, const std::vector<Index>& j_seq,
                           const std::vector<double>& deltas, const IntegratorConfig& cfg, int jobs) {
  if (j_seq.size() < 2) throw std::invalid_argument("commutator loop needs k >= 2 indices");
  for (Index j : j_seq) require_index(g, j);
  if (deltas.size() < 3) throw std::invalid_argument("commutator loop needs at least 3 sweep points");
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    if (!(deltas[k] > 0.0)) throw std::invalid_argument("loop deltas must be positive");
    if (k > 0 && !(deltas[k] < deltas[k - 1])) throw std::invalid_argument("loop deltas must strictly decrease");
  }

  LoopResult result;
  result.j_seq = j_seq;
  result.deltas = deltas;
  const Vector w0 = g(x);
  const std::size_t n = deltas.size();
  result.w_displacements.assign(n, Vector());
  std::vector<std::exception_ptr> errors(n);

  auto run_one = [&](std::size_t k) {
    try {
      std::vector<TimeDependentLoss::Segment> segments;
      double t = 0.0;
      for (const LoopLeg& leg : loop_schedule(j_seq, deltas[k])) {
        segments.push_back({t, linear_loss(static_cast<double>(leg.sign) * Vector::Unit(g.w_dim(), leg.j))});
        t += leg.duration;
      }
      FlowOptions options;
      options.integrator = cfg;
      options.grid = {0.0, t};
      const Trajectory traj = gradient_flow(g, TimeDependentLoss(std::move(segments)), x, t, options);
      result.w_displacements[k] = traj.w.back() - w0;
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };
  const auto workers = static_cast<std::size_t>(std::clamp(jobs, 1, static_cast<int>(n)));
  if (workers == 1) {
    for (std::size_t k = 0; k < n; ++k) run_one(k);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t k = w; k < n; k += workers) run_one(k);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  for (std::size_t k = 0; k < n; ++k) {
    result.durations.push_back(loop_duration(j_seq.size(), deltas[k]));
    result.displacements.push_back(result.w_displacements[k].norm());
  }
  const SlopeFit fit = fit_loglog_slope(deltas, result.displacements);
  result.slope = fit.slope;
  result.fit_points = fit.points;
  result.dropped_largest = fit.dropped_largest;

  const Vector& last = result.w_displacements.back();
  result.direction = last.norm() > 0.0 ? Vector(last.normalized()) : Vector::Zero(last.size());
  const Vector predicted = jacobian(g, x) * nested_bracket(g, j_seq, x);
  result.predicted_direction =
      predicted.norm() > 0.0 ? Vector(predicted.normalized()) : Vector::Zero(predicted.size());
  if (last.norm() > 0.0 && predicted.norm() > 0.0) {
    result.cosine = result.direction.dot(result.predicted_direction);
  }
  return result;
}

JointDiagonalization joint_diagonalize(const std::vector<Matrix>& matrices, int max_sweeps) {
  if (matrices.empty()) throw std::invalid_argument("joint diagonalization needs matrices");
  const Index m = matrices.front().rows();
  for (const Matrix& a : matrices) {
    if (a.rows() != m || a.cols() != m) throw std::invalid_argument("joint diagonalization: shape mismatch");
  }
  std::vector<Matrix> work = matrices;
  JointDiagonalization out;
  out.basis = Matrix::Identity(m, m);
  constexpr double kThreshold = 1e-14;

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool rotated = false;
    for (Index p = 0; p + 1 < m; ++p) {
      for (Index q = p + 1; q < m; ++q) {
        // Givens angle from the 2x2 Gram matrix of (a_pp - a_qq, a_pq + a_qp).
        double g00 = 0, g01 = 0, g11 = 0;
        for (const Matrix& a : work) {
          const double h0 = a(p, p) - a(q, q);
          const double h1 = a(p, q) + a(q, p);
          g00 += h0 * h0;
          g01 += h0 * h1;
          g11 += h1 * h1;
        }
        const double ton = g00 - g11;
        const double toff = 2.0 * g01;
        const double theta = 0.5 * std::atan2(toff, ton + std::hypot(ton, toff));
        const double c = std::cos(theta), s = std::sin(theta);
        if (std::abs(s) <= kThreshold) continue;
        rotated = true;
        for (Matrix& a : work) {
          const Vector col_p = a.col(p), col_q = a.col(q);
          a.col(p) = c * col_p + s * col_q;
          a.col(q) = -s * col_p + c * col_q;
          const Vector row_p = a.row(p).transpose(), row_q = a.row(q).transpose();
          a.row(p) = (c * row_p + s * row_q).transpose();
          a.row(q) = (-s * row_p + c * row_q).transpose();
        }
        const Vector vp = out.basis.col(p), vq = out.basis.col(q);
        out.basis.col(p) = c * vp + s * vq;
        out.basis.col(q) = -s * vp + c * vq;
      }
    }
    out.sweeps = sweep + 1;
    if (!rotated) break;
  }
  for (std::size_t k = 0; k < matrices.size(); ++k) {
    const double total = matrices[k].norm();
    if (total == 0.0) continue;
    Matrix off_diagonal = work[k];
    off_diagonal.diagonal().setZero();
    const double off = off_diagonal.norm();
    out.residual = std::max(out.residual, off / total);
  }
  return out;
}

JointDiagonalization separability_probe(const Parametrization& g, const std::vector<Vector>& samples,
                                        int max_sweeps) {
  if (samples.size() < 2) throw std::invalid_argument("separability_probe needs at least 2 samples");
  std::vector<Matrix> grams;
  for (const Vector& x : samples) {
    const Matrix jac = jacobian(g, x);
    grams.push_back(jac * jac.transpose());
  }
  return joint_diagonalize(grams, max_sweeps);
}

}  // namespace reparam
