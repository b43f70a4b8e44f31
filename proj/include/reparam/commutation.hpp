#pragma once

#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "reparam/integrator.hpp"
#include "reparam/parametrization.hpp"
#include "reparam/types.hpp"

namespace reparam {

struct PairBracket {
  Index i = 0;
  Index j = 0;
  double max_norm = 0.0;  // max over samples of ||[grad G_i, grad G_j](x)||
};

/// Nested bracket [[grad G_{j1}, grad G_{j2}], ..., grad G_{jk}] at one point.
struct NestedBracket {
  std::vector<Index> sequence;
  Vector value;
  double norm = 0.0;
  double projection = 0.0;     // norm of the component in the row space of dG(x)
  Vector gradient_inner;       // <bracket, grad G_i(x)> for every i
};

struct BracketReport {
  std::string verdict;
  double threshold = 0.0;
  std::size_t samples = 0;

  // commuting_check
  std::vector<PairBracket> pairs;
  std::vector<double> point_worst;                       // per sample
  std::vector<std::pair<Index, Index>> point_worst_pair; // per sample
  double max_bracket_norm = 0.0;

  // necessary_condition_check
  std::vector<NestedBracket> nested;
  std::vector<double> depth_max_projection;  // index k - 2 for depth k
  double max_projection = 0.0;
  double sigma_min = 0.0;
  bool matrix_route = false;  // brackets from the quadratic forms, not finite differences

  std::string coverage;
};

// All d(d-1)/2 brackets at every sample; "commuting" iff every norm <= tol.
// Throws std::invalid_argument on an empty sample set.
BracketReport commuting_check(const Parametrization& g, const std::vector<Vector>& samples,
                              double tol = 1e-8);

// ||phi_i^s(phi_j^t(x)) - phi_j^t(phi_i^s(x))|| along the descent fields -grad G.
double flow_commutation_test(const Parametrization& g, const Vector& x, Index i, Index j, double s,
                             double t, const IntegratorConfig& cfg);

// Nested brackets of depth 2..max_depth projected onto span{grad G_i(x)}.
// Verdict "satisfied" iff every projection <= tol. Throws NotRegularError when
// dG(x) has rank < d.
BracketReport necessary_condition_check(const Parametrization& g, const Vector& x, int max_depth,
                                        double tol = 1e-5);

// Value of the nested bracket field for `sequence` (length >= 1) at x.
Vector nested_bracket(const Parametrization& g, const std::vector<Index>& sequence, const Vector& x);

/// One leg of a commutator loop: the loss sign * <e_j, w> held for `duration`.
struct LoopLeg {
  Index j = 0;
  int sign = 1;
  double duration = 0.0;
};

std::vector<LoopLeg> loop_schedule(const std::vector<Index>& j_seq, double delta);

// iota_1 = delta, iota_i(delta) = 2 sqrt(delta) + 2 iota_{i-1}(sqrt(delta)).
double loop_duration(std::size_t k, double delta);

struct LoopResult {
  std::vector<Index> j_seq;
  std::vector<double> deltas;         // strictly decreasing
  std::vector<double> durations;      // iota_k(delta)
  std::vector<double> displacements;  // ||G(Pi(x)) - G(x)||
  std::vector<Vector> w_displacements;
  double slope = std::numeric_limits<double>::quiet_NaN();
  std::size_t fit_points = 0;
  bool dropped_largest = false;
  Vector direction;            // normalized displacement at the smallest delta
  Vector predicted_direction;  // normalized dG(x) * nested bracket
  double cosine = std::numeric_limits<double>::quiet_NaN();
};

// Least-squares slope of log(y) against log(x). Drops the point with the
// largest x when its residual against the fit of the others exceeds 3 sigma.
// Requires >= 3 points; NaN when some y is not positive.
struct SlopeFit {
  double slope = std::numeric_limits<double>::quiet_NaN();
  std::size_t points = 0;
  bool dropped_largest = false;
};
SlopeFit fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

LoopResult commutator_loop(const Parametrization& g, const Vector& x, const std::vector<Index>& j_seq,
                           const std::vector<double>& deltas, const IntegratorConfig& cfg,
                           int jobs = 1);

std::vector<double> log_spaced(double hi, double lo, int count);

struct JointDiagonalization {
  Matrix basis;        // orthogonal V with V^T M_k V approximately diagonal
  double residual = 0.0;  // max_k ||off(V^T M_k V)||_F / ||M_k||_F
  int sweeps = 0;
};

// Jacobi joint approximate diagonalization of symmetric matrices.
JointDiagonalization joint_diagonalize(const std::vector<Matrix>& matrices, int max_sweeps = 100);

// Joint diagonalization of {dG(x_k) dG(x_k)^T}. Throws std::invalid_argument
// for fewer than 2 samples.
JointDiagonalization separability_probe(const Parametrization& g, const std::vector<Vector>& samples,
                                        int max_sweeps = 100);

}  // namespace reparam
