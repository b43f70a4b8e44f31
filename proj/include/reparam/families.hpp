#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "reparam/parametrization.hpp"

namespace reparam {

/// d symmetric, pairwise commuting D x D matrices; G_i(x) = 1/2 x^T A_i x.
class CommutingQuadraticFamily {
 public:
  static constexpr double kDefaultCommutationTol = 1e-10;

  // Throws NonCommutingError if some pair fails
  // ||A_i A_j - A_j A_i||_F <= tol * ||A_i||_F ||A_j||_F, std::invalid_argument
  // on shape or symmetry violations.
  explicit CommutingQuadraticFamily(std::vector<Matrix> matrices,
                                    double commutation_tol = kDefaultCommutationTol);

  const std::vector<Matrix>& matrices() const { return matrices_; }
  Index x_dim() const { return matrices_.front().rows(); }
  Index w_dim() const { return static_cast<Index>(matrices_.size()); }
  double commutation_tol() const { return tol_; }

  // Sum_i mu_i A_i.
  Matrix combination(const Vector& mu) const;

  Parametrization parametrization(std::string name = "commuting_quadratic") const;

 private:
  std::vector<Matrix> matrices_;
  double tol_;
};

// Largest relative commutator ||A_i A_j - A_j A_i||_F / (||A_i||_F ||A_j||_F) over pairs.
double max_relative_commutator(const std::vector<Matrix>& matrices);

// d matrices V diag(lambda_i) V^T sharing a random orthogonal eigenbasis V
// (D x D), with Gaussian eigenvalues; seeded.
CommutingQuadraticFamily random_commuting_family(Index D, Index d, std::uint64_t seed);

Parametrization identity_parametrization(Index d);

// G(x) = x (.) x on the open positive orthant of R^d.
Parametrization elementwise_square(Index d);

// G(u, v) = u (.) u - v (.) v on the open positive orthant of R^{2d}.
Parametrization u2_minus_v2(Index d);

// G_i(x) = lambda_i^T (x (.) x); row i of `lambdas` is lambda_i.
Parametrization diagonal_lambda(const Matrix& lambdas);

// Generic quadratic map G_i(x) = 1/2 x^T A_i x with analytic derivatives.
Parametrization quadratic_parametrization(std::string name, std::vector<Matrix> forms,
                                          Domain domain = Domain::whole_space(),
                                          Commutativity commutativity = Commutativity::unknown,
                                          std::vector<std::string> coordinate_names = {});

// G(U) = U U^T for U in R^{d x r}, x = vec(U) column-major. The w-space is the
// upper triangle of the symmetric output, row by row, off-diagonals stored once.
Parametrization symmetric_factorization(Index d, Index r);

// Flat w-index of entry (i, j) of the symmetric output (0-based, either order).
Index symmetric_index(Index d, Index i, Index j);

// G(U, V) = U V^T, x = (vec(U), vec(V)), w = all d*d entries row-major.
Parametrization asymmetric_factorization(Index d, Index r);

// Sub-parametrization keeping only the listed coordinates, in order.
Parametrization select_coordinates(const Parametrization& g, const std::vector<Index>& coords);

struct BuiltinParams {
  Index dim = 0;                 // d for identity/square/u2v2, d for factorizations
  Index rank = 1;                // r for factorizations
  Matrix lambdas;                // diagonal_lambda
  std::vector<Matrix> matrices;  // commuting_quadratic
};

// Family identifiers: identity, square, u2v2, diagonal_lambda, commuting_quadratic,
// factorization_sym, factorization_asym.
Parametrization builtin(std::string_view family, const BuiltinParams& params);

std::vector<std::string> builtin_families();

}  // namespace reparam
