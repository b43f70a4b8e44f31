#pragma once

#include "reparam/types.hpp"

namespace reparam {

// exp(S) for symmetric S via eigendecomposition. Throws NumericalError on
// non-finite input.
Matrix symmetric_expm(const Matrix& s);

// exp(S) x without forming the dense exponential more than needed.
Vector symmetric_expm_apply(const Matrix& s, const Vector& x);

// Orthonormal basis of the row space of A (columns), rank decided at
// relative singular-value threshold rel_tol.
Matrix row_space_basis(const Matrix& a, double rel_tol = 1e-12);

// Orthonormal basis of the null space of A (columns).
Matrix null_space_basis(const Matrix& a, double rel_tol = 1e-12);

// Norm of the component of v orthogonal to the column span of `basis`
// (basis assumed orthonormal).
double distance_to_span(const Matrix& basis, const Vector& v);

}  // namespace reparam
