#include "reparam/families.hpp"

#include <random>
#include <stdexcept>

#include <Eigen/QR>

#include "reparam/errors.hpp"

namespace reparam {

namespace {

void require_positive(Index d, const char* what) {
  if (d <= 0) throw std::invalid_argument(std::string(what) + " must be positive");
}

}  // namespace

double max_relative_commutator(const std::vector<Matrix>& matrices) {
  double worst = 0.0;
  for (std::size_t i = 0; i < matrices.size(); ++i) {
    for (std::size_t j = i + 1; j < matrices.size(); ++j) {
      const double scale = matrices[i].norm() * matrices[j].norm();
      if (scale == 0.0) continue;
      const double c = (matrices[i] * matrices[j] - matrices[j] * matrices[i]).norm() / scale;
      worst = std::max(worst, c);
    }
  }
  return worst;
}

CommutingQuadraticFamily::CommutingQuadraticFamily(std::vector<Matrix> matrices,
                                                   double commutation_tol)
    : matrices_(std::move(matrices)), tol_(commutation_tol) {
  if (matrices_.empty()) throw std::invalid_argument("commuting family needs at least one matrix");
  const Index n = matrices_.front().rows();
  if (static_cast<Index>(matrices_.size()) > n) {
    throw std::invalid_argument("commuting family needs d <= D");
  }
  for (const Matrix& a : matrices_) {
    if (a.rows() != n || a.cols() != n) throw std::invalid_argument("matrices must be D x D");
    if ((a - a.transpose()).norm() > 1e-12 * std::max(1.0, a.norm())) {
      throw std::invalid_argument("commuting family matrices must be symmetric");
    }
  }
  const double worst = max_relative_commutator(matrices_);
  if (worst > tol_) {
    throw NonCommutingError("quadratic forms do not commute (relative commutator " +
                            std::to_string(worst) + ")");
  }
}

Matrix CommutingQuadraticFamily::combination(const Vector& mu) const {
  if (mu.size() != w_dim()) throw std::invalid_argument("mu has wrong dimension");
  Matrix s = Matrix::Zero(x_dim(), x_dim());
  for (Index i = 0; i < w_dim(); ++i) s += mu[i] * matrices_[static_cast<std::size_t>(i)];
  return s;
}

Parametrization CommutingQuadraticFamily::parametrization(std::string name) const {
  return quadratic_parametrization(std::move(name), matrices_, Domain::whole_space(),
                                   Commutativity::commuting);
}

Parametrization quadratic_parametrization(std::string name, std::vector<Matrix> forms,
                                          Domain domain, Commutativity commutativity,
                                          std::vector<std::string> coordinate_names) {
  if (forms.empty()) throw std::invalid_argument("quadratic parametrization needs forms");
  const Index n = forms.front().rows();
  const auto d = static_cast<Index>(forms.size());
  auto shared = std::make_shared<const std::vector<Matrix>>(forms);
  ParametrizationSpec spec;
  spec.name = std::move(name);
  spec.x_dim = n;
  spec.w_dim = d;
  spec.eval = [shared](const Vector& x) {
    Vector w(static_cast<Index>(shared->size()));
    for (std::size_t i = 0; i < shared->size(); ++i) {
      w[static_cast<Index>(i)] = 0.5 * x.dot((*shared)[i] * x);
    }
    return w;
  };
  spec.jacobian = [shared](const Vector& x) {
    Matrix j(static_cast<Index>(shared->size()), x.size());
    for (std::size_t i = 0; i < shared->size(); ++i) {
      j.row(static_cast<Index>(i)) = ((*shared)[i] * x).transpose();
    }
    return j;
  };
  spec.hessian_vec = [shared](Index i, const Vector&, const Vector& v) -> Vector {
    return (*shared)[static_cast<std::size_t>(i)] * v;
  };
  spec.domain = std::move(domain);
  spec.quadratic_forms = std::move(forms);
  spec.commutativity = commutativity;
  spec.coordinate_names = std::move(coordinate_names);
  return Parametrization(std::move(spec));
}

CommutingQuadraticFamily random_commuting_family(Index D, Index d, std::uint64_t seed) {
  if (D <= 0 || d <= 0 || d > D) throw std::invalid_argument("random commuting family needs 0 < d <= D");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix gauss(D, D);
  for (Index i = 0; i < D; ++i) {
    for (Index j = 0; j < D; ++j) gauss(i, j) = normal(rng);
  }
  const Matrix v = Eigen::HouseholderQR<Matrix>(gauss).householderQ();
  std::vector<Matrix> matrices;
  for (Index k = 0; k < d; ++k) {
    Vector lambda(D);
    for (Index i = 0; i < D; ++i) lambda[i] = normal(rng);
    const Matrix a = v * lambda.asDiagonal() * v.transpose();
    matrices.push_back(0.5 * (a + a.transpose()));
  }
  return CommutingQuadraticFamily(std::move(matrices));
}

Parametrization identity_parametrization(Index d) {
  require_positive(d, "dimension");
  ParametrizationSpec spec;
  spec.name = "identity";
  spec.x_dim = d;
  spec.w_dim = d;
  spec.eval = [](const Vector& x) { return x; };
  spec.jacobian = [d](const Vector&) -> Matrix { return Matrix::Identity(d, d); };
  spec.hessian_vec = [d](Index, const Vector&, const Vector&) -> Vector {
    return Vector::Zero(d);
  };
  spec.commutativity = Commutativity::commuting;
  return Parametrization(std::move(spec));
}

Parametrization elementwise_square(Index d) {
  require_positive(d, "dimension");
  ParametrizationSpec spec;
  spec.name = "square";
  spec.x_dim = d;
  spec.w_dim = d;
  spec.eval = [](const Vector& x) -> Vector { return x.array().square(); };
  spec.jacobian = [](const Vector& x) -> Matrix { return (2.0 * x).asDiagonal(); };
  spec.hessian_vec = [d](Index i, const Vector&, const Vector& v) -> Vector {
    Vector out = Vector::Zero(d);
    out[i] = 2.0 * v[i];
    return out;
  };
  spec.domain = Domain::positive_orthant();
  for (Index i = 0; i < d; ++i) {
    Matrix a = Matrix::Zero(d, d);
    a(i, i) = 2.0;
    spec.quadratic_forms.push_back(a);
  }
  spec.commutativity = Commutativity::commuting;
  return Parametrization(std::move(spec));
}

Parametrization u2_minus_v2(Index d) {
  require_positive(d, "dimension");
  ParametrizationSpec spec;
  spec.name = "u2v2";
  spec.x_dim = 2 * d;
  spec.w_dim = d;
  spec.eval = [d](const Vector& x) -> Vector {
    return x.head(d).array().square() - x.tail(d).array().square();
  };
  spec.jacobian = [d](const Vector& x) {
    Matrix j = Matrix::Zero(d, 2 * d);
    for (Index i = 0; i < d; ++i) {
      j(i, i) = 2.0 * x[i];
      j(i, d + i) = -2.0 * x[d + i];
    }
    return j;
  };
  spec.hessian_vec = [d](Index i, const Vector&, const Vector& v) -> Vector {
    Vector out = Vector::Zero(2 * d);
    out[i] = 2.0 * v[i];
    out[d + i] = -2.0 * v[d + i];
    return out;
  };
  spec.domain = Domain::positive_orthant();
  for (Index i = 0; i < d; ++i) {
    Matrix a = Matrix::Zero(2 * d, 2 * d);
    a(i, i) = 2.0;
    a(d + i, d + i) = -2.0;
    spec.quadratic_forms.push_back(a);
  }
  spec.commutativity = Commutativity::commuting;
  return Parametrization(std::move(spec));
}

Parametrization diagonal_lambda(const Matrix& lambdas) {
  if (lambdas.size() == 0) throw std::invalid_argument("lambda matrix is empty");
  if (lambdas.rows() > lambdas.cols()) throw std::invalid_argument("diagonal_lambda needs d <= D");
  std::vector<Matrix> forms;
  for (Index i = 0; i < lambdas.rows(); ++i) {
    forms.push_back(Matrix((2.0 * lambdas.row(i).transpose()).asDiagonal()));
  }
  return quadratic_parametrization("diagonal_lambda", std::move(forms), Domain::whole_space(),
                                   Commutativity::commuting);
}

Index symmetric_index(Index d, Index i, Index j) {
  if (i > j) std::swap(i, j);
  if (i < 0 || j >= d) throw std::out_of_range("symmetric index out of range");
  // Rows 0..i-1 of the upper triangle hold d + (d-1) + ... + (d-i+1) entries.
  return i * d - i * (i - 1) / 2 + (j - i);
}

Parametrization symmetric_factorization(Index d, Index r) {
  require_positive(d, "matrix size");
  require_positive(r, "rank");
  std::vector<Matrix> forms;
  std::vector<std::string> names;
  for (Index i = 0; i < d; ++i) {
    for (Index j = i; j < d; ++j) {
      // Ebar_ij = (E_ij + E_ji) / 2; G_ij = sum_k U_:k^T Ebar_ij U_:k.
      Matrix ebar = Matrix::Zero(d, d);
      ebar(i, j) += 0.5;
      ebar(j, i) += 0.5;
      Matrix a = Matrix::Zero(d * r, d * r);
      for (Index k = 0; k < r; ++k) a.block(k * d, k * d, d, d) = 2.0 * ebar;
      forms.push_back(std::move(a));
      names.push_back("(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")");
    }
  }
  return quadratic_parametrization("factorization_sym", std::move(forms), Domain::whole_space(),
                                   d >= 2 ? Commutativity::non_commuting : Commutativity::commuting,
                                   std::move(names));
}

Parametrization asymmetric_factorization(Index d, Index r) {
  require_positive(d, "matrix size");
  require_positive(r, "rank");
  const Index n = 2 * d * r;
  std::vector<Matrix> forms;
  std::vector<std::string> names;
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) {
      // G_ij = sum_k U_ik V_jk; U_ik = x[k*d + i], V_jk = x[d*r + k*d + j].
      Matrix a = Matrix::Zero(n, n);
      for (Index k = 0; k < r; ++k) {
        const Index u = k * d + i;
        const Index v = d * r + k * d + j;
        a(u, v) += 1.0;
        a(v, u) += 1.0;
      }
      forms.push_back(std::move(a));
      names.push_back("(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")");
    }
  }
  return quadratic_parametrization("factorization_asym", std::move(forms), Domain::whole_space(),
                                   d >= 2 ? Commutativity::non_commuting : Commutativity::commuting,
                                   std::move(names));
}

Parametrization select_coordinates(const Parametrization& g, const std::vector<Index>& coords) {
  if (coords.empty()) throw std::invalid_argument("select at least one coordinate");
  for (Index c : coords) {
    if (c < 0 || c >= g.w_dim()) throw std::out_of_range("selected coordinate out of range");
  }
  const auto d = static_cast<Index>(coords.size());
  ParametrizationSpec spec;
  spec.name = g.name() + "[";
  for (std::size_t k = 0; k < coords.size(); ++k) {
    spec.name += (k ? "," : "") + g.coordinate_name(coords[k]);
    spec.coordinate_names.push_back(g.coordinate_name(coords[k]));
  }
  spec.name += "]";
  spec.x_dim = g.x_dim();
  spec.w_dim = d;
  spec.eval = [g, coords](const Vector& x) {
    const Vector full = g(x);
    Vector w(static_cast<Index>(coords.size()));
    for (std::size_t k = 0; k < coords.size(); ++k) w[static_cast<Index>(k)] = full[coords[k]];
    return w;
  };
  if (g.has_analytic_jacobian()) {
    spec.jacobian = [g, coords](const Vector& x) {
      const Matrix full = g.analytic_jacobian(x);
      Matrix j(static_cast<Index>(coords.size()), x.size());
      for (std::size_t k = 0; k < coords.size(); ++k) j.row(static_cast<Index>(k)) = full.row(coords[k]);
      return j;
    };
  }
  if (g.has_analytic_hessian()) {
    spec.hessian_vec = [g, coords](Index i, const Vector& x, const Vector& v) {
      return g.analytic_hessian_vec(coords[static_cast<std::size_t>(i)], x, v);
    };
  }
  spec.domain = g.domain();
  if (g.is_quadratic()) {
    for (Index c : coords) spec.quadratic_forms.push_back(g.quadratic_forms()[static_cast<std::size_t>(c)]);
    spec.commutativity = max_relative_commutator(spec.quadratic_forms) <=
                                 CommutingQuadraticFamily::kDefaultCommutationTol
                             ? Commutativity::commuting
                             : Commutativity::non_commuting;
  } else {
    spec.commutativity =
        g.commutativity() == Commutativity::commuting ? Commutativity::commuting : Commutativity::unknown;
  }
  return Parametrization(std::move(spec));
}

Parametrization builtin(std::string_view family, const BuiltinParams& params) {
  if (family == "identity") return identity_parametrization(params.dim);
  if (family == "square") return elementwise_square(params.dim);
  if (family == "u2v2") return u2_minus_v2(params.dim);
  if (family == "diagonal_lambda") return diagonal_lambda(params.lambdas);
  if (family == "commuting_quadratic") {
    return CommutingQuadraticFamily(params.matrices).parametrization();
  }
  if (family == "factorization_sym") return symmetric_factorization(params.dim, params.rank);
  if (family == "factorization_asym") return asymmetric_factorization(params.dim, params.rank);
  throw std::invalid_argument("unknown parametrization family '" + std::string(family) + "'");
}

std::vector<std::string> builtin_families() {
  return {"identity", "square", "u2v2", "diagonal_lambda", "commuting_quadratic",
          "factorization_sym", "factorization_asym"};
}

}  // namespace reparam
