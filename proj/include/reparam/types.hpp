#pragma once

#include <Eigen/Dense>

namespace reparam {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

}  // namespace reparam
