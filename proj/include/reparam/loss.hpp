#pragma once

#include <functional>
#include <string>
#include <vector>

#include "reparam/types.hpp"

namespace reparam {

/// Loss on model space with value and gradient.
struct Loss {
  std::string name;
  Index dim = 0;
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
};

Loss zero_loss(Index d);

// <c, w>
Loss linear_loss(const Vector& c);

// 1/2 ||w - target||^2
Loss quadratic_loss(const Vector& target);

// 1/2 ||Z w - y||^2 with Z stored n x d (rows are data points).
Loss regression_loss(const Matrix& z, const Vector& y);

/// Piecewise-constant-in-time loss: segment i is active on [start_i, start_{i+1}),
/// the last one on [start_k, inf).
class TimeDependentLoss {
 public:
  struct Segment {
    double start = 0.0;
    Loss loss;
  };

  // Throws std::invalid_argument unless the first start is 0, starts strictly
  // increase and all losses share one dimension.
  explicit TimeDependentLoss(std::vector<Segment> segments);
  // Single segment on [0, inf).
  TimeDependentLoss(Loss loss);  // NOLINT(google-explicit-constructor)

  Index dim() const { return segments_.front().loss.dim; }
  const std::vector<Segment>& segments() const { return segments_; }

  std::size_t segment_index(double t) const;
  const Loss& at(double t) const { return segments_[segment_index(t)].loss; }

  // Segment starts other than 0.
  std::vector<double> breakpoints() const;

 private:
  std::vector<Segment> segments_;
};

}  // namespace reparam
