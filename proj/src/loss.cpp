#include "reparam/loss.hpp"

#include <cmath>
#include <stdexcept>

namespace reparam {

Loss zero_loss(Index d) {
  return {"zero", d, [](const Vector&) { return 0.0; },
          [d](const Vector&) -> Vector { return Vector::Zero(d); }};
}

Loss linear_loss(const Vector& c) {
  return {"linear", c.size(), [c](const Vector& w) { return c.dot(w); },
          [c](const Vector&) -> Vector { return c; }};
}

Loss quadratic_loss(const Vector& target) {
  return {"quadratic", target.size(),
          [target](const Vector& w) { return 0.5 * (w - target).squaredNorm(); },
          [target](const Vector& w) -> Vector { return w - target; }};
}

Loss regression_loss(const Matrix& z, const Vector& y) {
  if (z.rows() != y.size()) throw std::invalid_argument("regression loss: Z rows must match labels");
  return {"regression", z.cols(), [z, y](const Vector& w) { return 0.5 * (z * w - y).squaredNorm(); },
          [z, y](const Vector& w) -> Vector { return z.transpose() * (z * w - y); }};
}

TimeDependentLoss::TimeDependentLoss(std::vector<Segment> segments) : segments_(std::move(segments)) {
  if (segments_.empty()) throw std::invalid_argument("time-dependent loss needs a segment");
  if (segments_.front().start != 0.0) throw std::invalid_argument("first loss segment must start at 0");
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const Segment& s = segments_[i];
    if (!s.loss.gradient) throw std::invalid_argument("loss segment without gradient");
    if (s.loss.dim != segments_.front().loss.dim) {
      throw std::invalid_argument("loss segments disagree on dimension");
    }
    if (!std::isfinite(s.start)) throw std::invalid_argument("segment start must be finite");
    if (i > 0 && !(s.start > segments_[i - 1].start)) {
      throw std::invalid_argument("segment starts must strictly increase");
    }
  }
}

TimeDependentLoss::TimeDependentLoss(Loss loss) : TimeDependentLoss(std::vector<Segment>{{0.0, std::move(loss)}}) {}

std::size_t TimeDependentLoss::segment_index(double t) const {
  std::size_t i = 0;
  while (i + 1 < segments_.size() && segments_[i + 1].start <= t) ++i;
  return i;
}

std::vector<double> TimeDependentLoss::breakpoints() const {
  std::vector<double> out;
  for (std::size_t i = 1; i < segments_.size(); ++i) out.push_back(segments_[i].start);
  return out;
}

}  // namespace reparam
