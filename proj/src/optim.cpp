#include "latnet/optim.hpp"

#include <algorithm>
#include <cmath>

namespace latnet {

AdamState::AdamState(Index size, AdamOptions options)
    : options_(options), m_(Vector::Zero(size)), v_(Vector::Zero(size)) {
  require(options_.xi1 >= 0.0 && options_.xi1 < 1.0, "AdamState: xi1 must be in [0, 1)");
  require(options_.xi2 >= 0.0 && options_.xi2 < 1.0, "AdamState: xi2 must be in [0, 1)");
  require(options_.step > 0.0, "AdamState: step size must be positive");
  require(options_.epsilon >= 0.0, "AdamState: epsilon must be nonnegative");
}

void AdamState::step(const Vector& gradient, Vector& params) {
  require(gradient.size() == m_.size() && params.size() == m_.size(),
          "AdamState: dimension mismatch");
  for (Index i = 0; i < gradient.size(); ++i)
    if (!std::isfinite(gradient[i]))
      fail("AdamState: non-finite gradient at parameter " + std::to_string(i));

  ++iteration_;
  m_ = options_.xi1 * m_ + (1.0 - options_.xi1) * gradient;
  v_ = options_.xi2 * v_ + (1.0 - options_.xi2) * gradient.cwiseProduct(gradient);

  Scalar m_correction = 1.0, v_correction = 1.0;
  if (options_.bias_correction) {
    m_correction = 1.0 - std::pow(options_.xi1, static_cast<Scalar>(iteration_));
    v_correction = 1.0 - std::pow(options_.xi2, static_cast<Scalar>(iteration_));
  }
  const Scalar eps = options_.epsilon;
  Eigen::ArrayXd denom;
  if (options_.variant == AdamVariant::PaperLiteral) {
    denom = (v_.array() / v_correction) + eps;
  } else {
    denom = (v_.array() / v_correction).sqrt() + eps;
  }
  // zero moments with eps = 0 stay put instead of dividing by zero
  params.array() += (denom > 0.0)
                        .select(options_.step * (m_.array() / m_correction) / denom, 0.0);
}

bool should_stop(const std::vector<Scalar>& smoothed_trace, int patience) {
  require(!smoothed_trace.empty(), "should_stop: empty trace");
  size_t argmax = 0;
  for (size_t i = 1; i < smoothed_trace.size(); ++i)
    if (smoothed_trace[i] > smoothed_trace[argmax]) argmax = i;
  return smoothed_trace.size() - 1 - argmax >= static_cast<size_t>(patience);
}

bool StoppingMonitor::push(Scalar value) {
  if (!started_) {
    started_ = true;
    smoothed_ = value;
    best_ = value;
    since_best_ = 0;
    return false;
  }
  smoothed_ = weight_ * smoothed_ + (1.0 - weight_) * value;
  if (smoothed_ > best_) {
    best_ = smoothed_;
    since_best_ = 0;
  } else {
    ++since_best_;
  }
  return since_best_ >= patience_;
}

}  // namespace latnet
