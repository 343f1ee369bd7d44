#pragma once

#include <vector>

#include "latnet/common.hpp"

namespace latnet {

enum class AdamVariant {
  PaperLiteral,  // ascent step psi * m_hat / (v_hat + eps), Newton-like m/v
  SqrtVariant,   // ascent step psi * m_hat / (sqrt(v_hat) + eps)
};

struct AdamOptions {
  Scalar xi1 = 0.9;          // EWMA decay, first moment
  Scalar xi2 = 0.999;        // EWMA decay, second moment
  Scalar step = 1e-2;        // psi
  Scalar epsilon = 1e-8;     // division stabilizer
  AdamVariant variant = AdamVariant::SqrtVariant;
  bool bias_correction = true;
};

// Gradient-ascent Adam. Moments are EWMAs of g and g^2; the first steps use
// 1/(1 - xi^k) bias correction unless disabled for the literal study mode.
class AdamState {
 public:
  AdamState(Index size, AdamOptions options);

  const AdamOptions& options() const { return options_; }
  long iteration() const { return iteration_; }
  const Vector& first_moment() const { return m_; }
  const Vector& second_moment() const { return v_; }

  // params += step direction; throws on non-finite gradient entries,
  // naming the offending parameter index.
  void step(const Vector& gradient, Vector& params);

 private:
  AdamOptions options_;
  Vector m_;
  Vector v_;
  long iteration_ = 0;
};

// Stop when the running maximum has not improved for `patience` entries of
// the (already smoothed) trace.
bool should_stop(const std::vector<Scalar>& smoothed_trace, int patience);

// EWMA smoothing plus the patience rule in one pass; push returns true when
// the fit should stop.
class StoppingMonitor {
 public:
  explicit StoppingMonitor(int patience, Scalar ewma_weight = 0.99)
      : patience_(patience), weight_(ewma_weight) {}

  bool push(Scalar value);
  Scalar smoothed() const { return smoothed_; }
  Scalar best() const { return best_; }
  long since_best() const { return since_best_; }

 private:
  int patience_;
  Scalar weight_;
  bool started_ = false;
  Scalar smoothed_ = 0.0;
  Scalar best_ = 0.0;
  long since_best_ = 0;
};

}  // namespace latnet
