#include "latnet/splines.hpp"

namespace latnet {

SplineBasis::SplineBasis(int num_basis, Scalar horizon) : m_(num_basis), horizon_(horizon) {
  require(m_ >= kOrder, "SplineBasis: need at least 4 basis functions for a cubic spline");
  require(horizon_ > 0.0 && std::isfinite(horizon_), "SplineBasis: horizon must be positive");
  // clamped knot vector: order repeats at both ends, m - order + 1 spans
  const int spans = m_ - kOrder + 1;
  knots_.assign(static_cast<size_t>(m_ + kOrder), 0.0);
  for (int i = 0; i < m_ + kOrder; ++i) {
    if (i < kOrder) {
      knots_[static_cast<size_t>(i)] = 0.0;
    } else if (i >= m_) {
      knots_[static_cast<size_t>(i)] = horizon_;
    } else {
      knots_[static_cast<size_t>(i)] = horizon_ * static_cast<Scalar>(i - kOrder + 1) /
                                       static_cast<Scalar>(spans);
    }
  }
}

int SplineBasis::span_of(Scalar t) const {
  // knot span index s with knots[s] <= t < knots[s+1], clamped at the end
  const int lo = kOrder - 1;
  const int hi = m_ - 1;  // last span start
  if (t >= horizon_) return hi;
  const int spans = m_ - kOrder + 1;
  int s = lo + static_cast<int>(t / horizon_ * static_cast<Scalar>(spans));
  if (s > hi) s = hi;
  // guard against floating-point edge cases at span boundaries
  while (s > lo && t < knots_[static_cast<size_t>(s)]) --s;
  while (s < hi && t >= knots_[static_cast<size_t>(s + 1)]) ++s;
  return s;
}

BasisSupport SplineBasis::eval(Scalar t) const {
  require(t >= 0.0 && t <= horizon_, "SplineBasis::eval: t outside [0, T]");
  const int s = span_of(t);

  // de Boor triangular scheme: values[j] = B_{s-order+1+j}(t), j = 0..order-1
  std::array<Scalar, kOrder> values{};
  std::array<Scalar, kOrder> left{};
  std::array<Scalar, kOrder> right{};
  values[0] = 1.0;
  for (int j = 1; j < kOrder; ++j) {
    left[static_cast<size_t>(j)] = t - knots_[static_cast<size_t>(s + 1 - j)];
    right[static_cast<size_t>(j)] = knots_[static_cast<size_t>(s + j)] - t;
    Scalar saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const Scalar denom = right[static_cast<size_t>(r + 1)] + left[static_cast<size_t>(j - r)];
      const Scalar tmp = denom > 0.0 ? values[static_cast<size_t>(r)] / denom : 0.0;
      values[static_cast<size_t>(r)] = saved + right[static_cast<size_t>(r + 1)] * tmp;
      saved = left[static_cast<size_t>(j - r)] * tmp;
    }
    values[static_cast<size_t>(j)] = saved;
  }

  BasisSupport out;
  int first = s - kOrder + 1;
  int lo = 0;
  int hi = kOrder - 1;
  while (lo <= hi && values[static_cast<size_t>(lo)] == 0.0) ++lo;
  while (hi >= lo && values[static_cast<size_t>(hi)] == 0.0) --hi;
  out.first = first + lo;
  out.count = hi - lo + 1;
  for (int k = 0; k < out.count; ++k)
    out.weight[static_cast<size_t>(k)] = values[static_cast<size_t>(lo + k)];
  return out;
}

}  // namespace latnet
