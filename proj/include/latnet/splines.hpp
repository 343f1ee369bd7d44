#pragma once

#include <array>
#include <vector>

#include "latnet/common.hpp"

namespace latnet {

// One basis evaluation: at most `order` consecutive basis functions are
// nonzero at any t.
struct BasisSupport {
  int first = 0;                    // index of the first nonzero basis
  int count = 0;                    // number of stored weights (<= 4)
  std::array<Scalar, 4> weight{};   // nonnegative, sums to 1 on [0, T]

  Scalar sum() const {
    Scalar s = 0.0;
    for (int k = 0; k < count; ++k) s += weight[static_cast<size_t>(k)];
    return s;
  }
};

// Cubic B-spline basis on [0, T] with clamped boundary knots and equally
// spaced interior knots. With m basis functions the interior is split into
// m - 3 spans, so every t has at most 4 active basis functions.
class SplineBasis {
 public:
  static constexpr int kOrder = 4;  // cubic

  SplineBasis(int num_basis, Scalar horizon);

  int size() const { return m_; }
  Scalar horizon() const { return horizon_; }
  const std::vector<Scalar>& knots() const { return knots_; }

  // De Boor evaluation of the nonzero basis functions at t. Exact zeros at
  // span boundaries are trimmed, so at t = 0 only the first basis survives.
  BasisSupport eval(Scalar t) const;

 private:
  int span_of(Scalar t) const;

  int m_;
  Scalar horizon_;
  std::vector<Scalar> knots_;  // length m + order
};

// z(t) = sum_k b_k(t) * coeffs.row(first + k); coeffs is an m x d block.
template <typename Derived>
Vector spline_value(const BasisSupport& b, const Eigen::MatrixBase<Derived>& coeffs) {
  Vector z = Vector::Zero(coeffs.cols());
  for (int k = 0; k < b.count; ++k)
    z += b.weight[static_cast<size_t>(k)] * coeffs.row(b.first + k).transpose();
  return z;
}

// Unscaled first-difference sum S = sum_k ||row_k - row_{k-1}||^2 for one
// coefficient block; the smoothness penalty is -gamma_smooth * S.
template <typename Derived>
Scalar first_difference_sum(const Eigen::MatrixBase<Derived>& coeffs) {
  Scalar s = 0.0;
  for (Index k = 1; k < coeffs.rows(); ++k)
    s += (coeffs.row(k) - coeffs.row(k - 1)).squaredNorm();
  return s;
}

// Accumulates d S / d coeffs into grad (same shape as coeffs).
template <typename DerivedA, typename DerivedB>
void add_first_difference_grad(const Eigen::MatrixBase<DerivedA>& coeffs,
                               Eigen::MatrixBase<DerivedB>& grad, Scalar scale = 1.0) {
  for (Index k = 1; k < coeffs.rows(); ++k) {
    const RowVector diff = coeffs.row(k) - coeffs.row(k - 1);
    grad.row(k) += scale * 2.0 * diff;
    grad.row(k - 1) -= scale * 2.0 * diff;
  }
}

}  // namespace latnet
