#pragma once

#include "latnet/common.hpp"

namespace latnet {

// Flat layout of all free model parameters:
//   [ node spline blocks | covariate spline block | propensities ]
// Node i owns an m x d block stored column-major at offset i*m*d, so entry
// (basis k, dim c) lives at i*m*d + c*m + k.
struct ParamLayout {
  int p = 0;  // nodes
  int m = 0;  // spline basis count
  int d = 0;  // latent dimension
  int q = 0;  // covariate count
  bool propensities = false;

  Index node_block() const { return static_cast<Index>(m) * d; }
  Index node_offset(int i) const { return static_cast<Index>(i) * node_block(); }
  Index beta_offset() const { return static_cast<Index>(p) * node_block(); }
  Index beta_size() const { return static_cast<Index>(m) * q; }
  Index propensity_offset() const { return beta_offset() + beta_size(); }
  Index size() const { return propensity_offset() + (propensities ? p : 0); }

  Index coeff_index(int node, int basis, int dim) const {
    return node_offset(node) + static_cast<Index>(dim) * m + basis;
  }

  bool operator==(const ParamLayout&) const = default;
};

using BlockMap = Eigen::Map<Matrix>;
using ConstBlockMap = Eigen::Map<const Matrix>;

// Value-semantic view over a flat parameter vector.
class Coefficients {
 public:
  Coefficients() = default;
  explicit Coefficients(const ParamLayout& layout)
      : layout_(layout), values_(Vector::Zero(layout.size())) {}
  Coefficients(const ParamLayout& layout, Vector values)
      : layout_(layout), values_(std::move(values)) {
    require(values_.size() == layout_.size(), "Coefficients: size mismatch");
  }

  const ParamLayout& layout() const { return layout_; }
  const Vector& flat() const { return values_; }
  Vector& flat() { return values_; }

  ConstBlockMap node(int i) const {
    check_node_(i);
    return ConstBlockMap(values_.data() + layout_.node_offset(i), layout_.m, layout_.d);
  }
  BlockMap node(int i) {
    check_node_(i);
    return BlockMap(values_.data() + layout_.node_offset(i), layout_.m, layout_.d);
  }
  ConstBlockMap beta() const {
    return ConstBlockMap(values_.data() + layout_.beta_offset(), layout_.m, layout_.q);
  }
  BlockMap beta() {
    return BlockMap(values_.data() + layout_.beta_offset(), layout_.m, layout_.q);
  }
  Scalar propensity(int i) const {
    require(layout_.propensities, "Coefficients: propensities disabled");
    check_node_(i);
    return values_[layout_.propensity_offset() + i];
  }
  Scalar& propensity(int i) {
    require(layout_.propensities, "Coefficients: propensities disabled");
    check_node_(i);
    return values_[layout_.propensity_offset() + i];
  }

 private:
  void check_node_(int i) const {
    require(i >= 0 && i < layout_.p, "Coefficients: unknown node index");
  }

  ParamLayout layout_;
  Vector values_;
};

// Same block views over an externally owned gradient vector.
inline BlockMap node_block(const ParamLayout& layout, Vector& flat, int i) {
  return BlockMap(flat.data() + layout.node_offset(i), layout.m, layout.d);
}
inline BlockMap beta_block(const ParamLayout& layout, Vector& flat) {
  return BlockMap(flat.data() + layout.beta_offset(), layout.m, layout.q);
}

}  // namespace latnet
