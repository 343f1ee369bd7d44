#pragma once

#include <vector>

#include "latnet/cluster.hpp"
#include "latnet/events.hpp"
#include "latnet/params.hpp"
#include "latnet/sampler.hpp"
#include "latnet/splines.hpp"

namespace latnet {

struct SimilarityConfig {
  enum class Kind { InnerProduct, NegSqEuclid };
  Kind kind = Kind::NegSqEuclid;
  Scalar lambda = 1.0;     // scalar Lambda, inner-product kind only
  bool unit_norm = false;  // hyper-sphere variant, inner-product kind only

  void validate() const {
    require(std::isfinite(lambda), "SimilarityConfig: Lambda must be finite");
    require(!unit_norm || kind == Kind::InnerProduct,
            "SimilarityConfig: unit-norm constraint needs the inner-product kind");
  }
};

// log lambda_ij(t) = m(z_i(t), z_j(t)) + beta(t)^T x_ij(t) [+ prop_i + prop_j]
// The log rate is clamped to +-kLogRateClamp before exponentiation; outside
// the clamp the gradient is zero.
class RateModel {
 public:
  static constexpr Scalar kLogRateClamp = 40.0;

  RateModel(SplineBasis basis, ParamLayout layout, SimilarityConfig similarity,
            const CovariateSpec* covariates = nullptr, std::vector<bool> static_nodes = {});

  const SplineBasis& basis() const { return basis_; }
  const ParamLayout& layout() const { return layout_; }
  const SimilarityConfig& similarity() const { return similarity_; }
  bool is_static(int i) const {
    return !static_nodes_.empty() && static_nodes_[static_cast<size_t>(i)];
  }

  // z_i(t); static nodes report their stored point (first coefficient row)
  Vector position(const Coefficients& coeffs, int i, Scalar t) const;
  Scalar log_rate(const Coefficients& coeffs, int i, int j, Scalar t) const;

  // Poisson interval likelihood over a batch of (k, i, j, y) cells
  ValueGrad loglik_discrete(const Coefficients& coeffs, const std::vector<CaseRecord>& cells,
                            int threads = 1) const;

  // Appendix-B case-control form: case cells as above, zero cells
  // overweighted by N0 / n0.
  ValueGrad loglik_discrete_cc(const Coefficients& coeffs, const std::vector<CaseRecord>& cases,
                               const std::vector<ControlRecord>& controls, Scalar n_zero_population,
                               int threads = 1) const;

  // Cox partial likelihood with sampled controls; `controls_per_case`
  // consecutive controls belong to each case.
  ValueGrad loglik_partial_cc(const Coefficients& coeffs, const std::vector<CaseRecord>& cases,
                              const std::vector<ControlRecord>& controls, int controls_per_case,
                              int threads = 1) const;

 private:
  struct RateEval;
  RateEval eval_rate_(const Coefficients& coeffs, int i, int j, Scalar t) const;
  void accumulate_rate_grad_(const RateEval& ctx, Scalar scale, Vector& grad) const;

  SplineBasis basis_;
  ParamLayout layout_;
  SimilarityConfig similarity_;
  const CovariateSpec* covariates_;
  std::vector<bool> static_nodes_;
};

struct PenaltySpec {
  Scalar gamma_smooth = 0.0;
  Scalar gamma_clust = 0.0;
  const Matrix* centroid_rows = nullptr;  // stacked (p*m) x d; null disables P_clust
};

struct MiniBatchLoss {
  Scalar loglik = 0.0;    // rescaled likelihood part
  Scalar p_smooth = 0.0;  // -gamma_smooth * S
  Scalar p_clust = 0.0;   // -gamma_clust * sum ||alpha - c||^2
  Scalar total = 0.0;
  Scalar rescale = 1.0;   // |E| / |B|
  Vector grad;            // d total / d coefficients
};

// Unscaled first-difference sum over the node spline blocks with gradient.
ValueGrad smoothness_penalty(const Coefficients& coeffs);

// Hyper-sphere variant: renormalize each node coefficient row to unit length
// after an optimizer step. Rows with negligible norm are left in place.
void project_unit_norm_rows(Coefficients& coeffs);

// (|E|/|B|) * l_B + P_smooth + P_clust, penalties over the full parameter
// set. In cc-discrete mode the control sum keeps its own N0/n0 weight.
MiniBatchLoss assemble_loss(const RateModel& model, const Coefficients& coeffs,
                            const MiniBatch& batch, const PenaltySpec& penalties,
                            int threads = 1);

}  // namespace latnet
