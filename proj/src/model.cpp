#include "latnet/model.hpp"

#include <cmath>

namespace latnet {

namespace {

constexpr Index kChunk = 4096;

// deterministic chunked reduction: values and gradients are summed in chunk
// order regardless of thread count
// Serial evaluation accumulates in place; the threaded path reduces fixed
// 4096-item chunks in chunk order, so a given thread count is reproducible.
template <typename TermFn>
ValueGrad reduce_terms(Index n, Index param_size, int threads, const TermFn& term) {
  ValueGrad out;
  out.grad = Vector::Zero(param_size);
  if (n <= 0) return out;
  if (threads <= 1 || n < 2 * kChunk) {
    for (Index s = 0; s < n; ++s) out.value += term(s, out.grad);
    return out;
  }
  const Index nchunks = (n + kChunk - 1) / kChunk;
  std::vector<Scalar> values(static_cast<size_t>(nchunks), 0.0);
  std::vector<Vector> grads(static_cast<size_t>(nchunks));
  parallel_chunks(n, threads, kChunk, [&](Index c, Index lo, Index hi) {
    Vector g = Vector::Zero(param_size);
    Scalar v = 0.0;
    for (Index s = lo; s < hi; ++s) v += term(s, g);
    values[static_cast<size_t>(c)] = v;
    grads[static_cast<size_t>(c)] = std::move(g);
  });
  for (Index c = 0; c < nchunks; ++c) {
    out.value += values[static_cast<size_t>(c)];
    out.grad += grads[static_cast<size_t>(c)];
  }
  return out;
}

Scalar log_add_exp(Scalar a, Scalar b) {
  const Scalar hi = std::max(a, b);
  const Scalar lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

}  // namespace

struct RateModel::RateEval {
  int i = 0;
  int j = 0;
  BasisSupport basis_t;  // basis at t, shared by beta(t) and dynamic nodes
  BasisSupport basis_i;
  BasisSupport basis_j;
  Vector z_i;
  Vector z_j;
  Vector x;  // covariates, size q
  Scalar log_rate = 0.0;
  bool clamped = false;
};

namespace {
const BasisSupport kStaticSupport{0, 1, {1.0, 0.0, 0.0, 0.0}};
}

RateModel::RateModel(SplineBasis basis, ParamLayout layout, SimilarityConfig similarity,
                     const CovariateSpec* covariates, std::vector<bool> static_nodes)
    : basis_(std::move(basis)),
      layout_(layout),
      similarity_(similarity),
      covariates_(covariates),
      static_nodes_(std::move(static_nodes)) {
  similarity_.validate();
  require(basis_.size() == layout_.m, "RateModel: basis/layout size mismatch");
  require(static_nodes_.empty() || static_nodes_.size() == static_cast<size_t>(layout_.p),
          "RateModel: static flag count mismatch");
  require((covariates_ == nullptr && layout_.q == 0) ||
              (covariates_ != nullptr && covariates_->dim() == layout_.q),
          "RateModel: covariate dimension mismatch");
}

Vector RateModel::position(const Coefficients& coeffs, int i, Scalar t) const {
  require(i >= 0 && i < layout_.p, "position: unknown node");
  if (is_static(i)) return coeffs.node(i).row(0).transpose();
  return spline_value(basis_.eval(t), coeffs.node(i));
}

RateModel::RateEval RateModel::eval_rate_(const Coefficients& coeffs, int i, int j,
                                          Scalar t) const {
  require(i != j, "log_rate: self loop");
  require(i >= 0 && i < layout_.p && j >= 0 && j < layout_.p, "log_rate: node out of range");
  RateEval ctx;
  ctx.i = i;
  ctx.j = j;
  ctx.basis_t = basis_.eval(t);
  ctx.basis_i = is_static(i) ? kStaticSupport : ctx.basis_t;
  ctx.basis_j = is_static(j) ? kStaticSupport : ctx.basis_t;
  ctx.z_i = spline_value(ctx.basis_i, coeffs.node(i));
  ctx.z_j = spline_value(ctx.basis_j, coeffs.node(j));

  Scalar g = 0.0;
  switch (similarity_.kind) {
    case SimilarityConfig::Kind::InnerProduct:
      g = similarity_.lambda * ctx.z_i.dot(ctx.z_j);
      break;
    case SimilarityConfig::Kind::NegSqEuclid:
      g = -(ctx.z_i - ctx.z_j).squaredNorm();
      break;
  }
  if (layout_.q > 0) {
    ctx.x = covariates_->values(i, j, t);
    RowVector beta_t = RowVector::Zero(layout_.q);
    for (int k = 0; k < ctx.basis_t.count; ++k)
      beta_t += ctx.basis_t.weight[static_cast<size_t>(k)] *
                coeffs.beta().row(ctx.basis_t.first + k);
    g += beta_t.dot(ctx.x);
  }
  if (layout_.propensities) g += coeffs.propensity(i) + coeffs.propensity(j);

  if (g > kLogRateClamp) {
    ctx.log_rate = kLogRateClamp;
    ctx.clamped = true;
  } else if (g < -kLogRateClamp) {
    ctx.log_rate = -kLogRateClamp;
    ctx.clamped = true;
  } else {
    ctx.log_rate = g;
  }
  return ctx;
}

Scalar RateModel::log_rate(const Coefficients& coeffs, int i, int j, Scalar t) const {
  return eval_rate_(coeffs, i, j, t).log_rate;
}

void RateModel::accumulate_rate_grad_(const RateEval& ctx, Scalar scale, Vector& grad) const {
  if (ctx.clamped || scale == 0.0) return;
  Vector d_i(layout_.d), d_j(layout_.d);
  switch (similarity_.kind) {
    case SimilarityConfig::Kind::InnerProduct:
      d_i = similarity_.lambda * ctx.z_j;
      d_j = similarity_.lambda * ctx.z_i;
      break;
    case SimilarityConfig::Kind::NegSqEuclid: {
      const Vector diff = ctx.z_i - ctx.z_j;
      d_i = -2.0 * diff;
      d_j = 2.0 * diff;
      break;
    }
  }
  for (int k = 0; k < ctx.basis_i.count; ++k) {
    const Scalar w = scale * ctx.basis_i.weight[static_cast<size_t>(k)];
    for (int c = 0; c < layout_.d; ++c)
      grad[layout_.coeff_index(ctx.i, ctx.basis_i.first + k, c)] += w * d_i[c];
  }
  for (int k = 0; k < ctx.basis_j.count; ++k) {
    const Scalar w = scale * ctx.basis_j.weight[static_cast<size_t>(k)];
    for (int c = 0; c < layout_.d; ++c)
      grad[layout_.coeff_index(ctx.j, ctx.basis_j.first + k, c)] += w * d_j[c];
  }
  if (layout_.q > 0) {
    const Index beta0 = layout_.beta_offset();
    for (int k = 0; k < ctx.basis_t.count; ++k) {
      const Scalar w = scale * ctx.basis_t.weight[static_cast<size_t>(k)];
      for (int l = 0; l < layout_.q; ++l)
        grad[beta0 + static_cast<Index>(l) * layout_.m + ctx.basis_t.first + k] += w * ctx.x[l];
    }
  }
  if (layout_.propensities) {
    grad[layout_.propensity_offset() + ctx.i] += scale;
    grad[layout_.propensity_offset() + ctx.j] += scale;
  }
}

ValueGrad RateModel::loglik_discrete(const Coefficients& coeffs,
                                     const std::vector<CaseRecord>& cells, int threads) const {
  return reduce_terms(
      static_cast<Index>(cells.size()), layout_.size(), threads,
      [&](Index s, Vector& grad) {
        const CaseRecord& cell = cells[static_cast<size_t>(s)];
        require(cell.count >= 0, "loglik_discrete: negative count");
        require(cell.width > 0.0, "loglik_discrete: nonpositive interval width");
        const RateEval ctx = eval_rate_(coeffs, cell.src, cell.dst, cell.time);
        const Scalar mean = std::exp(ctx.log_rate) * cell.width;
        const Scalar value = -mean + static_cast<Scalar>(cell.count) * std::log(mean);
        accumulate_rate_grad_(ctx, -mean + static_cast<Scalar>(cell.count), grad);
        return value;
      });
}

ValueGrad RateModel::loglik_discrete_cc(const Coefficients& coeffs,
                                        const std::vector<CaseRecord>& cases,
                                        const std::vector<ControlRecord>& controls,
                                        Scalar n_zero_population, int threads) const {
  require(!controls.empty(), "loglik_discrete_cc: empty control list");
  for (const auto& c : cases)
    require(c.count > 0, "loglik_discrete_cc: case with zero count");
  const Scalar zero_weight = n_zero_population / static_cast<Scalar>(controls.size());
  ValueGrad out = loglik_discrete(coeffs, cases, threads);
  ValueGrad zeros = reduce_terms(
      static_cast<Index>(controls.size()), layout_.size(), threads,
      [&](Index s, Vector& grad) {
        const ControlRecord& cell = controls[static_cast<size_t>(s)];
        const RateEval ctx = eval_rate_(coeffs, cell.src, cell.dst, cell.time);
        const Scalar mean = std::exp(ctx.log_rate) * cell.width;
        accumulate_rate_grad_(ctx, -mean, grad);
        return -mean;
      });
  out.value += zero_weight * zeros.value;
  out.grad += zero_weight * zeros.grad;
  return out;
}

ValueGrad RateModel::loglik_partial_cc(const Coefficients& coeffs,
                                       const std::vector<CaseRecord>& cases,
                                       const std::vector<ControlRecord>& controls,
                                       int controls_per_case, int threads) const {
  require(controls_per_case >= 1, "loglik_partial_cc: need at least one control per case");
  require(controls.size() == cases.size() * static_cast<size_t>(controls_per_case),
          "loglik_partial_cc: control list size mismatch");
  return reduce_terms(
      static_cast<Index>(cases.size()), layout_.size(), threads,
      [&](Index s, Vector& grad) {
        const CaseRecord& e = cases[static_cast<size_t>(s)];
        const RateEval case_ctx = eval_rate_(coeffs, e.src, e.dst, e.time);
        std::vector<RateEval> ctrl_ctx;
        ctrl_ctx.reserve(static_cast<size_t>(controls_per_case));
        Scalar lse = case_ctx.log_rate;
        for (int c = 0; c < controls_per_case; ++c) {
          const ControlRecord& ctrl =
              controls[static_cast<size_t>(s) * controls_per_case + static_cast<size_t>(c)];
          ctrl_ctx.push_back(eval_rate_(coeffs, ctrl.src, ctrl.dst, e.time));
          lse = log_add_exp(lse, ctrl_ctx.back().log_rate);
        }
        const Scalar value = case_ctx.log_rate - lse;
        accumulate_rate_grad_(case_ctx, 1.0 - std::exp(case_ctx.log_rate - lse), grad);
        for (const auto& ctx : ctrl_ctx)
          accumulate_rate_grad_(ctx, -std::exp(ctx.log_rate - lse), grad);
        return value;
      });
}

ValueGrad smoothness_penalty(const Coefficients& coeffs) {
  const ParamLayout& layout = coeffs.layout();
  require(layout.m >= 2, "smoothness_penalty: need at least two basis functions");
  ValueGrad out;
  out.grad = Vector::Zero(layout.size());
  for (int i = 0; i < layout.p; ++i) {
    out.value += first_difference_sum(coeffs.node(i));
    BlockMap g = node_block(layout, out.grad, i);
    add_first_difference_grad(coeffs.node(i), g);
  }
  return out;
}

void project_unit_norm_rows(Coefficients& coeffs) {
  const ParamLayout& layout = coeffs.layout();
  for (int i = 0; i < layout.p; ++i) {
    BlockMap block = coeffs.node(i);
    for (Index k = 0; k < block.rows(); ++k) {
      const Scalar norm = block.row(k).norm();
      if (norm > 1e-12) block.row(k) /= norm;
    }
  }
}

MiniBatchLoss assemble_loss(const RateModel& model, const Coefficients& coeffs,
                            const MiniBatch& batch, const PenaltySpec& penalties, int threads) {
  MiniBatchLoss loss;
  loss.rescale = batch.rescale;

  ValueGrad lik;
  switch (batch.mode) {
    case BatchMode::DenseDiscrete:
      lik = model.loglik_discrete(coeffs, batch.cases, threads);
      lik.value *= batch.rescale;
      lik.grad *= batch.rescale;
      break;
    case BatchMode::CcDiscrete: {
      lik = model.loglik_discrete(coeffs, batch.cases, threads);
      lik.value *= batch.rescale;
      lik.grad *= batch.rescale;
      if (!batch.controls.empty()) {
        // the zero-cell sum carries its own N0/n0 weight, not |E|/|B|
        ValueGrad zeros = model.loglik_discrete_cc(
            coeffs, {}, batch.controls, static_cast<Scalar>(batch.controls.size()), threads);
        lik.value += batch.zero_weight * zeros.value;
        lik.grad += batch.zero_weight * zeros.grad;
      }
      break;
    }
    case BatchMode::CcPartial:
      lik = model.loglik_partial_cc(coeffs, batch.cases, batch.controls, batch.controls_per_case,
                                    threads);
      lik.value *= batch.rescale;
      lik.grad *= batch.rescale;
      break;
  }
  loss.loglik = lik.value;
  loss.grad = std::move(lik.grad);

  if (penalties.gamma_smooth != 0.0) {
    const ValueGrad smooth = smoothness_penalty(coeffs);
    loss.p_smooth = -penalties.gamma_smooth * smooth.value;
    loss.grad -= penalties.gamma_smooth * smooth.grad;
  }
  if (penalties.gamma_clust != 0.0 && penalties.centroid_rows != nullptr) {
    const ValueGrad clust =
        clust_penalty_fast(coeffs, *penalties.centroid_rows, penalties.gamma_clust);
    loss.p_clust = clust.value;
    loss.grad += clust.grad;
  }
  loss.total = loss.loglik + loss.p_smooth + loss.p_clust;
  return loss;
}

}  // namespace latnet
