#include "latnet/svi.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace latnet {

namespace {

Vector pack(const Vector& a, const Vector& b) {
  Vector out(a.size() + b.size());
  out.head(a.size()) = a;
  out.tail(b.size()) = b;
  return out;
}

}  // namespace

VariationalState::VariationalState(const ParamLayout& layout, const VariationalOptions& options)
    : layout_(layout), options_(options) {
  require(options_.sigma_init > 0.0, "VariationalState: sigma_init must be positive");
  require(options_.coeff_prior_sigma > 0.0 && options_.gamma_prior_sigma > 0.0,
          "VariationalState: prior sigmas must be positive");
  mu_ = Vector::Zero(size());
  mu_[gamma_smooth_slot()] = options_.gamma_prior_mu;
  mu_[gamma_clust_slot()] = options_.gamma_prior_mu;
  rho_ = Vector::Constant(size(), std::log(options_.sigma_init));
}

Coefficients reparam_sample(const VariationalState& state, Rng& rng, Vector* eps_out) {
  const Index n = state.model_size();
  Vector eps = rng.normal_vector(n);
  Vector draw = state.mu().head(n) + state.rho().head(n).array().exp().matrix().cwiseProduct(eps);
  if (eps_out != nullptr) *eps_out = std::move(eps);
  return Coefficients(state.layout(), std::move(draw));
}

namespace {

// accumulates scale * gradient into (d_mu, d_sigma), returns the value
Scalar add_expected_smooth(const VariationalState& state, const Vector& sigma, Scalar scale,
                           Vector& d_mu, Vector& d_sigma) {
  const ParamLayout& layout = state.layout();
  require(layout.m >= 2, "expected_smooth: need at least two basis functions");
  const Index gs = state.gamma_smooth_slot();
  const Scalar mu_g = state.mu()[gs];
  const Scalar sigma_g = sigma[gs];
  const Scalar e_gamma = std::exp(mu_g + 0.5 * sigma_g * sigma_g);

  // sum over nodes of E||alpha_k - alpha_{k-1}||^2 =
  //   (mu_k - mu_{k-1})^2 + sigma_k^2 + sigma_{k-1}^2 per coordinate
  Scalar expected_sum = 0.0;
  const int m = layout.m;
  for (int i = 0; i < layout.p; ++i) {
    const Index off = layout.node_offset(i);
    const ConstBlockMap mu_block(state.mu().data() + off, m, layout.d);
    const ConstBlockMap sigma_block(sigma.data() + off, m, layout.d);
    const Matrix diff = mu_block.bottomRows(m - 1) - mu_block.topRows(m - 1);
    expected_sum += diff.squaredNorm() + sigma_block.squaredNorm() +
                    sigma_block.middleRows(1, m - 2).squaredNorm();
    BlockMap mu_grad(d_mu.data() + off, m, layout.d);
    mu_grad.bottomRows(m - 1) += scale * -e_gamma * 2.0 * diff;
    mu_grad.topRows(m - 1) -= scale * -e_gamma * 2.0 * diff;
    BlockMap sigma_grad(d_sigma.data() + off, m, layout.d);
    sigma_grad += scale * -e_gamma * 2.0 * sigma_block;
    sigma_grad.middleRows(1, m - 2) +=
        scale * -e_gamma * 2.0 * sigma_block.middleRows(1, m - 2);
  }

  const Scalar normalizer =
      0.5 * static_cast<Scalar>(layout.p) * layout.d * (layout.m - 1);
  d_mu[gs] += scale * (normalizer - e_gamma * expected_sum);
  d_sigma[gs] += scale * (-e_gamma * sigma_g * expected_sum);
  return normalizer * mu_g - e_gamma * expected_sum;
}

Scalar add_expected_clust(const VariationalState& state, const Vector& sigma,
                          const Matrix& centroid_rows, std::optional<Scalar> normalizer_count,
                          Scalar scale, Vector& d_mu, Vector& d_sigma) {
  const ParamLayout& layout = state.layout();
  require(centroid_rows.rows() == static_cast<Index>(layout.p) * layout.m &&
              centroid_rows.cols() == layout.d,
          "expected_clust: centroid shape mismatch");
  const Index gc = state.gamma_clust_slot();
  const Scalar mu_g = state.mu()[gc];
  const Scalar sigma_g = sigma[gc];
  const Scalar e_gamma = std::exp(mu_g + 0.5 * sigma_g * sigma_g);

  Scalar expected_sum = 0.0;
  const int m = layout.m;
  for (int i = 0; i < layout.p; ++i) {
    const Index off = layout.node_offset(i);
    const ConstBlockMap mu_block(state.mu().data() + off, m, layout.d);
    const ConstBlockMap sigma_block(sigma.data() + off, m, layout.d);
    const Matrix diff = mu_block - centroid_rows.middleRows(static_cast<Index>(i) * m, m);
    expected_sum += diff.squaredNorm() + sigma_block.squaredNorm();
    BlockMap(d_mu.data() + off, m, layout.d) += scale * -e_gamma * 2.0 * diff;
    BlockMap(d_sigma.data() + off, m, layout.d) += scale * -e_gamma * 2.0 * sigma_block;
  }

  const Scalar count = normalizer_count.value_or(
      static_cast<Scalar>(layout.p) * layout.d * layout.m);
  const Scalar normalizer = 0.5 * count;
  d_mu[gc] += scale * (normalizer - e_gamma * expected_sum);
  d_sigma[gc] += scale * (-e_gamma * sigma_g * expected_sum);
  return normalizer * mu_g - e_gamma * expected_sum;
}

Scalar add_kl_to_prior(const VariationalState& state, const Vector& sigma, Scalar scale,
                       Vector& d_mu, Vector& d_sigma) {
  const Index nm = state.model_size();
  Scalar value = 0.0;
  // coefficient slots share one prior, the two hyper slots another
  const auto piece = [&](Index lo, Index len, Scalar mu0, Scalar s0) {
    if (len <= 0) return;
    const auto mu = state.mu().segment(lo, len).array();
    const auto rho = state.rho().segment(lo, len).array();
    const auto sig = sigma.segment(lo, len).array();
    const Scalar log_s0 = std::log(s0);
    const Scalar inv_s0_sq = 1.0 / (s0 * s0);
    value += -0.5 * (static_cast<Scalar>(len) + 2.0 * (rho.sum() - len * log_s0) -
                     sig.square().sum() * inv_s0_sq -
                     (mu - mu0).square().sum() * inv_s0_sq);
    d_mu.segment(lo, len).array() += scale * (mu - mu0) * inv_s0_sq;
    d_sigma.segment(lo, len).array() += scale * (sig * inv_s0_sq - sig.inverse());
  };
  piece(0, nm, state.options().coeff_prior_mu, state.options().coeff_prior_sigma);
  piece(nm, 2, state.options().gamma_prior_mu, state.options().gamma_prior_sigma);
  return value;
}

}  // namespace

MomentGrad expected_smooth(const VariationalState& state) {
  MomentGrad out;
  out.d_mu = Vector::Zero(state.size());
  out.d_sigma = Vector::Zero(state.size());
  out.value = add_expected_smooth(state, state.sigma(), 1.0, out.d_mu, out.d_sigma);
  return out;
}

MomentGrad expected_clust(const VariationalState& state, const Matrix& centroid_rows,
                          std::optional<Scalar> normalizer_count) {
  MomentGrad out;
  out.d_mu = Vector::Zero(state.size());
  out.d_sigma = Vector::Zero(state.size());
  out.value = add_expected_clust(state, state.sigma(), centroid_rows, normalizer_count, 1.0,
                                 out.d_mu, out.d_sigma);
  return out;
}

MomentGrad kl_to_prior(const VariationalState& state) {
  MomentGrad out;
  out.d_mu = Vector::Zero(state.size());
  out.d_sigma = Vector::Zero(state.size());
  out.value = add_kl_to_prior(state, state.sigma(), 1.0, out.d_mu, out.d_sigma);
  return out;
}

LowerBoundReport elbo_step(VariationalState& state, const RateModel& model,
                           const EventStore& events, const ClusterState* clusters,
                           const SviConfig& config, AdamState& adam, Rng& rng) {
  const Index n_model = state.model_size();
  const Index n_state = state.size();
  const int p = state.layout().p;
  const int n_b = config.batch_size > 0 ? config.batch_size : 2 * p;

  MiniBatch batch = sample_minibatch(events, config.mode, n_b, rng, config.sampler);
  const Vector sigma = state.sigma();

  LowerBoundReport report;
  Vector d_mu = Vector::Zero(n_state);
  Vector d_sigma = Vector::Zero(n_state);
  const int mc_samples = std::max(1, state.options().mc_samples);
  for (int h = 0; h < mc_samples; ++h) {
    Vector eps = rng.normal_vector(n_model);
    Coefficients alpha_star(
        state.layout(),
        state.mu().head(n_model) + sigma.head(n_model).cwiseProduct(eps));
    MiniBatchLoss lik = assemble_loss(model, alpha_star, batch, PenaltySpec{}, config.threads);
    report.loglik += lik.loglik / mc_samples;
    d_mu.head(n_model) += lik.grad / mc_samples;
    d_sigma.head(n_model) += lik.grad.cwiseProduct(eps) / mc_samples;
  }

  if (config.use_smooth)
    report.e_smooth = add_expected_smooth(state, sigma, 1.0, d_mu, d_sigma);
  if (clusters != nullptr) {
    const Matrix c = centroids(clusters->labels, state.mean_coefficients());
    const Scalar rank_count = static_cast<Scalar>(p - clusters->num_clusters) *
                              state.layout().d * state.layout().m;
    report.e_clust = add_expected_clust(state, sigma, c, rank_count, 1.0, d_mu, d_sigma);
  }
  report.kl = add_kl_to_prior(state, sigma, -1.0, d_mu, d_sigma);

  report.total = report.loglik + report.e_smooth + report.e_clust - report.kl;
  if (!std::isfinite(report.total))
    fail("elbo_step: non-finite lower bound (loglik=" + std::to_string(report.loglik) +
         ", e_smooth=" + std::to_string(report.e_smooth) +
         ", e_clust=" + std::to_string(report.e_clust) + ", kl=" + std::to_string(report.kl) +
         ")");

  // chain d/d sigma to rho = log sigma, then one simultaneous ascent step
  Vector packed_params = pack(state.mu(), state.rho());
  Vector packed_grad = pack(d_mu, d_sigma.cwiseProduct(sigma));
  adam.step(packed_grad, packed_params);
  state.mu() = packed_params.head(n_state);
  state.rho() = packed_params.tail(n_state);

  if (config.unit_norm_projection) {
    Coefficients mean = state.mean_coefficients();
    project_unit_norm_rows(mean);
    state.mu().head(n_model) = mean.flat();
  }
  return report;
}

BatchMode FitOptions::resolve_mode(const EventStore& events) const {
  if (mode.has_value()) return *mode;
  return std::holds_alternative<DiscreteEvents>(events) ? BatchMode::DenseDiscrete
                                                        : BatchMode::CcPartial;
}

int FitOptions::resolve_batch_size(int p) const { return batch_size > 0 ? batch_size : 2 * p; }

namespace {

ParamLayout make_layout(int p, const FitOptions& options) {
  ParamLayout layout;
  layout.p = p;
  layout.m = options.num_basis;
  layout.d = options.latent_dim;
  layout.q = options.covariates != nullptr ? options.covariates->dim() : 0;
  layout.propensities = options.propensities;
  return layout;
}

RateModel make_model(const EventStore& events, int p, const FitOptions& options) {
  return RateModel(SplineBasis(options.num_basis, store_horizon(events)),
                   make_layout(p, options), options.similarity, options.covariates,
                   options.static_nodes);
}

// runs elbo_step until stopping or the iteration cap; returns iterations
long run_svi_loop(VariationalState& state, const RateModel& model, const EventStore& events,
                  const ClusterState* clusters, const FitOptions& options, int max_iters,
                  FitPhase phase, Rng& rng, Scalar* best_elbo) {
  SviConfig config;
  config.mode = options.resolve_mode(events);
  config.batch_size = options.resolve_batch_size(state.layout().p);
  config.sampler = options.sampler;
  config.threads = options.threads;
  config.unit_norm_projection = options.similarity.unit_norm;

  AdamState adam(2 * state.size(), options.adam);
  StoppingMonitor monitor(options.patience, options.elbo_ewma);
  long iter = 0;
  for (; iter < max_iters; ++iter) {
    const LowerBoundReport report = elbo_step(state, model, events, clusters, config, adam, rng);
    if (options.on_iteration)
      options.on_iteration(phase, iter, report, clusters != nullptr ? clusters->num_clusters : 0);
    if (monitor.push(report.total)) {
      ++iter;
      break;
    }
  }
  if (best_elbo != nullptr) *best_elbo = monitor.best();
  return iter;
}

}  // namespace

LowerBoundReport full_data_elbo(const VariationalState& state, const RateModel& model,
                                const EventStore& events, const ClusterState* clusters,
                                int threads, uint64_t control_seed) {
  const Coefficients mean = state.mean_coefficients();
  const int p = state.layout().p;
  LowerBoundReport report;
  if (std::holds_alternative<DiscreteEvents>(events)) {
    const DiscreteEvents& store = std::get<DiscreteEvents>(events);
    std::vector<CaseRecord> cells;
    cells.reserve(static_cast<size_t>(store.num_cells()));
    for (int k = 0; k < store.num_intervals(); ++k)
      for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
          if (i != j)
            cells.push_back({i, j, k, store.count(k, i, j), store.interval_start(k),
                             store.interval_width(k)});
    report.loglik = model.loglik_discrete(mean, cells, threads).value;
  } else {
    const ContinuousEvents& store = std::get<ContinuousEvents>(events);
    Rng rng(splitmix64(control_seed));
    std::vector<CaseRecord> cases;
    std::vector<ControlRecord> controls;
    cases.reserve(store.size());
    controls.reserve(store.size());
    for (const auto& e : store.records()) {
      cases.push_back({e.src, e.dst, -1, 1, e.time, 0.0});
      int ci = 0, cj = 0;
      for (int attempt = 0;; ++attempt) {
        ci = static_cast<int>(rng.below(static_cast<uint64_t>(p)));
        cj = static_cast<int>(rng.below(static_cast<uint64_t>(p - 1)));
        if (cj >= ci) ++cj;
        const bool collision = (ci == e.src && cj == e.dst) || store.observed(ci, cj, e.time);
        if (!collision || attempt >= 10) break;
      }
      controls.push_back({ci, cj, -1, e.time, 0.0});
    }
    report.loglik = model.loglik_partial_cc(mean, cases, controls, 1, threads).value;
  }
  report.e_smooth = expected_smooth(state).value;
  if (clusters != nullptr) {
    const Matrix c = centroids(clusters->labels, mean);
    const Scalar rank_count = static_cast<Scalar>(p - clusters->num_clusters) *
                              state.layout().d * state.layout().m;
    report.e_clust = expected_clust(state, c, rank_count).value;
  }
  report.kl = kl_to_prior(state).value;
  report.total = report.loglik + report.e_smooth + report.e_clust - report.kl;
  return report;
}

std::vector<Scalar> candidate_radii(const Coefficients& alpha_plus, int count, Rng& rng) {
  require(count >= 1, "candidate_radii: need at least one candidate");
  const int p = alpha_plus.layout().p;
  require(p >= 2, "candidate_radii: need at least two nodes");

  std::vector<Scalar> distances;
  const long all_pairs = static_cast<long>(p) * (p - 1) / 2;
  if (all_pairs <= 20000) {
    distances.reserve(static_cast<size_t>(all_pairs));
    for (int i = 0; i < p; ++i)
      for (int j = i + 1; j < p; ++j)
        distances.push_back((alpha_plus.node(i) - alpha_plus.node(j)).norm());
  } else {
    distances.reserve(20000);
    for (int s = 0; s < 20000; ++s) {
      const int i = static_cast<int>(rng.below(static_cast<uint64_t>(p)));
      int j = static_cast<int>(rng.below(static_cast<uint64_t>(p - 1)));
      if (j >= i) ++j;
      distances.push_back((alpha_plus.node(i) - alpha_plus.node(j)).norm());
    }
  }
  std::sort(distances.begin(), distances.end());

  std::vector<Scalar> radii;
  for (int k = 0; k < count; ++k) {
    const Scalar level =
        count == 1 ? 0.2 : 0.05 + 0.45 * static_cast<Scalar>(k) / static_cast<Scalar>(count - 1);
    const size_t at = std::min(distances.size() - 1,
                               static_cast<size_t>(level * static_cast<Scalar>(distances.size())));
    radii.push_back(distances[at]);
  }
  std::sort(radii.begin(), radii.end());
  radii.erase(std::unique(radii.begin(), radii.end(),
                          [](Scalar a, Scalar b) { return std::abs(a - b) <= 1e-12; }),
              radii.end());
  return radii;
}

RadiusSelection select_radius(const EventStore& events, const RateModel& model,
                              const VariationalState& pilot_state, const Coefficients& alpha_plus,
                              const std::vector<Scalar>& radii, const FitOptions& options) {
  require(!radii.empty(), "select_radius: need at least one candidate radius");
  std::vector<Scalar> sorted = radii;
  std::sort(sorted.begin(), sorted.end());

  RadiusSelection selection;
  Rng rng(splitmix64(options.seed ^ 0x52414449)); // per-phase stream
  for (size_t r = 0; r < sorted.size(); ++r) {
    ClusterState clusters = make_cluster_state(alpha_plus, sorted[r]);
    VariationalState state = pilot_state;
    Rng radius_rng = rng.fork(r);
    selection.iters += run_svi_loop(state, model, events, &clusters, options, options.max_iters,
                                    FitPhase::Clustered, radius_rng, nullptr);
    const Scalar best_elbo =
        full_data_elbo(state, model, events, &clusters, options.threads).total;
    selection.table.push_back({sorted[r], clusters.num_clusters, best_elbo});
    // strict improvement keeps the smaller radius on ties (ascending order)
    if (selection.best_index < 0 ||
        best_elbo > selection.table[static_cast<size_t>(selection.best_index)].elbo) {
      selection.best_index = static_cast<int>(r);
      selection.best_state = std::move(state);
      selection.best_clusters = std::move(clusters);
    }
  }
  return selection;
}

FitResult fit(const EventStore& events, int num_nodes, const FitOptions& options) {
  require(num_nodes >= 2, "fit: need at least two nodes");
  const RateModel model = make_model(events, num_nodes, options);

  FitResult result;
  result.pilot_state = VariationalState(model.layout(), options.variational);

  Rng pilot_rng(splitmix64(options.seed ^ 0x50494c4f)); // pilot stream
  const int pilot_iters = options.pilot_max_iters > 0 ? options.pilot_max_iters : options.max_iters;
  result.pilot_iters = run_svi_loop(result.pilot_state, model, events, nullptr, options,
                                    pilot_iters, FitPhase::Pilot, pilot_rng, nullptr);
  result.alpha_plus = pilot_freeze(result.pilot_state.mean_coefficients());

  if (!options.clustering) {
    result.final_state = result.pilot_state;
    result.clusters.pilot = result.alpha_plus;
    result.final_iters = 0;
    return result;
  }

  std::vector<Scalar> radii = options.radii;
  if (radii.empty()) {
    Rng radii_rng(splitmix64(options.seed ^ 0x51554e54));
    radii = candidate_radii(result.alpha_plus, options.num_auto_radii, radii_rng);
  }
  RadiusSelection selection =
      select_radius(events, model, result.pilot_state, result.alpha_plus, radii, options);
  result.radius_table = std::move(selection.table);
  result.best_radius_index = selection.best_index;
  result.final_state = std::move(selection.best_state);
  result.clusters = std::move(selection.best_clusters);
  result.final_iters = selection.iters;
  return result;
}

namespace {

void fit_nested_children(NestedNode& parent, const EventStore& events,
                         const std::vector<int>& parent_nodes, const FitOptions& options,
                         int min_size, int depth, int level) {
  if (depth <= 1 || parent.labels.empty()) return;
  const int n_clusters = parent.n_clusters;
  for (int g = 0; g < n_clusters; ++g) {
    NestedNode child;
    child.cluster_id = g;
    for (size_t pos = 0; pos < parent.labels.size(); ++pos)
      if (parent.labels[pos] == g) child.nodes.push_back(parent_nodes[pos]);
    if (static_cast<int>(child.nodes.size()) < min_size) {
      child.note = "left untouched: below min size";
      parent.children.push_back(std::move(child));
      continue;
    }

    // marginalization: restrict to within-component events
    std::vector<int> local(child.nodes.size());
    for (size_t k = 0; k < child.nodes.size(); ++k) local[k] = static_cast<int>(k);
    EventStore sub_events;
    long internal = 0;
    if (std::holds_alternative<ContinuousEvents>(events)) {
      ContinuousEvents sub = restrict_events(std::get<ContinuousEvents>(events), child.nodes);
      internal = static_cast<long>(sub.size());
      sub_events = std::move(sub);
    } else {
      DiscreteEvents sub = restrict_events(std::get<DiscreteEvents>(events), child.nodes);
      internal = sub.total_count();
      sub_events = std::move(sub);
    }
    if (internal == 0) {
      child.note = "skipped: no internal events";
      std::cerr << "fit_nested: cluster " << g << " at level " << level
                << " has no internal events, skipped\n";
      parent.children.push_back(std::move(child));
      continue;
    }

    FitOptions sub_options = options;
    sub_options.static_nodes.clear();  // static flags are top-level metadata
    sub_options.covariates = nullptr;
    sub_options.radii.clear();  // children pick radii from their own pilot
    sub_options.seed = splitmix64(options.seed ^ (0x4e455354ULL + static_cast<uint64_t>(level) *
                                                                      1000 +
                                                  static_cast<uint64_t>(g)));
    FitResult sub_fit = fit(sub_events, static_cast<int>(child.nodes.size()), sub_options);

    child.refit = true;
    child.radius = sub_fit.best_radius();
    child.n_clusters = sub_fit.clusters.num_clusters;
    child.labels = sub_fit.clusters.labels;
    child.coefficients =
        std::make_unique<Coefficients>(sub_fit.final_state.mean_coefficients());
    fit_nested_children(child, sub_events, local, options, min_size, depth - 1, level + 1);
    parent.children.push_back(std::move(child));
  }
}

}  // namespace

NestedNode fit_nested(const EventStore& events, const FitResult& top, const FitOptions& options,
                      int min_size, int depth) {
  require(depth >= 1, "fit_nested: depth must be at least 1");
  require(min_size >= 2, "fit_nested: min_size must be at least 2");

  const int num_nodes = top.final_state.layout().p;
  NestedNode root;
  root.cluster_id = -1;
  root.nodes.resize(static_cast<size_t>(num_nodes));
  for (int i = 0; i < num_nodes; ++i) root.nodes[static_cast<size_t>(i)] = i;
  root.refit = true;
  root.radius = top.best_radius();
  root.n_clusters = top.clusters.num_clusters;
  root.labels = top.clusters.labels;
  root.coefficients = std::make_unique<Coefficients>(top.final_state.mean_coefficients());
  fit_nested_children(root, events, root.nodes, options, min_size, depth, 1);
  return root;
}

MapResult fit_map(const EventStore& events, const RateModel& model, const Coefficients& init,
                  const MapOptions& map_options, const FitOptions& options) {
  const ParamLayout& layout = model.layout();
  require(init.layout() == layout, "fit_map: init layout mismatch");
  if (map_options.finite_clust)
    require(map_options.kernel_pilot != nullptr,
            "fit_map: finite clustering mode needs kernel pilot estimates");

  const BatchMode mode = options.resolve_mode(events);
  const int n_b = options.resolve_batch_size(layout.p);

  MapResult result;
  result.coefficients = init;
  const Index n_coeff = layout.size();
  const Index n_centroid = static_cast<Index>(layout.p) * layout.m * layout.d;
  const bool finite = map_options.finite_clust;

  Matrix centroid_rows;
  if (finite) {
    centroid_rows.resize(static_cast<Index>(layout.p) * layout.m, layout.d);
    for (int i = 0; i < layout.p; ++i)
      centroid_rows.middleRows(static_cast<Index>(i) * layout.m, layout.m) = init.node(i);
  }

  AdamState adam(finite ? n_coeff + n_centroid : n_coeff, options.adam);
  StoppingMonitor monitor(options.patience, options.elbo_ewma);
  KernelPairHistory history(map_options.history_capacity);
  Rng rng(splitmix64(options.seed ^ 0x4d415046));

  long iter = 0;
  for (; iter < options.max_iters; ++iter) {
    MiniBatch batch = sample_minibatch(events, mode, n_b, rng, options.sampler);

    PenaltySpec penalties;
    penalties.gamma_smooth = map_options.gamma_smooth;
    Matrix fast_centroids;
    if (!finite && map_options.clusters != nullptr && map_options.gamma_clust > 0.0) {
      fast_centroids = centroids(map_options.clusters->labels, result.coefficients);
      penalties.gamma_clust = map_options.gamma_clust;
      penalties.centroid_rows = &fast_centroids;
    }
    MiniBatchLoss loss =
        assemble_loss(model, result.coefficients, batch, penalties, options.threads);

    if (finite) {
      std::vector<std::pair<int, int>> candidates;
      candidates.reserve(batch.cases.size() + batch.controls.size());
      for (const auto& c : batch.cases) candidates.emplace_back(c.src, c.dst);
      for (const auto& c : batch.controls) candidates.emplace_back(c.src, c.dst);
      record_kernel_pairs(history, *map_options.kernel_pilot, map_options.kernel_radius,
                          candidates);
      const auto penalty_batch = sample_penalty_batch(history, layout.p, rng);
      const FiniteClustResult fin =
          clust_penalty_minibatch(result.coefficients, centroid_rows, penalty_batch,
                                  map_options.gamma_aux, map_options.gamma_dist);
      loss.p_clust = fin.value;
      loss.total += fin.value;
      Vector packed_params(n_coeff + n_centroid);
      packed_params.head(n_coeff) = result.coefficients.flat();
      packed_params.tail(n_centroid) =
          Eigen::Map<const Vector>(centroid_rows.data(), n_centroid);
      Vector packed_grad(n_coeff + n_centroid);
      packed_grad.head(n_coeff) = loss.grad + fin.grad_coeffs;
      packed_grad.tail(n_centroid) =
          Eigen::Map<const Vector>(fin.grad_centroids.data(), n_centroid);
      adam.step(packed_grad, packed_params);
      result.coefficients.flat() = packed_params.head(n_coeff);
      Eigen::Map<Vector>(centroid_rows.data(), n_centroid) = packed_params.tail(n_centroid);
    } else {
      adam.step(loss.grad, result.coefficients.flat());
    }
    if (model.similarity().unit_norm) project_unit_norm_rows(result.coefficients);

    if (options.on_iteration) {
      LowerBoundReport report;
      report.loglik = loss.loglik;
      report.e_smooth = loss.p_smooth;
      report.e_clust = loss.p_clust;
      report.total = loss.total;
      options.on_iteration(FitPhase::Map, iter, report,
                           map_options.clusters != nullptr ? map_options.clusters->num_clusters
                                                           : 0);
    }
    if (monitor.push(loss.total)) {
      ++iter;
      break;
    }
  }
  result.iters = iter;
  result.best_loss = monitor.best();
  if (finite) result.centroid_rows = std::move(centroid_rows);
  return result;
}

}  // namespace latnet
