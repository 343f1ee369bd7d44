#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "latnet/cluster.hpp"
#include "latnet/model.hpp"
#include "latnet/optim.hpp"
#include "latnet/sampler.hpp"

namespace latnet {

struct VariationalOptions {
  Scalar sigma_init = 1e-3;  // single-sample MC diverges for large variance
  Scalar coeff_prior_mu = 0.0;
  Scalar coeff_prior_sigma = 1.0;
  Scalar gamma_prior_mu = 0.0;  // prior on log gamma_smooth / log gamma_clust
  Scalar gamma_prior_sigma = 2.0;
  int mc_samples = 1;  // H likelihood draws per step
};

// Independent Gaussian posterior over every model coefficient plus the two
// hyperparameters log gamma_smooth and log gamma_clust (the last two slots).
// sigma is kept strictly positive by optimizing rho = log sigma.
class VariationalState {
 public:
  VariationalState() = default;
  VariationalState(const ParamLayout& layout, const VariationalOptions& options);

  const ParamLayout& layout() const { return layout_; }
  const VariationalOptions& options() const { return options_; }
  Index model_size() const { return layout_.size(); }
  Index size() const { return model_size() + 2; }
  Index gamma_smooth_slot() const { return model_size(); }
  Index gamma_clust_slot() const { return model_size() + 1; }

  Vector& mu() { return mu_; }
  const Vector& mu() const { return mu_; }
  Vector& rho() { return rho_; }
  const Vector& rho() const { return rho_; }
  Vector sigma() const { return rho_.array().exp(); }

  Scalar prior_mu(Index slot) const {
    return slot < model_size() ? options_.coeff_prior_mu : options_.gamma_prior_mu;
  }
  Scalar prior_sigma(Index slot) const {
    return slot < model_size() ? options_.coeff_prior_sigma : options_.gamma_prior_sigma;
  }

  Coefficients mean_coefficients() const {
    return Coefficients(layout_, mu_.head(model_size()));
  }

 private:
  ParamLayout layout_;
  VariationalOptions options_;
  Vector mu_;
  Vector rho_;
};

// alpha* = mu + sigma e, e ~ N(0, 1), over the model slots. When eps_out is
// given the drawn noise is stored for the (g, g*eps) gradient chain.
Coefficients reparam_sample(const VariationalState& state, Rng& rng, Vector* eps_out = nullptr);

// Closed-form expectation with gradients with respect to (mu, sigma); the
// gradient vectors span all state slots including the hyperparameters.
struct MomentGrad {
  Scalar value = 0.0;
  Vector d_mu;
  Vector d_sigma;
};

// E[P_smooth] = (p d (m-1) / 2) E[log gs] - E[gs] sum E||alpha_k - alpha_{k-1}||^2
MomentGrad expected_smooth(const VariationalState& state);

// E[P_clust] = (normalizer/2) E[log gc] - E[gc] sum E||alpha_i - c_i||^2 with
// c constant. The default normalizer p*d*m counts every coefficient; the
// engine passes the penalty rank (p - #clusters)*d*m instead because
// centroids are recomputed from the state and self-centred coordinates carry
// no shrinkage (a literal count lets the bound inflate with singleton
// clusters).
MomentGrad expected_clust(const VariationalState& state, const Matrix& centroid_rows,
                          std::optional<Scalar> normalizer_count = std::nullopt);

// D_KL[q || p] over all slots, closed form for diagonal Gaussians.
MomentGrad kl_to_prior(const VariationalState& state);

struct LowerBoundReport {
  Scalar loglik = 0.0;    // rescaled mini-batch likelihood at alpha*
  Scalar e_smooth = 0.0;  // E[P_smooth]
  Scalar e_clust = 0.0;   // E[P_clust]
  Scalar kl = 0.0;        // D_KL[q || p]
  Scalar total = 0.0;     // loglik + e_smooth + e_clust - kl
};

struct SviConfig {
  BatchMode mode = BatchMode::DenseDiscrete;
  int batch_size = 0;  // 0 -> 2p
  SamplerOptions sampler{};
  bool use_smooth = true;
  int threads = 1;
  bool unit_norm_projection = false;
};

// One simultaneous ascent step on (mu, rho): reparameterized mini-batch
// likelihood plus closed-form penalty/KL expectations. `clusters` enables
// E[P_clust] with centroids recomputed from the current mu.
LowerBoundReport elbo_step(VariationalState& state, const RateModel& model,
                           const EventStore& events, const ClusterState* clusters,
                           const SviConfig& config, AdamState& adam, Rng& rng);

enum class FitPhase { Pilot, Clustered, Map };

struct FitOptions {
  int latent_dim = 2;
  int num_basis = 10;
  SimilarityConfig similarity{};
  bool propensities = false;
  const CovariateSpec* covariates = nullptr;
  std::vector<bool> static_nodes{};
  std::optional<BatchMode> mode;  // default: discrete -> dense, continuous -> cc-partial
  int batch_size = 0;             // 0 -> 2p
  SamplerOptions sampler{};
  AdamOptions adam{};
  VariationalOptions variational{};
  int max_iters = 20000;
  int pilot_max_iters = 0;  // 0 -> max_iters
  int patience = 2000;
  Scalar elbo_ewma = 0.99;
  bool clustering = true;
  std::vector<Scalar> radii{};  // empty -> quantiles of pairwise pilot distances
  int num_auto_radii = 5;
  int threads = 1;
  uint64_t seed = 1;
  // iteration hook for trace logging: (phase, iter, report, n_clusters)
  std::function<void(FitPhase, long, const LowerBoundReport&, int)> on_iteration;

  BatchMode resolve_mode(const EventStore& events) const;
  int resolve_batch_size(int p) const;
};

struct RadiusFitEntry {
  Scalar radius = 0.0;
  int n_clusters = 0;
  Scalar elbo = 0.0;  // converged lower bound, scored on the full data
};

// Deterministic lower-bound estimate at the posterior mean: full-data
// likelihood (every cell for discrete stores; every event with seeded
// controls for continuous ones) plus the closed-form expectation terms.
// Mini-batch noise at |E|/|B| scale would otherwise drown the comparison
// between candidate radii.
LowerBoundReport full_data_elbo(const VariationalState& state, const RateModel& model,
                                const EventStore& events, const ClusterState* clusters,
                                int threads, uint64_t control_seed = 0x45564143);

struct FitResult {
  VariationalState pilot_state;
  Coefficients alpha_plus;
  long pilot_iters = 0;
  std::vector<RadiusFitEntry> radius_table;
  int best_radius_index = -1;  // -1 when clustering disabled
  VariationalState final_state;
  ClusterState clusters;  // empty labels when clustering disabled
  long final_iters = 0;

  Scalar best_radius() const {
    return best_radius_index < 0 ? std::numeric_limits<Scalar>::quiet_NaN()
                                 : radius_table[static_cast<size_t>(best_radius_index)].radius;
  }
};

// Pilot (smoothness-only) fit, pilot freeze, per-radius refits, lower-bound
// radius selection.
FitResult fit(const EventStore& events, int num_nodes, const FitOptions& options);

// Candidate radii from quantiles of pairwise pilot coefficient distances.
std::vector<Scalar> candidate_radii(const Coefficients& alpha_plus, int count, Rng& rng);

struct RadiusSelection {
  std::vector<RadiusFitEntry> table;
  int best_index = -1;
  VariationalState best_state;
  ClusterState best_clusters;
  long iters = 0;
};

// Refits from the pilot state per candidate and returns the lower-bound
// argmax; ties break toward the smaller radius.
RadiusSelection select_radius(const EventStore& events, const RateModel& model,
                              const VariationalState& pilot_state, const Coefficients& alpha_plus,
                              const std::vector<Scalar>& radii, const FitOptions& options);

// Hierarchy of within-cluster refits (components of size >= min_size,
// restricted to internal events), recursing to `depth` levels of splits.
struct NestedNode {
  int cluster_id = -1;
  std::vector<int> nodes;  // dense indices in the parent's index space
  bool refit = false;
  std::string note;
  Scalar radius = std::numeric_limits<Scalar>::quiet_NaN();
  int n_clusters = 0;
  std::vector<int> labels;  // per `nodes` position, from this level's split
  std::unique_ptr<Coefficients> coefficients;  // fitted posterior means
  std::vector<NestedNode> children;
};

// `top` is the already-completed whole-network fit; its labels define the
// first split level.
NestedNode fit_nested(const EventStore& events, const FitResult& top, const FitOptions& options,
                      int min_size, int depth);

// Point-estimate fit of the penalized mini-batch loss; also hosts the
// finite-gamma_dist clustering mode from the mini-batch penalty.
struct MapOptions {
  Scalar gamma_smooth = 1.0;
  // fast clustering: labels fixed from the kernel pilot
  Scalar gamma_clust = 0.0;
  const ClusterState* clusters = nullptr;
  // finite-gamma_dist mode: free centroids, kernel-pair history
  bool finite_clust = false;
  Scalar gamma_aux = 0.0;
  Scalar gamma_dist = 0.0;
  const Coefficients* kernel_pilot = nullptr;
  Scalar kernel_radius = 0.0;
  size_t history_capacity = 1 << 20;
};

struct MapResult {
  Coefficients coefficients;
  Matrix centroid_rows;  // finite mode: fitted free centroids
  long iters = 0;
  Scalar best_loss = 0.0;
};

MapResult fit_map(const EventStore& events, const RateModel& model, const Coefficients& init,
                  const MapOptions& map_options, const FitOptions& options);

}  // namespace latnet
