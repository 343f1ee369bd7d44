#pragma once

#include <utility>
#include <vector>

#include "latnet/params.hpp"

namespace latnet {

struct ValueGrad {
  Scalar value = 0.0;
  Vector grad;
};

// Kernel-graph clustering over pilot coefficients. Labels are connected
// components of the graph with an edge whenever the Frobenius distance
// between node coefficient blocks is within the kernel radius.
struct ClusterState {
  Coefficients pilot;       // frozen alpha+ from the pilot fit
  Scalar radius = 0.0;
  std::vector<int> labels;  // 0..num_clusters-1, dense
  std::vector<int> sizes;   // per cluster
  int num_clusters = 0;
};

// Deep copy of the pilot estimates; never mutated afterwards.
Coefficients pilot_freeze(const Coefficients& coeffs);

// Exact transitive closure of the kernel graph. Neighbor discovery buckets
// the flattened coefficient rows on their first coordinates with cell size
// equal to the radius, then verifies candidates with the exact distance.
std::vector<int> connected_components(const Coefficients& pilot, Scalar radius);

ClusterState make_cluster_state(const Coefficients& pilot, Scalar radius);
ClusterState cluster_state_from_labels(const Coefficients& pilot, std::vector<int> labels);

// Per-component mean of the member coefficient blocks, broadcast back to the
// members as a stacked (p*m) x d matrix. Linear in p.
Matrix centroids(const std::vector<int>& labels, const Coefficients& coeffs);

// P_clust = -gamma * sum_i ||alpha_i - c_i||^2 with c held constant.
// Gradient is laid out over the full parameter vector (node blocks only).
ValueGrad clust_penalty_fast(const Coefficients& coeffs, const Matrix& centroid_rows,
                             Scalar gamma_clust);

// Finite-gamma_dist mini-batch penalty with free auxiliary centroids:
//   -gamma_aux * sum_i ||alpha_i - c_i||^2 - gamma_dist * sum_{(i,j) in B*} ||c_i - c_j||^2
// returned as the additive contribution to the log objective.
struct FiniteClustResult {
  Scalar value = 0.0;
  Vector grad_coeffs;     // over the coefficient layout
  Matrix grad_centroids;  // stacked (p*m) x d
};
FiniteClustResult clust_penalty_minibatch(const Coefficients& coeffs, const Matrix& centroid_rows,
                                          const std::vector<std::pair<int, int>>& penalty_batch,
                                          Scalar gamma_aux, Scalar gamma_dist);

// Components per radius, ascending; partitions coarsen monotonically.
struct SweepEntry {
  Scalar radius = 0.0;
  std::vector<int> labels;
  int num_clusters = 0;
};
std::vector<SweepEntry> radius_sweep(const Coefficients& pilot, std::vector<Scalar> radii);

}  // namespace latnet
