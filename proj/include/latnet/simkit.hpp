#pragma once

#include <optional>
#include <string>
#include <vector>

#include "latnet/events.hpp"
#include "latnet/model.hpp"
#include "latnet/svi.hpp"

namespace latnet {

// Optimal translation + orthogonal map (rotation and mirroring, no scaling)
// aligning `estimate` to `truth`; returns the mean squared residual per
// point. Rows are points, columns are latent coordinates.
Scalar procrustes_mse(const Eigen::Ref<const Matrix>& estimate,
                      const Eigen::Ref<const Matrix>& truth);

// Accuracy under the best label matching (Hungarian assignment over the
// confusion matrix); invariant to label permutations of either argument.
Scalar clustering_accuracy(const std::vector<int>& labels, const std::vector<int>& truth);

enum class SparsityRegime { Dense, Sparse };

struct ClusterSpec {
  Vector center;         // destination direction in R^d
  int count = 0;         // nodes in this cluster
  Scalar noise = 0.05;   // coefficient noise around the shared trajectory
  Scalar curvature = 0.0;  // transverse sinusoidal component
};

struct ScenarioConfig {
  int p = 100;
  int d = 2;
  int m = 10;
  Scalar horizon = 1.0;
  int num_intervals = 10;  // dense regime aggregation grid
  std::vector<ClusterSpec> clusters;  // counts must sum to p
  SparsityRegime regime = SparsityRegime::Dense;
  Scalar rate_offset = 0.0;  // added to every log rate
  int replicates = 10;
  uint64_t seed = 7;

  void validate() const;
};

struct SyntheticData {
  Coefficients truth;       // generating spline coefficients
  std::vector<int> labels;  // true cluster ids
  EventStore events;
  long n_events = 0;
};

// Trajectories start at the origin at t = 0 and move toward cluster-specific
// destinations; events come from the Poisson interval model (dense) or from
// thinning the continuous-time process (sparse).
SyntheticData generate(const ScenarioConfig& config, Rng& rng);

// Positions of every node on an equally spaced grid, stacked row-wise as
// (p * grid) x d; used as the common frame for Procrustes comparisons.
Matrix trajectory_grid(const RateModel& model, const Coefficients& coeffs, int grid_points);
Matrix trajectory_grid(const SplineBasis& basis, const Coefficients& coeffs, int grid_points);

struct ExperimentRow {
  std::string setting;
  int replicate = 0;
  Scalar mse = std::numeric_limits<Scalar>::quiet_NaN();
  Scalar accuracy = std::numeric_limits<Scalar>::quiet_NaN();
  Scalar seconds = 0.0;
};

struct ExperimentSummary {
  std::string setting;
  Scalar mse_mean = 0.0, mse_sd = 0.0;
  Scalar accuracy_mean = 0.0;
  Scalar seconds_mean = 0.0;
  int replicates = 0;
};

struct EvalReport {
  std::vector<ExperimentRow> rows;
  std::vector<ExperimentSummary> summary;
};

enum class Experiment { VaryP, VaryBatch, VarySparsity, VaryClusterVicinity };

struct ExperimentConfig {
  Experiment which = Experiment::VaryP;
  int replicates = 10;
  uint64_t seed = 7;
  int threads = 1;
  int grid_points = 50;  // Procrustes time grid
  // desk-scale presets, overridable
  std::vector<int> node_counts = {100, 1000};        // vary_p
  std::vector<Scalar> batch_factors = {0.05, 0.5, 2.0};  // vary_batch, n_b = f * p
  std::vector<Scalar> vicinity_scales = {1.0, 0.5, 0.25, 0.125};  // vary_cluster_vicinity
  int fit_max_iters = 0;  // 0 -> experiment-specific default
};

EvalReport run_experiment(const ExperimentConfig& config);

// Fit controls for a user-supplied scenario file.
struct ScenarioFitSpec {
  int dim = 2;
  int basis = 8;
  int max_iters = 4000;
  Scalar lr = 0.01;
  bool clustering = false;
  std::optional<BatchMode> mode;
  int batch_size = 0;
  int grid_points = 50;
};

// Replicated generate-and-fit runs of one scenario; accuracy is reported
// when the clustering phase is on.
EvalReport run_scenario(const ScenarioConfig& scenario, const ScenarioFitSpec& fit_spec,
                        int threads);

void write_results_csv(const EvalReport& report, const std::string& path);
void write_summary_csv(const EvalReport& report, const std::string& path);

}  // namespace latnet
