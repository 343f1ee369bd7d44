#pragma once

#include <string>
#include <vector>

#include "latnet/cluster.hpp"
#include "latnet/events.hpp"
#include "latnet/model.hpp"
#include "latnet/simkit.hpp"
#include "latnet/svi.hpp"

namespace latnet {

// Versioned snapshot of a fitted model: variational state (rho empty for
// point estimates), clustering state, and the model configuration needed to
// rebuild the rate model.
struct Checkpoint {
  int version = 1;
  Scalar horizon = 1.0;
  ParamLayout layout;
  SimilarityConfig similarity;
  VariationalOptions variational;
  std::vector<std::string> node_ids;
  std::vector<bool> static_flags;
  Vector mu;
  Vector rho;  // empty for point estimates
  bool has_clusters = false;
  Scalar radius = 0.0;
  std::vector<int> labels;
  Vector alpha_plus;  // pilot coefficients, empty when no clustering ran

  SplineBasis make_basis() const { return SplineBasis(layout.m, horizon); }
  Coefficients mean_coefficients() const {
    return Coefficients(layout, mu.head(layout.size()));
  }
};

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// trajectories on an equally spaced grid: node, t, x1..xd (17 significant
// digits so reruns reproduce byte-for-byte)
void write_trajectories_csv(const std::string& path, const std::vector<std::string>& node_ids,
                            const SplineBasis& basis, const Coefficients& coeffs,
                            int grid_points);

struct TrajectoryFile {
  std::vector<std::string> node_ids;  // distinct, in file order
  std::vector<Scalar> times;          // per row
  Matrix points;                      // rows in file order
};
TrajectoryFile read_trajectories_csv(const std::string& path);

// node_id, cluster_id, cluster_size
void write_clusters_csv(const std::string& path, const std::vector<std::string>& node_ids,
                        const std::vector<int>& labels);
std::vector<int> read_clusters_csv(const std::string& path);

// radius, n_clusters, elbo
void write_radius_table_csv(const std::string& path, const std::vector<RadiusFitEntry>& table);
// radius, n_clusters (kernel sweep without refits)
void write_sweep_csv(const std::string& path, const std::vector<SweepEntry>& sweep);

// flat coefficient matrix (p*m rows of d columns, then beta, then
// propensities as single-column rows) plus a JSON sidecar with
// (p, m, d, q, T, knots)
void write_coefficients(const std::string& csv_path, const std::string& sidecar_path,
                        const SplineBasis& basis, const Coefficients& coeffs);
Coefficients read_coefficients(const std::string& csv_path, const std::string& sidecar_path,
                               Scalar* horizon_out = nullptr);

void write_hierarchy_json(const std::string& path, const NestedNode& root,
                          const std::vector<std::string>& node_ids);

// Human-editable scenario file (JSON): generative settings under the top
// level, fit controls under "fit".
void load_scenario_file(const std::string& path, ScenarioConfig* scenario,
                        ScenarioFitSpec* fit_spec);

}  // namespace latnet
