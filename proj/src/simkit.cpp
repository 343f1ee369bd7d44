#include "latnet/simkit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace latnet {

namespace {

// O(n^3) Hungarian algorithm (potentials form), minimizing assignment cost.
// Returns the chosen column for each row.
std::vector<int> hungarian_min(const Matrix& cost) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  require(n <= m, "hungarian_min: need rows <= cols");
  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  std::vector<Scalar> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(m) + 1, 0.0);
  std::vector<int> match(static_cast<size_t>(m) + 1, 0);  // column -> row (1-based)
  std::vector<int> way(static_cast<size_t>(m) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<Scalar> minv(static_cast<size_t>(m) + 1, inf);
    std::vector<char> used(static_cast<size_t>(m) + 1, 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      const int i0 = match[static_cast<size_t>(j0)];
      Scalar delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const Scalar cur = cost(i0 - 1, j - 1) - u[static_cast<size_t>(i0)] -
                           v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(match[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<size_t>(j0)];
      match[static_cast<size_t>(j0)] = match[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(static_cast<size_t>(n), -1);
  for (int j = 1; j <= m; ++j)
    if (match[static_cast<size_t>(j)] > 0) row_to_col[static_cast<size_t>(match[static_cast<size_t>(j)]) - 1] = j - 1;
  return row_to_col;
}

}  // namespace

Scalar procrustes_mse(const Eigen::Ref<const Matrix>& estimate,
                      const Eigen::Ref<const Matrix>& truth) {
  require(estimate.rows() == truth.rows() && estimate.cols() == truth.cols(),
          "procrustes_mse: shape mismatch");
  require(estimate.rows() > 0, "procrustes_mse: empty configuration");
  const Index n = estimate.rows();

  const RowVector mean_est = estimate.colwise().mean();
  const RowVector mean_truth = truth.colwise().mean();
  const Matrix x = estimate.rowwise() - mean_est;
  const Matrix y = truth.rowwise() - mean_truth;

  const Matrix cross = x.transpose() * y;
  Matrix rotation = Matrix::Identity(estimate.cols(), estimate.cols());
  if (cross.norm() > 0.0) {
    // reflections allowed: mirroring is in the invariance class
    Eigen::JacobiSVD<Matrix> svd(cross, Eigen::ComputeThinU | Eigen::ComputeThinV);
    rotation = svd.matrixU() * svd.matrixV().transpose();
  }
  return (x * rotation - y).squaredNorm() / static_cast<Scalar>(n);
}

Scalar clustering_accuracy(const std::vector<int>& labels, const std::vector<int>& truth) {
  require(labels.size() == truth.size(), "clustering_accuracy: size mismatch");
  require(!labels.empty(), "clustering_accuracy: empty labels");
  const int g1 = *std::max_element(labels.begin(), labels.end()) + 1;
  const int g2 = *std::max_element(truth.begin(), truth.end()) + 1;
  const int n = std::max(g1, g2);

  Matrix confusion = Matrix::Zero(n, n);
  for (size_t i = 0; i < labels.size(); ++i)
    confusion(labels[i], truth[i]) += 1.0;
  const Scalar top = confusion.maxCoeff();
  const Matrix cost = Matrix::Constant(n, n, top) - confusion;
  const std::vector<int> assignment = hungarian_min(cost);
  Scalar matched = 0.0;
  for (int a = 0; a < n; ++a) matched += confusion(a, assignment[static_cast<size_t>(a)]);
  return matched / static_cast<Scalar>(labels.size());
}

void ScenarioConfig::validate() const {
  require(p >= 2 && d >= 1 && m >= 4, "ScenarioConfig: bad dimensions");
  require(horizon > 0.0 && num_intervals >= 1, "ScenarioConfig: bad time grid");
  require(replicates >= 1, "ScenarioConfig: need at least one replicate");
  int total = 0;
  for (const auto& c : clusters) {
    require(c.center.size() == d, "ScenarioConfig: center dimension mismatch");
    require(c.count >= 1, "ScenarioConfig: empty cluster");
    total += c.count;
  }
  require(total == p, "ScenarioConfig: cluster node counts must sum to p");
}

namespace {

Matrix cluster_anchor(const ClusterSpec& spec, int m, int d, bool start_at_origin) {
  Matrix anchor = Matrix::Zero(m, d);
  Vector perp = Vector::Zero(d);
  if (d >= 2 && spec.center.norm() > 0.0) {
    const Vector unit = spec.center / spec.center.norm();
    perp[0] = -unit[1];
    perp[1] = unit[0];
  }
  for (int k = 0; k < m; ++k) {
    const Scalar ramp =
        start_at_origin ? static_cast<Scalar>(k) / static_cast<Scalar>(m - 1) : 1.0;
    const Scalar arc = std::sin(M_PI * static_cast<Scalar>(k) / static_cast<Scalar>(m - 1));
    anchor.row(k) = ramp * spec.center.transpose() + spec.curvature * arc * perp.transpose();
  }
  return anchor;
}

}  // namespace

SyntheticData generate(const ScenarioConfig& config, Rng& rng) {
  config.validate();
  ParamLayout layout;
  layout.p = config.p;
  layout.m = config.m;
  layout.d = config.d;

  SyntheticData data;
  data.truth = Coefficients(layout);
  data.labels.assign(static_cast<size_t>(config.p), 0);

  int node = 0;
  for (size_t g = 0; g < config.clusters.size(); ++g) {
    const ClusterSpec& spec = config.clusters[g];
    const Matrix anchor = cluster_anchor(spec, config.m, config.d, true);
    for (int member = 0; member < spec.count; ++member, ++node) {
      data.labels[static_cast<size_t>(node)] = static_cast<int>(g);
      BlockMap block = data.truth.node(node);
      block = anchor;
      for (int k = 1; k < config.m; ++k)
        for (int c = 0; c < config.d; ++c) block(k, c) += spec.noise * rng.normal();
    }
  }

  const SplineBasis basis(config.m, config.horizon);
  RateModel model(basis, layout, SimilarityConfig{});

  if (config.regime == SparsityRegime::Dense) {
    const int K = config.num_intervals;
    const Scalar width = config.horizon / static_cast<Scalar>(K);
    std::vector<Scalar> boundaries(static_cast<size_t>(K) + 1);
    for (int k = 0; k <= K; ++k)
      boundaries[static_cast<size_t>(k)] = config.horizon * static_cast<Scalar>(k) /
                                           static_cast<Scalar>(K);
    // positions at interval starts
    std::vector<Matrix> positions(static_cast<size_t>(K));
    for (int k = 0; k < K; ++k) {
      const BasisSupport b = basis.eval(boundaries[static_cast<size_t>(k)]);
      Matrix z(config.p, config.d);
      for (int i = 0; i < config.p; ++i)
        z.row(i) = spline_value(b, data.truth.node(i)).transpose();
      positions[static_cast<size_t>(k)] = std::move(z);
    }
    std::vector<DiscreteCell> cells;
    for (int k = 0; k < K; ++k) {
      const Matrix& z = positions[static_cast<size_t>(k)];
      for (int i = 0; i < config.p; ++i) {
        for (int j = 0; j < config.p; ++j) {
          if (i == j) continue;
          const Scalar log_rate = -(z.row(i) - z.row(j)).squaredNorm() + config.rate_offset;
          const Scalar mean = std::exp(log_rate) * width;
          require(mean <= 1e6,
                  "generate: rate overflow (lambda * dt > 1e6); rescale the scenario");
          const long y = rng.poisson(mean);
          if (y > 0) cells.push_back({k, i, j, y});
        }
      }
    }
    DiscreteEvents store(std::move(boundaries), std::move(cells), config.p);
    data.n_events = store.total_count();
    data.events = std::move(store);
  } else {
    // thinning against a per-pair dominating rate from a dense grid
    const int grid = 64;
    std::vector<Matrix> positions(static_cast<size_t>(grid));
    for (int s = 0; s < grid; ++s) {
      const Scalar t =
          config.horizon * static_cast<Scalar>(s) / static_cast<Scalar>(grid - 1);
      const BasisSupport b = basis.eval(t);
      Matrix z(config.p, config.d);
      for (int i = 0; i < config.p; ++i)
        z.row(i) = spline_value(b, data.truth.node(i)).transpose();
      positions[static_cast<size_t>(s)] = std::move(z);
    }
    std::vector<ContinuousEvent> events;
    Coefficients& truth = data.truth;
    for (int i = 0; i < config.p; ++i) {
      for (int j = 0; j < config.p; ++j) {
        if (i == j) continue;
        Scalar max_rate = 0.0;
        for (int s = 0; s < grid; ++s) {
          const Matrix& z = positions[static_cast<size_t>(s)];
          const Scalar log_rate = -(z.row(i) - z.row(j)).squaredNorm() + config.rate_offset;
          max_rate = std::max(max_rate, std::exp(log_rate));
        }
        const Scalar bound = 1.2 * max_rate;
        if (bound <= 0.0) continue;
        const long candidates = rng.poisson(bound * config.horizon);
        for (long c = 0; c < candidates; ++c) {
          const Scalar t = rng.uniform(0.0, config.horizon);
          const Vector zi = spline_value(basis.eval(t), truth.node(i));
          const Vector zj = spline_value(basis.eval(t), truth.node(j));
          const Scalar rate = std::exp(-(zi - zj).squaredNorm() + config.rate_offset);
          if (rng.uniform() * bound <= rate) events.push_back({i, j, t});
        }
      }
    }
    require(!events.empty(), "generate: sparse scenario produced no events; raise rate_offset");
    ContinuousEvents store(std::move(events), config.horizon);
    data.n_events = static_cast<long>(store.size());
    data.events = std::move(store);
  }
  return data;
}

Matrix trajectory_grid(const SplineBasis& basis, const Coefficients& coeffs, int grid_points) {
  require(grid_points >= 2, "trajectory_grid: need at least two grid points");
  const ParamLayout& layout = coeffs.layout();
  Matrix out(static_cast<Index>(layout.p) * grid_points, layout.d);
  for (int s = 0; s < grid_points; ++s) {
    const Scalar t = basis.horizon() * static_cast<Scalar>(s) /
                     static_cast<Scalar>(grid_points - 1);
    const BasisSupport b = basis.eval(t);
    for (int i = 0; i < layout.p; ++i)
      out.row(static_cast<Index>(i) * grid_points + s) =
          spline_value(b, coeffs.node(i)).transpose();
  }
  return out;
}

Matrix trajectory_grid(const RateModel& model, const Coefficients& coeffs, int grid_points) {
  return trajectory_grid(model.basis(), coeffs, grid_points);
}

namespace {

struct ReplicateOutcome {
  Scalar mse = std::numeric_limits<Scalar>::quiet_NaN();
  Scalar accuracy = std::numeric_limits<Scalar>::quiet_NaN();
  Scalar seconds = 0.0;
};

ScenarioConfig two_blob_scenario(int p, Scalar separation_scale, SparsityRegime regime,
                                 Scalar rate_offset) {
  ScenarioConfig scenario;
  scenario.p = p;
  scenario.d = 2;
  scenario.m = 8;
  scenario.horizon = 1.0;
  scenario.num_intervals = 10;
  scenario.regime = regime;
  scenario.rate_offset = rate_offset;
  Vector c1(2), c2(2);
  c1 << 2.0 * separation_scale, 0.8 * separation_scale;
  c2 << -2.0 * separation_scale, -0.8 * separation_scale;
  scenario.clusters = {{c1, p / 2, 0.05, 0.3}, {c2, p - p / 2, 0.05, -0.3}};
  return scenario;
}

FitOptions experiment_fit_options(const ExperimentConfig& config, int max_iters_default) {
  FitOptions options;
  options.latent_dim = 2;
  options.num_basis = 8;
  options.max_iters = config.fit_max_iters > 0 ? config.fit_max_iters : max_iters_default;
  options.patience = std::max(200, options.max_iters / 5);
  options.threads = config.threads;
  options.clustering = false;
  return options;
}

ReplicateOutcome mse_replicate(const ScenarioConfig& scenario, const FitOptions& base_options,
                               int grid_points, uint64_t seed) {
  Rng rng(seed);
  const SyntheticData data = generate(scenario, rng);

  FitOptions options = base_options;
  options.seed = splitmix64(seed ^ 0xf17);
  const auto start = std::chrono::steady_clock::now();
  const FitResult fit_result = fit(data.events, scenario.p, options);
  const auto stop = std::chrono::steady_clock::now();

  const SplineBasis basis(options.num_basis, store_horizon(data.events));
  const SplineBasis truth_basis(scenario.m, scenario.horizon);
  ReplicateOutcome outcome;
  outcome.mse = procrustes_mse(
      trajectory_grid(basis, fit_result.final_state.mean_coefficients(), grid_points),
      trajectory_grid(truth_basis, data.truth, grid_points));
  outcome.seconds = std::chrono::duration<double>(stop - start).count();
  return outcome;
}

void summarize(EvalReport& report) {
  std::vector<std::string> seen;
  for (const auto& row : report.rows)
    if (std::find(seen.begin(), seen.end(), row.setting) == seen.end())
      seen.push_back(row.setting);
  for (const auto& setting : seen) {
    ExperimentSummary s;
    s.setting = setting;
    std::vector<Scalar> mses, accs, secs;
    for (const auto& row : report.rows) {
      if (row.setting != setting) continue;
      if (std::isfinite(row.mse)) mses.push_back(row.mse);
      if (std::isfinite(row.accuracy)) accs.push_back(row.accuracy);
      secs.push_back(row.seconds);
      ++s.replicates;
    }
    auto mean = [](const std::vector<Scalar>& v) {
      return v.empty() ? std::numeric_limits<Scalar>::quiet_NaN()
                       : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<Scalar>(v.size());
    };
    s.mse_mean = mean(mses);
    s.accuracy_mean = mean(accs);
    s.seconds_mean = mean(secs);
    if (mses.size() >= 2) {
      Scalar ss = 0.0;
      for (Scalar v : mses) ss += (v - s.mse_mean) * (v - s.mse_mean);
      s.mse_sd = std::sqrt(ss / static_cast<Scalar>(mses.size() - 1));
    } else {
      s.mse_sd = std::numeric_limits<Scalar>::quiet_NaN();
    }
    report.summary.push_back(std::move(s));
  }
}

}  // namespace

EvalReport run_experiment(const ExperimentConfig& config) {
  EvalReport report;
  switch (config.which) {
    case Experiment::VaryP: {
      for (int p : config.node_counts) {
        const ScenarioConfig scenario = two_blob_scenario(p, 1.0, SparsityRegime::Dense, 0.0);
        const FitOptions options = experiment_fit_options(config, 4000);
        for (int rep = 0; rep < config.replicates; ++rep) {
          const ReplicateOutcome outcome =
              mse_replicate(scenario, options, config.grid_points,
                            splitmix64(config.seed ^ (static_cast<uint64_t>(p) * 131 +
                                                      static_cast<uint64_t>(rep))));
          report.rows.push_back({"p=" + std::to_string(p), rep, outcome.mse, outcome.accuracy,
                                 outcome.seconds});
        }
      }
      break;
    }
    case Experiment::VaryBatch: {
      const int p = 1000;
      const ScenarioConfig scenario = two_blob_scenario(p, 1.0, SparsityRegime::Dense, 0.0);
      for (Scalar factor : config.batch_factors) {
        FitOptions options = experiment_fit_options(config, 4000);
        options.batch_size = std::max(1, static_cast<int>(factor * p));
        for (int rep = 0; rep < config.replicates; ++rep) {
          const ReplicateOutcome outcome =
              mse_replicate(scenario, options, config.grid_points,
                            splitmix64(config.seed ^ (static_cast<uint64_t>(factor * 1000) * 977 +
                                                      static_cast<uint64_t>(rep))));
          char label[64];
          std::snprintf(label, sizeof(label), "nb=%gp", factor);
          report.rows.push_back({label, rep, outcome.mse, outcome.accuracy, outcome.seconds});
        }
      }
      break;
    }
    case Experiment::VarySparsity: {
      const int p = 150;
      const ScenarioConfig dense = two_blob_scenario(p, 1.0, SparsityRegime::Dense, 0.0);
      const ScenarioConfig sparse = two_blob_scenario(p, 1.0, SparsityRegime::Sparse, -2.5);
      for (int rep = 0; rep < config.replicates; ++rep) {
        const uint64_t seed = splitmix64(config.seed ^ (0x5350ULL + static_cast<uint64_t>(rep)));
        {
          FitOptions options = experiment_fit_options(config, 4000);
          options.mode = BatchMode::DenseDiscrete;
          const ReplicateOutcome outcome =
              mse_replicate(dense, options, config.grid_points, seed);
          report.rows.push_back({"dense_poisson", rep, outcome.mse, outcome.accuracy,
                                 outcome.seconds});
        }
        Rng rng(seed);
        const SyntheticData data = generate(sparse, rng);
        const SplineBasis truth_basis(sparse.m, sparse.horizon);
        const Matrix truth_grid = trajectory_grid(truth_basis, data.truth, config.grid_points);
        {
          FitOptions options = experiment_fit_options(config, 4000);
          options.mode = BatchMode::CcPartial;
          options.seed = splitmix64(seed ^ 0xc0c);
          const auto start = std::chrono::steady_clock::now();
          const FitResult fit_result = fit(data.events, sparse.p, options);
          const auto stop = std::chrono::steady_clock::now();
          const SplineBasis basis(options.num_basis, store_horizon(data.events));
          report.rows.push_back(
              {"sparse_cox", rep,
               procrustes_mse(trajectory_grid(
                                  basis, fit_result.final_state.mean_coefficients(),
                                  config.grid_points),
                              truth_grid),
               std::numeric_limits<Scalar>::quiet_NaN(),
               std::chrono::duration<double>(stop - start).count()});
        }
        {
          FitOptions options = experiment_fit_options(config, 4000);
          options.mode = BatchMode::DenseDiscrete;
          options.seed = splitmix64(seed ^ 0xd15);
          const EventStore discretized = discretize(std::get<ContinuousEvents>(data.events),
                                                    sparse.num_intervals, sparse.p);
          const auto start = std::chrono::steady_clock::now();
          const FitResult fit_result = fit(discretized, sparse.p, options);
          const auto stop = std::chrono::steady_clock::now();
          const SplineBasis basis(options.num_basis, store_horizon(discretized));
          report.rows.push_back(
              {"sparse_poisson", rep,
               procrustes_mse(trajectory_grid(
                                  basis, fit_result.final_state.mean_coefficients(),
                                  config.grid_points),
                              truth_grid),
               std::numeric_limits<Scalar>::quiet_NaN(),
               std::chrono::duration<double>(stop - start).count()});
        }
      }
      break;
    }
    case Experiment::VaryClusterVicinity: {
      const int p = 200;
      for (Scalar scale : config.vicinity_scales) {
        const ScenarioConfig scenario = two_blob_scenario(p, scale, SparsityRegime::Dense, 0.0);
        for (int rep = 0; rep < config.replicates; ++rep) {
          const uint64_t seed = splitmix64(
              config.seed ^ (static_cast<uint64_t>(scale * 4096) * 31 + static_cast<uint64_t>(rep)));
          Rng rng(seed);
          const SyntheticData data = generate(scenario, rng);
          FitOptions options = experiment_fit_options(config, 3000);
          options.clustering = true;
          options.pilot_max_iters = options.max_iters;
          options.max_iters = std::max(500, options.max_iters / 2);  // per-radius refits
          options.patience = std::max(150, options.max_iters / 5);
          options.seed = splitmix64(seed ^ 0xacc);
          const auto start = std::chrono::steady_clock::now();
          const FitResult fit_result = fit(data.events, scenario.p, options);
          const auto stop = std::chrono::steady_clock::now();
          char label[64];
          std::snprintf(label, sizeof(label), "scale=%g", scale);
          report.rows.push_back({label, rep, std::numeric_limits<Scalar>::quiet_NaN(),
                                 clustering_accuracy(fit_result.clusters.labels, data.labels),
                                 std::chrono::duration<double>(stop - start).count()});
        }
      }
      break;
    }
  }
  summarize(report);
  return report;
}

EvalReport run_scenario(const ScenarioConfig& scenario, const ScenarioFitSpec& fit_spec,
                        int threads) {
  scenario.validate();
  EvalReport report;
  for (int rep = 0; rep < scenario.replicates; ++rep) {
    const uint64_t seed = splitmix64(scenario.seed ^ (0x5C0ULL + static_cast<uint64_t>(rep)));
    Rng rng(seed);
    const SyntheticData data = generate(scenario, rng);

    FitOptions options;
    options.latent_dim = fit_spec.dim;
    options.num_basis = fit_spec.basis;
    options.max_iters = fit_spec.max_iters;
    options.patience = fit_spec.max_iters;
    options.adam.step = fit_spec.lr;
    options.clustering = fit_spec.clustering;
    options.mode = fit_spec.mode;
    options.batch_size = fit_spec.batch_size;
    options.threads = threads;
    options.seed = splitmix64(seed ^ 0xF17);
    if (fit_spec.clustering) {
      options.pilot_max_iters = fit_spec.max_iters;
      options.max_iters = std::max(500, fit_spec.max_iters / 2);
      options.patience = options.max_iters;
    }

    const auto start = std::chrono::steady_clock::now();
    const FitResult result = fit(data.events, scenario.p, options);
    const auto stop = std::chrono::steady_clock::now();

    ExperimentRow row;
    row.setting = "scenario";
    row.replicate = rep;
    row.seconds = std::chrono::duration<double>(stop - start).count();
    row.mse = procrustes_mse(
        trajectory_grid(SplineBasis(fit_spec.basis, store_horizon(data.events)),
                        result.final_state.mean_coefficients(), fit_spec.grid_points),
        trajectory_grid(SplineBasis(scenario.m, scenario.horizon), data.truth,
                        fit_spec.grid_points));
    if (fit_spec.clustering)
      row.accuracy = clustering_accuracy(result.clusters.labels, data.labels);
    report.rows.push_back(std::move(row));
  }
  summarize(report);
  return report;
}

void write_results_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "write_results_csv: cannot write '" + path + "'");
  out << "setting,replicate,mse,accuracy,seconds\n";
  char buf[160];
  for (const auto& row : report.rows) {
    std::snprintf(buf, sizeof(buf), "%s,%d,%.10g,%.10g,%.4f", row.setting.c_str(), row.replicate,
                  row.mse, row.accuracy, row.seconds);
    out << buf << "\n";
  }
}

void write_summary_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "write_summary_csv: cannot write '" + path + "'");
  out << "setting,replicates,mse_mean,mse_sd,accuracy_mean,seconds_mean\n";
  char buf[200];
  for (const auto& s : report.summary) {
    std::snprintf(buf, sizeof(buf), "%s,%d,%.10g,%.10g,%.10g,%.4f", s.setting.c_str(),
                  s.replicates, s.mse_mean, s.mse_sd, s.accuracy_mean, s.seconds_mean);
    out << buf << "\n";
  }
}

}  // namespace latnet
