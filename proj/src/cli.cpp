#include "latnet/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <set>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "latnet/io.hpp"
#include "latnet/simkit.hpp"

namespace latnet {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Manifests hold the fully resolved flag set of a run as a flat JSON object
// keyed by long option names; raw value strings keep seeds exact. A manifest
// passed back via --config is expanded into argv tokens before parsing, with
// explicit command-line flags taking precedence.
std::string manifest_from_app(const CLI::App* app) {
  json j = json::object();
  for (const CLI::Option* opt : app->get_options({})) {
    if (opt->get_lnames().empty()) continue;
    const std::string& name = opt->get_lnames()[0];
    if (name == "config" || name == "help") continue;
    if (opt->get_type_size() != 0) {
      if (opt->count() == 1) {
        j[name] = opt->results().at(0);
      } else if (opt->count() > 1) {
        j[name] = opt->results();
      } else if (!opt->get_default_str().empty()) {
        j[name] = opt->get_default_str();
      }
    } else {
      j[name] = opt->count() > 0;
    }
  }
  return j.dump(1);
}

std::vector<std::string> tokens_from_manifest(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail("config '" + path + "' is not valid JSON: " + std::string(e.what()));
  }
  require(j.is_object(), "config '" + path + "' must be a JSON object");
  std::vector<std::string> tokens;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string flag = "--" + it.key();
    const json& value = *it;
    if (value.is_boolean()) {
      tokens.push_back(flag + (value.get<bool>() ? "=true" : "=false"));
    } else if (value.is_string()) {
      tokens.push_back(flag);
      tokens.push_back(value.get<std::string>());
    } else if (value.is_number()) {
      tokens.push_back(flag);
      tokens.push_back(value.dump());
    } else if (value.is_array()) {
      tokens.push_back(flag);
      for (const auto& entry : value)
        tokens.push_back(entry.is_string() ? entry.get<std::string>() : entry.dump());
    } else {
      fail("config '" + path + "': unsupported value for " + it.key());
    }
  }
  return tokens;
}

// rewrites [sub, a, b, --config, path, c] as [sub, <config tokens>, a, b, c]
std::vector<std::string> expand_config_args(const std::vector<std::string>& args) {
  if (args.size() < 2) return args;
  const std::string& sub = args[1];
  if (sub != "fit" && sub != "simulate") return args;
  std::vector<std::string> explicit_args;
  std::string config_path;
  for (size_t i = 2; i < args.size(); ++i) {
    if (args[i] == "--config") {
      require(i + 1 < args.size(), "--config needs a file argument");
      config_path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config_path = args[i].substr(9);
    } else {
      explicit_args.push_back(args[i]);
    }
  }
  if (config_path.empty()) return args;
  // explicit flags replace manifest entries outright
  std::set<std::string> overridden;
  for (const auto& arg : explicit_args) {
    if (arg.rfind("--", 0) != 0) continue;
    const size_t eq = arg.find('=');
    overridden.insert(eq == std::string::npos ? arg : arg.substr(0, eq));
  }
  std::vector<std::string> out{args[0], sub};
  const std::vector<std::string> from_config = tokens_from_manifest(config_path);
  for (size_t i = 0; i < from_config.size();) {
    const std::string& token = from_config[i];
    size_t next = i + 1;
    while (next < from_config.size() && from_config[next].rfind("--", 0) != 0) ++next;
    const size_t eq = token.find('=');
    const std::string name = eq == std::string::npos ? token : token.substr(0, eq);
    if (overridden.count(name) == 0)
      out.insert(out.end(), from_config.begin() + static_cast<long>(i),
                 from_config.begin() + static_cast<long>(next));
    i = next;
  }
  out.insert(out.end(), explicit_args.begin(), explicit_args.end());
  return out;
}

char resolve_delimiter(const std::string& name) {
  if (name == "tab" || name == "\\t" || name == "\t") return '\t';
  if (name == "comma") return ',';
  if (name == "space") return ' ';
  require(name.size() == 1, "invalid --delimiter (use tab, comma, space, or one character)");
  return name[0];
}

int resolve_threads(int threads) {
  if (threads > 0) return threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

struct FitArgs {
  std::string input;
  std::string format = "continuous";
  std::string delimiter = "tab";
  double horizon = 0.0;
  int intervals = 0;
  std::string mode;  // empty -> per-format default
  int batch_size = 0;
  uint64_t seed = 1;
  int controls_per_case = 1;
  double lr = 1e-2;
  double xi1 = 0.9;
  double xi2 = 0.999;
  std::string adam_variant = "sqrt";
  bool no_bias_correction = false;
  int patience = 2000;
  int max_iters = 20000;
  int pilot_iters = 0;
  int dim = 2;
  int basis = 10;
  std::string similarity = "euclid";
  double lambda = 1.0;
  bool unit_norm = false;
  bool propensities = false;
  bool no_clustering = false;
  std::vector<double> radii;
  int auto_radii = 5;
  int depth = 1;
  int min_size = 10;
  std::string inference = "svi";
  std::string clust_mode = "fast";
  double gamma_smooth = 1.0;
  double gamma_clust = 1.0;
  double gamma_aux = 1.0;
  double gamma_dist = 1.0;
  double sigma_init = 1e-3;
  double prior_sigma = 1.0;
  double gamma_prior_sigma = 2.0;
  int threads = 0;
  std::string out = "latnet_out";
  int progress_every = 500;
  int grid = 50;
};

void add_fit_options(CLI::App* cmd, FitArgs& a) {
  cmd->add_option("--input", a.input, "event file (delimited text with header)")->required();
  cmd->add_option("--format", a.format, "input representation")
      ->check(CLI::IsMember({"continuous", "discrete"}))
      ->capture_default_str();
  cmd->add_option("--delimiter", a.delimiter, "tab, comma, space, or one character")
      ->capture_default_str();
  cmd->add_option("--horizon", a.horizon, "override time horizon T");
  cmd->add_option("--intervals", a.intervals,
                  "interval count (discrete boundaries, or discretization of continuous input)");
  cmd->add_option("--mode", a.mode, "likelihood mode")
      ->check(CLI::IsMember({"dense", "cc-discrete", "cc-partial"}));
  cmd->add_option("--batch-size", a.batch_size, "mini-batch size |B| (0 -> 2p)")
      ->capture_default_str();
  cmd->add_option("--seed", a.seed, "random seed")->capture_default_str();
  cmd->add_option("--controls-per-case", a.controls_per_case, "partial-likelihood controls")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--lr", a.lr, "Adam step size")->capture_default_str();
  cmd->add_option("--xi1", a.xi1, "Adam first-moment decay")->capture_default_str();
  cmd->add_option("--xi2", a.xi2, "Adam second-moment decay")->capture_default_str();
  cmd->add_option("--adam-variant", a.adam_variant, "paper (m/v) or sqrt (m/sqrt v)")
      ->check(CLI::IsMember({"paper", "sqrt"}))
      ->capture_default_str();
  cmd->add_flag("--no-bias-correction", a.no_bias_correction,
                "disable Adam moment bias correction");
  cmd->add_option("--patience", a.patience, "stop after this many iterations without a new max")
      ->capture_default_str();
  cmd->add_option("--max-iters", a.max_iters, "iteration cap per phase")->capture_default_str();
  cmd->add_option("--pilot-iters", a.pilot_iters, "pilot iteration cap (0 -> max-iters)")
      ->capture_default_str();
  cmd->add_option("--dim", a.dim, "latent dimension d")->capture_default_str();
  cmd->add_option("--basis", a.basis, "spline basis count m")->capture_default_str();
  cmd->add_option("--similarity", a.similarity, "euclid or inner")
      ->check(CLI::IsMember({"euclid", "inner"}))
      ->capture_default_str();
  cmd->add_option("--lambda", a.lambda, "inner-product scale")->capture_default_str();
  cmd->add_flag("--unit-norm", a.unit_norm, "hyper-sphere constraint (inner similarity)");
  cmd->add_flag("--propensities", a.propensities, "per-node propensity intercepts");
  cmd->add_flag("--no-clustering", a.no_clustering, "skip the clustering phases");
  cmd->add_option("--radii", a.radii, "candidate kernel radii (default: pilot quantiles)");
  cmd->add_option("--auto-radii", a.auto_radii, "auto candidate count")->capture_default_str();
  cmd->add_option("--depth", a.depth, "nested refit depth")->capture_default_str();
  cmd->add_option("--min-size", a.min_size, "minimum cluster size for nested refits")
      ->capture_default_str();
  cmd->add_option("--inference", a.inference, "svi or map")
      ->check(CLI::IsMember({"svi", "map"}))
      ->capture_default_str();
  cmd->add_option("--clust-mode", a.clust_mode, "fast (components) or minibatch (finite gamma)")
      ->check(CLI::IsMember({"fast", "minibatch"}))
      ->capture_default_str();
  cmd->add_option("--gamma-smooth", a.gamma_smooth, "smoothness weight (map inference)")
      ->capture_default_str();
  cmd->add_option("--gamma-clust", a.gamma_clust, "clustering weight (map fast mode)")
      ->capture_default_str();
  cmd->add_option("--gamma-aux", a.gamma_aux, "centroid tie weight (map minibatch mode)")
      ->capture_default_str();
  cmd->add_option("--gamma-dist", a.gamma_dist, "centroid distance weight (map minibatch mode)")
      ->capture_default_str();
  cmd->add_option("--sigma-init", a.sigma_init, "initial posterior sd")->capture_default_str();
  cmd->add_option("--prior-sigma", a.prior_sigma, "coefficient prior sd")->capture_default_str();
  cmd->add_option("--gamma-prior-sigma", a.gamma_prior_sigma, "log-gamma prior sd")
      ->capture_default_str();
  cmd->add_option("--threads", a.threads, "worker threads (0 -> cores)")->capture_default_str();
  cmd->add_option("--out", a.out, "output directory")->capture_default_str();
  cmd->add_option("--progress-every", a.progress_every, "progress interval (0 silences)")
      ->capture_default_str();
  cmd->add_option("--grid", a.grid, "trajectory export grid points")->capture_default_str();
}

BatchMode parse_mode(const std::string& mode) {
  if (mode == "dense") return BatchMode::DenseDiscrete;
  if (mode == "cc-discrete") return BatchMode::CcDiscrete;
  return BatchMode::CcPartial;
}

int cmd_fit(const FitArgs& a, CLI::App* cmd) {
  // cross-flag validation first, before any computation
  const bool discrete_input = a.format == "discrete";
  std::string mode = a.mode;
  if (mode.empty()) mode = discrete_input ? "dense" : "cc-partial";
  if (discrete_input && mode == "cc-partial") {
    std::cerr << "error: --mode cc-partial requires continuous input\n";
    return 2;
  }
  if (!discrete_input && mode != "cc-partial" && a.intervals <= 0) {
    std::cerr << "error: --mode " << mode
              << " on continuous input requires --intervals for discretization\n";
    return 2;
  }
  if (a.unit_norm && a.similarity != "inner") {
    std::cerr << "error: --unit-norm requires --similarity inner\n";
    return 2;
  }
  if (a.dim < 1 || a.basis < 4) {
    std::cerr << "error: need --dim >= 1 and --basis >= 4\n";
    return 2;
  }
  if (a.depth < 1 || a.min_size < 2) {
    std::cerr << "error: need --depth >= 1 and --min-size >= 2\n";
    return 2;
  }

  LoadOptions load_options;
  load_options.delimiter = resolve_delimiter(a.delimiter);
  if (a.horizon > 0.0) load_options.horizon = a.horizon;
  if (a.intervals > 0 && discrete_input) load_options.num_intervals = a.intervals;
  LoadResult loaded = load_events(
      a.input, discrete_input ? EventFormat::Discrete : EventFormat::Continuous, load_options);
  if (loaded.rejected_self_loops > 0)
    std::cerr << "note: rejected " << loaded.rejected_self_loops << " self-loop rows\n";
  const int p = loaded.registry.count();

  EventStore events = std::move(loaded.events);
  if (!discrete_input && mode != "cc-partial")
    events = discretize(std::get<ContinuousEvents>(events), a.intervals, p);

  fs::create_directories(a.out);
  const std::string out = a.out;

  // manifest with the fully resolved flag set; replay via --config
  {
    std::ofstream manifest(out + "/manifest.json");
    require(manifest.good(), "cannot write manifest.json");
    manifest << manifest_from_app(cmd) << "\n";
  }

  FitOptions options;
  options.latent_dim = a.dim;
  options.num_basis = a.basis;
  options.similarity.kind = a.similarity == "inner" ? SimilarityConfig::Kind::InnerProduct
                                                    : SimilarityConfig::Kind::NegSqEuclid;
  options.similarity.lambda = a.lambda;
  options.similarity.unit_norm = a.unit_norm;
  options.propensities = a.propensities;
  options.mode = parse_mode(mode);
  options.batch_size = a.batch_size;
  options.sampler.controls_per_case = a.controls_per_case;
  options.adam.step = a.lr;
  options.adam.xi1 = a.xi1;
  options.adam.xi2 = a.xi2;
  options.adam.variant =
      a.adam_variant == "paper" ? AdamVariant::PaperLiteral : AdamVariant::SqrtVariant;
  options.adam.bias_correction = !a.no_bias_correction;
  options.variational.sigma_init = a.sigma_init;
  options.variational.coeff_prior_sigma = a.prior_sigma;
  options.variational.gamma_prior_sigma = a.gamma_prior_sigma;
  options.max_iters = a.max_iters;
  options.pilot_max_iters = a.pilot_iters;
  options.patience = a.patience;
  options.clustering = !a.no_clustering;
  options.radii.assign(a.radii.begin(), a.radii.end());
  options.num_auto_radii = a.auto_radii;
  options.threads = resolve_threads(a.threads);
  options.seed = a.seed;

  std::ofstream trace(out + "/elbo_trace.csv");
  require(trace.good(), "cannot write elbo_trace.csv");
  trace << "iter,loglik,p_smooth,p_clust,elbo\n";
  long global_iter = 0;
  const char* phase_names[] = {"pilot", "clustered", "map"};
  options.on_iteration = [&](FitPhase phase, long, const LowerBoundReport& report,
                             int n_clusters) {
    char buf[200];
    std::snprintf(buf, sizeof(buf), "%ld,%.10g,%.10g,%.10g,%.10g", global_iter, report.loglik,
                  report.e_smooth, report.e_clust, report.total);
    trace << buf << "\n";
    if (a.progress_every > 0 && global_iter % a.progress_every == 0)
      std::fprintf(stderr, "[%s] iter %ld elbo %.6g clusters %d\n",
                   phase_names[static_cast<int>(phase)], global_iter, report.total, n_clusters);
    ++global_iter;
  };

  Checkpoint checkpoint;
  checkpoint.horizon = store_horizon(events);
  checkpoint.similarity = options.similarity;
  checkpoint.variational = options.variational;
  for (int i = 0; i < p; ++i) {
    checkpoint.node_ids.push_back(loaded.registry.id_of(i));
    checkpoint.static_flags.push_back(loaded.registry.is_static(i));
  }

  std::vector<int> labels;
  Coefficients final_coeffs;

  if (a.inference == "svi") {
    FitResult result = fit(events, p, options);
    checkpoint.layout = result.final_state.layout();
    checkpoint.mu = result.final_state.mu();
    checkpoint.rho = result.final_state.rho();
    final_coeffs = result.final_state.mean_coefficients();
    if (options.clustering) {
      checkpoint.has_clusters = true;
      checkpoint.radius = result.best_radius();
      checkpoint.labels = result.clusters.labels;
      checkpoint.alpha_plus = result.alpha_plus.flat();
      labels = result.clusters.labels;
      write_radius_table_csv(out + "/radius_table.csv", result.radius_table);
    } else {
      labels.resize(static_cast<size_t>(p));
      for (int i = 0; i < p; ++i) labels[static_cast<size_t>(i)] = i;
    }
    if (a.depth >= 2 && options.clustering) {
      NestedNode tree = fit_nested(events, result, options, a.min_size, a.depth);
      write_hierarchy_json(out + "/hierarchy.json", tree, checkpoint.node_ids);
    }
  } else {
    // point-estimate path; hosts the finite-gamma_dist clustering mode
    if (a.depth >= 2)
      std::cerr << "note: nested refits run under --inference svi only\n";
    const RateModel model(SplineBasis(a.basis, store_horizon(events)),
                          ParamLayout{p, a.basis, a.dim, 0, a.propensities},
                          options.similarity);
    Coefficients init(model.layout());
    Rng init_rng(splitmix64(a.seed ^ 0x1417));
    for (Index i = 0; i < init.flat().size(); ++i) init.flat()[i] = 1e-3 * init_rng.normal();

    MapOptions pilot_options;
    pilot_options.gamma_smooth = a.gamma_smooth;
    FitOptions map_fit = options;
    MapResult pilot = fit_map(events, model, init, pilot_options, map_fit);
    const Coefficients alpha_plus = pilot_freeze(pilot.coefficients);

    MapResult final = pilot;
    if (options.clustering) {
      Scalar radius;
      if (!options.radii.empty()) {
        radius = options.radii.front();
      } else {
        Rng radii_rng(splitmix64(a.seed ^ 0x51554e54));
        const auto candidates = candidate_radii(alpha_plus, 3, radii_rng);
        radius = candidates[candidates.size() / 2];
      }
      checkpoint.radius = radius;
      checkpoint.has_clusters = true;
      checkpoint.alpha_plus = alpha_plus.flat();
      map_fit.seed = splitmix64(a.seed ^ 0x4d32);
      if (a.clust_mode == "fast") {
        ClusterState clusters = make_cluster_state(alpha_plus, radius);
        MapOptions final_options;
        final_options.gamma_smooth = a.gamma_smooth;
        final_options.gamma_clust = a.gamma_clust;
        final_options.clusters = &clusters;
        final = fit_map(events, model, alpha_plus, final_options, map_fit);
        labels = clusters.labels;
      } else {
        MapOptions final_options;
        final_options.gamma_smooth = a.gamma_smooth;
        final_options.finite_clust = true;
        final_options.gamma_aux = a.gamma_aux;
        final_options.gamma_dist = a.gamma_dist;
        final_options.kernel_pilot = &alpha_plus;
        final_options.kernel_radius = radius;
        final = fit_map(events, model, alpha_plus, final_options, map_fit);
        // aggregate the fitted free centroids with the same kernel radius
        Coefficients centroid_coeffs(model.layout());
        for (int i = 0; i < p; ++i)
          centroid_coeffs.node(i) =
              final.centroid_rows.middleRows(static_cast<Index>(i) * a.basis, a.basis);
        labels = connected_components(centroid_coeffs, radius);
      }
      checkpoint.labels = labels;
    } else {
      labels.resize(static_cast<size_t>(p));
      for (int i = 0; i < p; ++i) labels[static_cast<size_t>(i)] = i;
    }
    checkpoint.layout = model.layout();
    checkpoint.mu = final.coefficients.flat();
    checkpoint.rho = Vector();
    final_coeffs = final.coefficients;
  }

  save_checkpoint(checkpoint, out + "/checkpoint.json");
  const SplineBasis basis(a.basis, checkpoint.horizon);
  write_trajectories_csv(out + "/trajectories.csv", checkpoint.node_ids, basis, final_coeffs,
                         a.grid);
  write_clusters_csv(out + "/clusters.csv", checkpoint.node_ids, labels);
  write_coefficients(out + "/coefficients.csv", out + "/coefficients.json", basis, final_coeffs);
  return 0;
}

struct SimArgs {
  std::string experiment;
  std::string scenario_file;
  int replicates = 10;
  uint64_t seed = 7;
  int threads = 0;
  std::string out = "latnet_sim";
  int grid = 50;
  std::vector<int> p_list;
  std::vector<double> batch_factors;
  std::vector<double> scales;
  int max_iters = 0;
};

int cmd_simulate(const SimArgs& a, CLI::App* cmd) {
  if (!a.scenario_file.empty()) {
    ScenarioConfig scenario;
    ScenarioFitSpec fit_spec;
    load_scenario_file(a.scenario_file, &scenario, &fit_spec);
    if (cmd->count("--replicates") > 0) scenario.replicates = a.replicates;
    if (cmd->count("--seed") > 0) scenario.seed = a.seed;
    if (cmd->count("--max-iters") > 0 && a.max_iters > 0) fit_spec.max_iters = a.max_iters;
    if (cmd->count("--grid") > 0) fit_spec.grid_points = a.grid;
    fs::create_directories(a.out);
    {
      std::ofstream manifest(a.out + "/manifest.json");
      require(manifest.good(), "cannot write manifest.json");
      manifest << manifest_from_app(cmd) << "\n";
    }
    const EvalReport report = run_scenario(scenario, fit_spec, resolve_threads(a.threads));
    write_results_csv(report, a.out + "/results.csv");
    write_summary_csv(report, a.out + "/summary.csv");
    std::cout << "wrote " << a.out << "/results.csv and " << a.out << "/summary.csv\n";
    return 0;
  }
  ExperimentConfig config;
  if (a.experiment == "vary_p") {
    config.which = Experiment::VaryP;
  } else if (a.experiment == "vary_batch") {
    config.which = Experiment::VaryBatch;
  } else if (a.experiment == "vary_sparsity") {
    config.which = Experiment::VarySparsity;
  } else if (a.experiment == "vary_cluster_vicinity") {
    config.which = Experiment::VaryClusterVicinity;
  } else {
    std::cerr << "error: unknown experiment '" << a.experiment << "'\n";
    return 2;
  }
  config.replicates = a.replicates;
  config.seed = a.seed;
  config.threads = resolve_threads(a.threads);
  config.grid_points = a.grid;
  if (!a.p_list.empty()) config.node_counts = a.p_list;
  if (!a.batch_factors.empty())
    config.batch_factors.assign(a.batch_factors.begin(), a.batch_factors.end());
  if (!a.scales.empty()) config.vicinity_scales.assign(a.scales.begin(), a.scales.end());
  config.fit_max_iters = a.max_iters;

  fs::create_directories(a.out);
  {
    std::ofstream manifest(a.out + "/manifest.json");
    require(manifest.good(), "cannot write manifest.json");
    manifest << manifest_from_app(cmd) << "\n";
  }
  const EvalReport report = run_experiment(config);
  write_results_csv(report, a.out + "/results.csv");
  write_summary_csv(report, a.out + "/summary.csv");
  std::cout << "wrote " << a.out << "/results.csv and " << a.out << "/summary.csv\n";
  return 0;
}

struct EvalArgs {
  std::string estimate;
  std::string truth;
  std::string labels;
  std::string true_labels;
};

int cmd_eval(const EvalArgs& a) {
  if (!a.estimate.empty() || !a.truth.empty()) {
    require(!a.estimate.empty() && !a.truth.empty(),
            "eval: --estimate and --truth go together");
    const TrajectoryFile est = read_trajectories_csv(a.estimate);
    const TrajectoryFile truth = read_trajectories_csv(a.truth);
    if (est.node_ids.size() != truth.node_ids.size() ||
        est.points.rows() != truth.points.rows() || est.points.cols() != truth.points.cols()) {
      std::cerr << "error: estimate and truth files do not match (p=" << est.node_ids.size()
                << " vs " << truth.node_ids.size() << ")\n";
      return 2;
    }
    std::printf("mse %.12g\n", procrustes_mse(est.points, truth.points));
  }
  if (!a.labels.empty() || !a.true_labels.empty()) {
    require(!a.labels.empty() && !a.true_labels.empty(),
            "eval: --labels and --true-labels go together");
    const std::vector<int> est = read_clusters_csv(a.labels);
    const std::vector<int> truth = read_clusters_csv(a.true_labels);
    if (est.size() != truth.size()) {
      std::cerr << "error: label files do not match (p=" << est.size() << " vs " << truth.size()
                << ")\n";
      return 2;
    }
    std::printf("accuracy %.12g\n", clustering_accuracy(est, truth));
  }
  return 0;
}

struct ClusterArgs {
  std::string checkpoint;
  double radius = -1.0;
  std::vector<double> radii;
  std::string out = "clusters.csv";
  bool sweep = false;
};

int cmd_cluster(const ClusterArgs& a) {
  const Checkpoint checkpoint = load_checkpoint(a.checkpoint);
  Coefficients features =
      checkpoint.alpha_plus.size() == checkpoint.layout.size()
          ? Coefficients(checkpoint.layout, checkpoint.alpha_plus)
          : checkpoint.mean_coefficients();
  if (a.sweep) {
    std::vector<Scalar> radii(a.radii.begin(), a.radii.end());
    require(!radii.empty(), "cluster --sweep needs --radii");
    write_sweep_csv(a.out, radius_sweep(features, radii));
  } else {
    require(a.radius >= 0.0, "cluster needs --radius (or --sweep with --radii)");
    const ClusterState state = make_cluster_state(features, a.radius);
    write_clusters_csv(a.out, checkpoint.node_ids, state.labels);
  }
  std::cout << "wrote " << a.out << "\n";
  return 0;
}

struct ExportArgs {
  std::string checkpoint;
  std::string out = "trajectories.csv";
  int grid = 50;
};

int cmd_export(const ExportArgs& a) {
  const Checkpoint checkpoint = load_checkpoint(a.checkpoint);
  write_trajectories_csv(a.out, checkpoint.node_ids, checkpoint.make_basis(),
                         checkpoint.mean_coefficients(), a.grid);
  std::cout << "wrote " << a.out << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"latnet: latent-space trajectories for relational event streams"};
  app.require_subcommand(1);

  FitArgs fit_args;
  CLI::App* fit_cmd = app.add_subcommand("fit", "fit the model to an event file");
  add_fit_options(fit_cmd, fit_args);
  std::string config_placeholder;
  fit_cmd->add_option("--config", config_placeholder,
                      "JSON manifest with flag values (expanded before parsing)");

  SimArgs sim_args;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "run a synthetic study");
  sim_cmd->add_option("--experiment", sim_args.experiment,
                      "vary_p | vary_batch | vary_sparsity | vary_cluster_vicinity");
  sim_cmd->add_option("--scenario", sim_args.scenario_file,
                      "JSON scenario file (replaces --experiment)");
  sim_cmd->add_option("--replicates", sim_args.replicates, "replicates per setting")
      ->capture_default_str();
  sim_cmd->add_option("--seed", sim_args.seed, "random seed")->capture_default_str();
  sim_cmd->add_option("--threads", sim_args.threads, "worker threads (0 -> cores)")
      ->capture_default_str();
  sim_cmd->add_option("--out", sim_args.out, "output directory")->capture_default_str();
  sim_cmd->add_option("--grid", sim_args.grid, "Procrustes grid points")->capture_default_str();
  sim_cmd->add_option("--p-list", sim_args.p_list, "node counts for vary_p");
  sim_cmd->add_option("--batch-factors", sim_args.batch_factors, "n_b/p factors for vary_batch");
  sim_cmd->add_option("--scales", sim_args.scales, "separation scales for vary_cluster_vicinity");
  sim_cmd->add_option("--max-iters", sim_args.max_iters, "fit iteration cap (0 -> preset)")
      ->capture_default_str();
  std::string sim_config_placeholder;
  sim_cmd->add_option("--config", sim_config_placeholder,
                      "JSON manifest with flag values (expanded before parsing)");

  EvalArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand("eval", "score trajectories or labels against truth");
  eval_cmd->add_option("--estimate", eval_args.estimate, "estimated trajectories CSV");
  eval_cmd->add_option("--truth", eval_args.truth, "true trajectories CSV");
  eval_cmd->add_option("--labels", eval_args.labels, "estimated clusters CSV");
  eval_cmd->add_option("--true-labels", eval_args.true_labels, "true clusters CSV");

  ClusterArgs cluster_args;
  CLI::App* cluster_cmd = app.add_subcommand("cluster", "components from a checkpoint");
  cluster_cmd->add_option("--checkpoint", cluster_args.checkpoint, "checkpoint file")->required();
  cluster_cmd->add_option("--radius", cluster_args.radius, "kernel radius");
  cluster_cmd->add_option("--radii", cluster_args.radii, "radii for --sweep");
  cluster_cmd->add_flag("--sweep", cluster_args.sweep, "write radius,n_clusters table");
  cluster_cmd->add_option("--out", cluster_args.out, "output CSV")->capture_default_str();

  ExportArgs export_args;
  CLI::App* export_cmd =
      app.add_subcommand("export-trajectories", "positions on a grid from a checkpoint");
  export_cmd->add_option("--checkpoint", export_args.checkpoint, "checkpoint file")->required();
  export_cmd->add_option("--out", export_args.out, "output CSV")->capture_default_str();
  export_cmd->add_option("--grid", export_args.grid, "grid points")->capture_default_str();

  std::vector<std::string> raw_args;
  for (int i = 0; i < argc; ++i) raw_args.emplace_back(argv[i]);
  try {
    raw_args = expand_config_args(raw_args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  // CLI11 parses name-last
  std::vector<std::string> reversed(raw_args.rbegin(), raw_args.rend());
  reversed.pop_back();  // drop argv[0]

  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (sim_cmd->parsed() && sim_args.experiment.empty() && sim_args.scenario_file.empty()) {
    std::cerr << "error: simulate needs --experiment or --scenario\n";
    return 2;
  }

  try {
    if (fit_cmd->parsed()) return cmd_fit(fit_args, fit_cmd);
    if (sim_cmd->parsed()) return cmd_simulate(sim_args, sim_cmd);
    if (eval_cmd->parsed()) return cmd_eval(eval_args);
    if (cluster_cmd->parsed()) return cmd_cluster(cluster_args);
    if (export_cmd->parsed()) return cmd_export(export_args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace latnet
