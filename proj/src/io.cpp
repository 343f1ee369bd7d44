#include "latnet/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace latnet {

namespace {

using nlohmann::json;

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Vector vector_from_json(const json& j) {
  Vector out(static_cast<Index>(j.size()));
  Index at = 0;
  for (const auto& x : j) out[at++] = x.get<Scalar>();
  return out;
}

std::string format_scalar(Scalar v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  json j;
  j["kind"] = "latnet-checkpoint";
  j["version"] = checkpoint.version;
  j["horizon"] = checkpoint.horizon;
  j["layout"] = {{"p", checkpoint.layout.p},
                 {"m", checkpoint.layout.m},
                 {"d", checkpoint.layout.d},
                 {"q", checkpoint.layout.q},
                 {"propensities", checkpoint.layout.propensities}};
  j["similarity"] = {
      {"kind",
       checkpoint.similarity.kind == SimilarityConfig::Kind::InnerProduct ? "inner_product"
                                                                          : "neg_sq_euclid"},
      {"lambda", checkpoint.similarity.lambda},
      {"unit_norm", checkpoint.similarity.unit_norm}};
  j["variational"] = {{"sigma_init", checkpoint.variational.sigma_init},
                      {"coeff_prior_mu", checkpoint.variational.coeff_prior_mu},
                      {"coeff_prior_sigma", checkpoint.variational.coeff_prior_sigma},
                      {"gamma_prior_mu", checkpoint.variational.gamma_prior_mu},
                      {"gamma_prior_sigma", checkpoint.variational.gamma_prior_sigma},
                      {"mc_samples", checkpoint.variational.mc_samples}};
  j["node_ids"] = checkpoint.node_ids;
  j["static_flags"] = checkpoint.static_flags;
  j["mu"] = vector_to_json(checkpoint.mu);
  j["rho"] = vector_to_json(checkpoint.rho);
  j["has_clusters"] = checkpoint.has_clusters;
  j["radius"] = checkpoint.radius;
  j["labels"] = checkpoint.labels;
  j["alpha_plus"] = vector_to_json(checkpoint.alpha_plus);

  std::ofstream out(path);
  require(out.good(), "save_checkpoint: cannot write '" + path + "'");
  out << j.dump(1) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "load_checkpoint: cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail("load_checkpoint: parse error in '" + path + "': " + e.what());
  }
  require(j.value("kind", "") == std::string("latnet-checkpoint"),
          "load_checkpoint: '" + path + "' is not a checkpoint file");
  Checkpoint c;
  c.version = j.at("version").get<int>();
  require(c.version == 1, "load_checkpoint: unsupported version");
  c.horizon = j.at("horizon").get<Scalar>();
  const json& layout = j.at("layout");
  c.layout.p = layout.at("p").get<int>();
  c.layout.m = layout.at("m").get<int>();
  c.layout.d = layout.at("d").get<int>();
  c.layout.q = layout.at("q").get<int>();
  c.layout.propensities = layout.at("propensities").get<bool>();
  const json& sim = j.at("similarity");
  c.similarity.kind = sim.at("kind").get<std::string>() == "inner_product"
                          ? SimilarityConfig::Kind::InnerProduct
                          : SimilarityConfig::Kind::NegSqEuclid;
  c.similarity.lambda = sim.at("lambda").get<Scalar>();
  c.similarity.unit_norm = sim.at("unit_norm").get<bool>();
  const json& var = j.at("variational");
  c.variational.sigma_init = var.at("sigma_init").get<Scalar>();
  c.variational.coeff_prior_mu = var.at("coeff_prior_mu").get<Scalar>();
  c.variational.coeff_prior_sigma = var.at("coeff_prior_sigma").get<Scalar>();
  c.variational.gamma_prior_mu = var.at("gamma_prior_mu").get<Scalar>();
  c.variational.gamma_prior_sigma = var.at("gamma_prior_sigma").get<Scalar>();
  c.variational.mc_samples = var.value("mc_samples", 1);
  c.node_ids = j.at("node_ids").get<std::vector<std::string>>();
  c.static_flags = j.at("static_flags").get<std::vector<bool>>();
  c.mu = vector_from_json(j.at("mu"));
  c.rho = vector_from_json(j.at("rho"));
  c.has_clusters = j.at("has_clusters").get<bool>();
  c.radius = j.at("radius").get<Scalar>();
  c.labels = j.at("labels").get<std::vector<int>>();
  c.alpha_plus = vector_from_json(j.at("alpha_plus"));
  require(c.mu.size() >= c.layout.size(), "load_checkpoint: mu size mismatch");
  return c;
}

void write_trajectories_csv(const std::string& path, const std::vector<std::string>& node_ids,
                            const SplineBasis& basis, const Coefficients& coeffs,
                            int grid_points) {
  const ParamLayout& layout = coeffs.layout();
  require(static_cast<int>(node_ids.size()) == layout.p,
          "write_trajectories_csv: id count mismatch");
  require(grid_points >= 2, "write_trajectories_csv: need at least two grid points");
  std::ofstream out(path);
  require(out.good(), "write_trajectories_csv: cannot write '" + path + "'");
  out << "node,t";
  for (int c = 0; c < layout.d; ++c) out << ",x" << (c + 1);
  out << "\n";
  for (int i = 0; i < layout.p; ++i) {
    for (int s = 0; s < grid_points; ++s) {
      const Scalar t =
          basis.horizon() * static_cast<Scalar>(s) / static_cast<Scalar>(grid_points - 1);
      const Vector z = spline_value(basis.eval(t), coeffs.node(i));
      out << node_ids[static_cast<size_t>(i)] << "," << format_scalar(t);
      for (int c = 0; c < layout.d; ++c) out << "," << format_scalar(z[c]);
      out << "\n";
    }
  }
}

TrajectoryFile read_trajectories_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "read_trajectories_csv: cannot open '" + path + "'");
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "read_trajectories_csv: empty file");
  int dim = -1;
  TrajectoryFile out;
  std::vector<std::vector<Scalar>> rows;
  long line_no = 1;
  std::vector<std::string> seen_order;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    require(fields.size() >= 3, "read_trajectories_csv: short row at line " +
                                    std::to_string(line_no));
    const int row_dim = static_cast<int>(fields.size()) - 2;
    if (dim < 0) dim = row_dim;
    require(row_dim == dim, "read_trajectories_csv: ragged row at line " +
                                std::to_string(line_no));
    if (seen_order.empty() || seen_order.back() != fields[0]) {
      if (std::find(seen_order.begin(), seen_order.end(), fields[0]) == seen_order.end())
        seen_order.push_back(fields[0]);
    }
    out.times.push_back(std::strtod(fields[1].c_str(), nullptr));
    std::vector<Scalar> row(static_cast<size_t>(dim));
    for (int c = 0; c < dim; ++c)
      row[static_cast<size_t>(c)] = std::strtod(fields[static_cast<size_t>(c) + 2].c_str(), nullptr);
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), "read_trajectories_csv: no data rows");
  out.node_ids = std::move(seen_order);
  out.points.resize(static_cast<Index>(rows.size()), dim);
  for (size_t r = 0; r < rows.size(); ++r)
    for (int c = 0; c < dim; ++c) out.points(static_cast<Index>(r), c) = rows[r][static_cast<size_t>(c)];
  return out;
}

void write_clusters_csv(const std::string& path, const std::vector<std::string>& node_ids,
                        const std::vector<int>& labels) {
  require(node_ids.size() == labels.size(), "write_clusters_csv: size mismatch");
  std::vector<long> sizes;
  for (int label : labels) {
    if (static_cast<size_t>(label) >= sizes.size()) sizes.resize(static_cast<size_t>(label) + 1, 0);
    ++sizes[static_cast<size_t>(label)];
  }
  std::ofstream out(path);
  require(out.good(), "write_clusters_csv: cannot write '" + path + "'");
  out << "node_id,cluster_id,cluster_size\n";
  for (size_t i = 0; i < node_ids.size(); ++i)
    out << node_ids[i] << "," << labels[i] << "," << sizes[static_cast<size_t>(labels[i])] << "\n";
}

std::vector<int> read_clusters_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "read_clusters_csv: cannot open '" + path + "'");
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "read_clusters_csv: empty file");
  std::vector<int> labels;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const size_t first = line.find(',');
    require(first != std::string::npos, "read_clusters_csv: malformed row");
    const size_t second = line.find(',', first + 1);
    const std::string label = second == std::string::npos ? line.substr(first + 1)
                                                          : line.substr(first + 1, second - first - 1);
    labels.push_back(std::atoi(label.c_str()));
  }
  require(!labels.empty(), "read_clusters_csv: no data rows");
  return labels;
}

void write_radius_table_csv(const std::string& path, const std::vector<RadiusFitEntry>& table) {
  std::ofstream out(path);
  require(out.good(), "write_radius_table_csv: cannot write '" + path + "'");
  out << "radius,n_clusters,elbo\n";
  for (const auto& e : table)
    out << format_scalar(e.radius) << "," << e.n_clusters << "," << format_scalar(e.elbo) << "\n";
}

void write_sweep_csv(const std::string& path, const std::vector<SweepEntry>& sweep) {
  std::ofstream out(path);
  require(out.good(), "write_sweep_csv: cannot write '" + path + "'");
  out << "radius,n_clusters\n";
  for (const auto& e : sweep)
    out << format_scalar(e.radius) << "," << e.num_clusters << "\n";
}

void write_coefficients(const std::string& csv_path, const std::string& sidecar_path,
                        const SplineBasis& basis, const Coefficients& coeffs) {
  const ParamLayout& layout = coeffs.layout();
  std::ofstream out(csv_path);
  require(out.good(), "write_coefficients: cannot write '" + csv_path + "'");
  for (int i = 0; i < layout.p; ++i) {
    const ConstBlockMap block = coeffs.node(i);
    for (int k = 0; k < layout.m; ++k) {
      for (int c = 0; c < layout.d; ++c)
        out << (c > 0 ? "," : "") << format_scalar(block(k, c));
      out << "\n";
    }
  }
  for (int k = 0; k < layout.m && layout.q > 0; ++k) {
    for (int l = 0; l < layout.q; ++l)
      out << (l > 0 ? "," : "") << format_scalar(coeffs.beta()(k, l));
    out << "\n";
  }
  if (layout.propensities)
    for (int i = 0; i < layout.p; ++i) out << format_scalar(coeffs.propensity(i)) << "\n";

  json sidecar;
  sidecar["p"] = layout.p;
  sidecar["m"] = layout.m;
  sidecar["d"] = layout.d;
  sidecar["q"] = layout.q;
  sidecar["propensities"] = layout.propensities;
  sidecar["T"] = basis.horizon();
  sidecar["knots"] = basis.knots();
  std::ofstream side(sidecar_path);
  require(side.good(), "write_coefficients: cannot write '" + sidecar_path + "'");
  side << sidecar.dump(1) << "\n";
}

Coefficients read_coefficients(const std::string& csv_path, const std::string& sidecar_path,
                               Scalar* horizon_out) {
  std::ifstream side(sidecar_path);
  require(side.good(), "read_coefficients: cannot open '" + sidecar_path + "'");
  json sidecar;
  side >> sidecar;
  ParamLayout layout;
  layout.p = sidecar.at("p").get<int>();
  layout.m = sidecar.at("m").get<int>();
  layout.d = sidecar.at("d").get<int>();
  layout.q = sidecar.at("q").get<int>();
  layout.propensities = sidecar.value("propensities", false);
  if (horizon_out != nullptr) *horizon_out = sidecar.at("T").get<Scalar>();

  std::ifstream in(csv_path);
  require(in.good(), "read_coefficients: cannot open '" + csv_path + "'");
  Coefficients coeffs(layout);
  std::string line;
  auto next_row = [&](int width, Scalar* dest) {
    require(static_cast<bool>(std::getline(in, line)), "read_coefficients: truncated file");
    std::stringstream ss(line);
    std::string field;
    for (int c = 0; c < width; ++c) {
      require(static_cast<bool>(std::getline(ss, field, ',')),
              "read_coefficients: short row");
      dest[c] = std::strtod(field.c_str(), nullptr);
    }
  };
  std::vector<Scalar> row(static_cast<size_t>(std::max(layout.d, std::max(layout.q, 1))));
  for (int i = 0; i < layout.p; ++i) {
    BlockMap block = coeffs.node(i);
    for (int k = 0; k < layout.m; ++k) {
      next_row(layout.d, row.data());
      for (int c = 0; c < layout.d; ++c) block(k, c) = row[static_cast<size_t>(c)];
    }
  }
  for (int k = 0; k < layout.m && layout.q > 0; ++k) {
    next_row(layout.q, row.data());
    for (int l = 0; l < layout.q; ++l) coeffs.beta()(k, l) = row[static_cast<size_t>(l)];
  }
  if (layout.propensities)
    for (int i = 0; i < layout.p; ++i) {
      next_row(1, row.data());
      coeffs.propensity(i) = row[0];
    }
  return coeffs;
}

namespace {

json nested_to_json(const NestedNode& node, const std::vector<std::string>& node_ids,
                    const std::vector<int>& global_index) {
  json j;
  j["cluster_id"] = node.cluster_id;
  json ids = json::array();
  std::vector<int> child_global(node.nodes.size());
  for (size_t k = 0; k < node.nodes.size(); ++k) {
    const int global = global_index.empty() ? node.nodes[k]
                                            : global_index[static_cast<size_t>(node.nodes[k])];
    child_global[k] = global;
    ids.push_back(node_ids[static_cast<size_t>(global)]);
  }
  j["nodes"] = std::move(ids);
  j["refit"] = node.refit;
  if (!node.note.empty()) j["note"] = node.note;
  if (node.refit) {
    j["radius"] = node.radius;
    j["n_clusters"] = node.n_clusters;
    j["labels"] = node.labels;
  }
  json children = json::array();
  for (const auto& child : node.children)
    children.push_back(nested_to_json(child, node_ids, child_global));
  j["children"] = std::move(children);
  return j;
}

}  // namespace

void load_scenario_file(const std::string& path, ScenarioConfig* scenario,
                        ScenarioFitSpec* fit_spec) {
  std::ifstream in(path);
  require(in.good(), "load_scenario_file: cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    fail("load_scenario_file: parse error in '" + path + "': " + e.what());
  }
  ScenarioConfig sc;
  sc.p = j.at("p").get<int>();
  sc.d = j.value("d", 2);
  sc.m = j.value("m", 8);
  sc.horizon = j.value("horizon", 1.0);
  sc.num_intervals = j.value("intervals", 10);
  const std::string regime = j.value("regime", std::string("dense"));
  require(regime == "dense" || regime == "sparse",
          "load_scenario_file: regime must be dense or sparse");
  sc.regime = regime == "dense" ? SparsityRegime::Dense : SparsityRegime::Sparse;
  sc.rate_offset = j.value("rate_offset", 0.0);
  sc.replicates = j.value("replicates", 10);
  sc.seed = j.value("seed", static_cast<uint64_t>(7));
  require(j.contains("clusters") && j.at("clusters").is_array(),
          "load_scenario_file: need a clusters array");
  for (const auto& cj : j.at("clusters")) {
    ClusterSpec spec;
    const auto center = cj.at("center").get<std::vector<Scalar>>();
    require(static_cast<int>(center.size()) == sc.d,
            "load_scenario_file: center dimension mismatch");
    spec.center = Eigen::Map<const Vector>(center.data(), sc.d);
    spec.count = cj.at("count").get<int>();
    spec.noise = cj.value("noise", 0.05);
    spec.curvature = cj.value("curvature", 0.0);
    sc.clusters.push_back(std::move(spec));
  }
  ScenarioFitSpec fit;
  if (j.contains("fit")) {
    const json& fj = j.at("fit");
    fit.dim = fj.value("dim", fit.dim);
    fit.basis = fj.value("basis", fit.basis);
    fit.max_iters = fj.value("max_iters", fit.max_iters);
    fit.lr = fj.value("lr", fit.lr);
    fit.clustering = fj.value("clustering", fit.clustering);
    fit.batch_size = fj.value("batch_size", fit.batch_size);
    fit.grid_points = fj.value("grid", fit.grid_points);
    if (fj.contains("mode")) {
      const std::string mode = fj.at("mode").get<std::string>();
      if (mode == "dense") fit.mode = BatchMode::DenseDiscrete;
      else if (mode == "cc-discrete") fit.mode = BatchMode::CcDiscrete;
      else if (mode == "cc-partial") fit.mode = BatchMode::CcPartial;
      else fail("load_scenario_file: unknown fit mode '" + mode + "'");
    }
  }
  sc.validate();
  *scenario = std::move(sc);
  *fit_spec = fit;
}

void write_hierarchy_json(const std::string& path, const NestedNode& root,
                          const std::vector<std::string>& node_ids) {
  std::ofstream out(path);
  require(out.good(), "write_hierarchy_json: cannot write '" + path + "'");
  out << nested_to_json(root, node_ids, {}).dump(1) << "\n";
}

}  // namespace latnet
