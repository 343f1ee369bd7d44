#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "latnet/io.hpp"
#include "latnet/simkit.hpp"
#include "support/test_support.hpp"

using namespace latnet;
using namespace latnet::testing;

namespace {

std::string temp_file(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("checkpoints round trip exactly") {
  Rng rng(311);
  Checkpoint checkpoint;
  checkpoint.horizon = 2.5;
  checkpoint.layout = ParamLayout{4, 5, 2, 0, true};
  checkpoint.similarity.kind = SimilarityConfig::Kind::InnerProduct;
  checkpoint.similarity.lambda = 0.75;
  checkpoint.node_ids = {"a", "b", "c", "d"};
  checkpoint.static_flags = {false, true, false, false};
  checkpoint.mu = rng.normal_vector(checkpoint.layout.size() + 2);
  checkpoint.rho = rng.normal_vector(checkpoint.layout.size() + 2);
  checkpoint.has_clusters = true;
  checkpoint.radius = 0.375;
  checkpoint.labels = {0, 0, 1, 1};
  checkpoint.alpha_plus = rng.normal_vector(checkpoint.layout.size());

  const std::string path = temp_file("latnet_checkpoint.json");
  save_checkpoint(checkpoint, path);
  const Checkpoint loaded = load_checkpoint(path);
  CHECK(loaded.horizon == checkpoint.horizon);
  CHECK(loaded.layout == checkpoint.layout);
  CHECK(loaded.similarity.kind == checkpoint.similarity.kind);
  CHECK(loaded.similarity.lambda == checkpoint.similarity.lambda);
  CHECK(loaded.node_ids == checkpoint.node_ids);
  CHECK(loaded.static_flags == checkpoint.static_flags);
  CHECK((loaded.mu - checkpoint.mu).norm() == 0.0);
  CHECK((loaded.rho - checkpoint.rho).norm() == 0.0);
  CHECK(loaded.labels == checkpoint.labels);
  CHECK((loaded.alpha_plus - checkpoint.alpha_plus).norm() == 0.0);

  CHECK_THROWS_AS(load_checkpoint("/nonexistent/checkpoint.json"), Error);
}

TEST_CASE("coefficient export round trips through CSV plus sidecar") {
  Rng rng(313);
  ParamLayout layout{3, 5, 2, 2, true};
  const Coefficients coeffs = random_coefficients(layout, rng);
  const SplineBasis basis(5, 3.0);
  const std::string csv = temp_file("latnet_coeffs.csv");
  const std::string sidecar = temp_file("latnet_coeffs.json");
  write_coefficients(csv, sidecar, basis, coeffs);
  Scalar horizon = 0.0;
  const Coefficients loaded = read_coefficients(csv, sidecar, &horizon);
  CHECK(horizon == 3.0);
  CHECK(loaded.layout() == layout);
  CHECK((loaded.flat() - coeffs.flat()).norm() == 0.0);
}

TEST_CASE("trajectory files round trip") {
  Rng rng(317);
  ParamLayout layout{3, 4, 2, 0, false};
  const Coefficients coeffs = random_coefficients(layout, rng);
  const SplineBasis basis(4, 1.0);
  const std::string path = temp_file("latnet_traj.csv");
  write_trajectories_csv(path, {"x", "y", "z"}, basis, coeffs, 7);
  const TrajectoryFile loaded = read_trajectories_csv(path);
  CHECK(loaded.node_ids == std::vector<std::string>{"x", "y", "z"});
  CHECK(loaded.points.rows() == 21);
  CHECK(loaded.points.cols() == 2);
  const Matrix grid = trajectory_grid(basis, coeffs, 7);
  CHECK((loaded.points - grid).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cluster files round trip with sizes") {
  const std::string path = temp_file("latnet_clusters.csv");
  write_clusters_csv(path, {"a", "b", "c"}, {1, 0, 1});
  const std::vector<int> labels = read_clusters_csv(path);
  CHECK(labels == std::vector<int>{1, 0, 1});
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "node_id,cluster_id,cluster_size");
  std::getline(in, line);
  CHECK(line == "a,1,2");
}

TEST_CASE("hierarchy export nests cluster trees") {
  NestedNode root;
  root.cluster_id = -1;
  root.nodes = {0, 1, 2};
  root.refit = true;
  root.radius = 0.5;
  root.n_clusters = 2;
  root.labels = {0, 0, 1};
  NestedNode child;
  child.cluster_id = 0;
  child.nodes = {0, 1};
  child.note = "left untouched: below min size";
  root.children.push_back(std::move(child));

  const std::string path = temp_file("latnet_hierarchy.json");
  write_hierarchy_json(path, root, {"n0", "n1", "n2"});
  std::ifstream in(path);
  std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(body.find("\"n2\"") != std::string::npos);
  CHECK(body.find("below min size") != std::string::npos);
  CHECK(body.find("\"children\"") != std::string::npos);
}
