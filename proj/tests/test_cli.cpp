#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "latnet/common.hpp"
#include "latnet/simkit.hpp"

using namespace latnet;

namespace {

namespace fs = std::filesystem;

const std::string kCli = LATNET_CLI_PATH;

int run(const std::string& args) {
  const std::string command = kCli + " " + args + " >/dev/null 2>/dev/null";
  const int status = std::system(command.c_str());
  return WEXITSTATUS(status);
}

std::string run_capture(const std::string& args) {
  const std::string out_path = (fs::temp_directory_path() / "latnet_cli_stdout.txt").string();
  const std::string command = kCli + " " + args + " >" + out_path + " 2>/dev/null";
  const int status = std::system(command.c_str());
  (void)status;
  std::ifstream in(out_path);
  std::stringstream body;
  body << in.rdbuf();
  return body.str();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream body;
  body << in.rdbuf();
  return body.str();
}

// small two-blob continuous stream written as a TSV fixture
std::string write_fixture(const fs::path& dir) {
  fs::create_directories(dir);
  Rng rng(401);
  ScenarioConfig scenario;
  scenario.p = 16;
  scenario.d = 2;
  scenario.m = 6;
  scenario.num_intervals = 8;
  scenario.regime = SparsityRegime::Sparse;
  scenario.rate_offset = 0.5;
  Vector c1(2), c2(2);
  c1 << 1.5, 0.5;
  c2 << -1.5, -0.5;
  scenario.clusters = {{c1, 8, 0.05, 0.0}, {c2, 8, 0.05, 0.0}};
  const SyntheticData data = generate(scenario, rng);
  const auto& events = std::get<ContinuousEvents>(data.events);
  const std::string path = (dir / "toy.tsv").string();
  std::ofstream out(path);
  out << "src\tdst\ttime\n";
  char buf[64];
  for (const auto& e : events.records()) {
    std::snprintf(buf, sizeof(buf), "%.17g", e.time);
    out << "n" << e.src << "\t" << "n" << e.dst << "\t" << buf << "\n";
  }
  return path;
}

}  // namespace

TEST_CASE("cli: minimal fit run produces every output") {
  const fs::path dir = fs::temp_directory_path() / "latnet_cli_fit";
  fs::remove_all(dir);
  const std::string input = write_fixture(dir);
  const std::string out = (dir / "run1").string();
  const int code = run("fit --input " + input + " --max-iters 250 --patience 250 --basis 4 " +
                       "--auto-radii 2 --seed 5 --threads 1 --progress-every 0 --out " + out);
  CHECK(code == 0);
  CHECK(fs::exists(out + "/checkpoint.json"));
  CHECK(fs::exists(out + "/trajectories.csv"));
  CHECK(fs::exists(out + "/clusters.csv"));
  CHECK(fs::exists(out + "/elbo_trace.csv"));
  CHECK(fs::exists(out + "/manifest.json"));
  CHECK(fs::exists(out + "/radius_table.csv"));

  std::ifstream trace(out + "/elbo_trace.csv");
  std::string header;
  std::getline(trace, header);
  CHECK(header == "iter,loglik,p_smooth,p_clust,elbo");
}

TEST_CASE("cli: rerun from the manifest reproduces trajectories byte for byte") {
  const fs::path dir = fs::temp_directory_path() / "latnet_cli_repro";
  fs::remove_all(dir);
  const std::string input = write_fixture(dir);
  const std::string out1 = (dir / "a").string();
  const std::string out2 = (dir / "b").string();
  REQUIRE(run("fit --input " + input + " --max-iters 200 --patience 200 --basis 4 " +
              "--auto-radii 2 --seed 11 --threads 1 --progress-every 0 --out " + out1) == 0);
  REQUIRE(run("fit --config " + out1 + "/manifest.json --out " + out2 +
              " --progress-every 0") == 0);
  const std::string first = slurp(out1 + "/trajectories.csv");
  const std::string second = slurp(out2 + "/trajectories.csv");
  REQUIRE(!first.empty());
  CHECK(first == second);
}

TEST_CASE("cli: contradictory flags exit with code 2") {
  const fs::path dir = fs::temp_directory_path() / "latnet_cli_flags";
  fs::remove_all(dir);
  const std::string input = write_fixture(dir);
  CHECK(run("fit --input " + input + " --format discrete --mode cc-partial") == 2);
  CHECK(run("fit --input " + input + " --mode dense") == 2);  // needs --intervals
  CHECK(run("fit --input " + input + " --unit-norm") == 2);   // needs inner similarity
  CHECK(run("fit") == 2);                                     // missing --input
  CHECK(run("simulate --experiment nonsense") == 2);
  CHECK(run("nonsense") == 2);
}

TEST_CASE("cli: missing input file exits with code 1") {
  CHECK(run("fit --input /nonexistent/events.tsv --progress-every 0") == 1);
}

TEST_CASE("cli: eval scores trajectories and labels") {
  const fs::path dir = fs::temp_directory_path() / "latnet_cli_eval";
  fs::remove_all(dir);
  const std::string input = write_fixture(dir);
  const std::string out = (dir / "fit").string();
  REQUIRE(run("fit --input " + input + " --max-iters 150 --patience 150 --basis 4 " +
              "--no-clustering --seed 3 --threads 1 --progress-every 0 --out " + out) == 0);

  const std::string mse_line = run_capture("eval --estimate " + out + "/trajectories.csv" +
                                           " --truth " + out + "/trajectories.csv");
  CHECK(mse_line.find("mse 0") != std::string::npos);

  const std::string acc_line = run_capture("eval --labels " + out + "/clusters.csv" +
                                           " --true-labels " + out + "/clusters.csv");
  CHECK(acc_line.find("accuracy 1") != std::string::npos);

  // mismatched p exits 2
  const fs::path small = dir / "small.csv";
  {
    std::ofstream f(small);
    f << "node,t,x1,x2\nn0,0,0,0\nn0,1,1,1\n";
  }
  CHECK(run("eval --estimate " + small.string() + " --truth " + out + "/trajectories.csv") == 2);
}

TEST_CASE("cli: cluster and export-trajectories work from a checkpoint") {
  const fs::path dir = fs::temp_directory_path() / "latnet_cli_ckpt";
  fs::remove_all(dir);
  const std::string input = write_fixture(dir);
  const std::string out = (dir / "fit").string();
  REQUIRE(run("fit --input " + input + " --max-iters 150 --patience 150 --basis 4 " +
              "--auto-radii 2 --seed 3 --threads 1 --progress-every 0 --out " + out) == 0);

  const std::string clusters = (dir / "reclustered.csv").string();
  CHECK(run("cluster --checkpoint " + out + "/checkpoint.json --radius 0.5 --out " + clusters) ==
        0);
  CHECK(fs::exists(clusters));

  const std::string sweep = (dir / "sweep.csv").string();
  CHECK(run("cluster --checkpoint " + out + "/checkpoint.json --sweep --radii 0.1 0.5 2.0 " +
            "--out " + sweep) == 0);
  const std::string sweep_body = slurp(sweep);
  CHECK(sweep_body.find("radius,n_clusters") != std::string::npos);

  const std::string exported = (dir / "exported.csv").string();
  CHECK(run("export-trajectories --checkpoint " + out + "/checkpoint.json --grid 50 --out " +
            exported) == 0);
  const std::string traj = slurp(out + "/trajectories.csv");
  CHECK(slurp(exported) == traj);  // same grid size default
}

TEST_CASE("cli: map inference path with both clustering modes") {
  const fs::path dir = fs::temp_directory_path() / "latnet_cli_map";
  fs::remove_all(dir);
  const std::string input = write_fixture(dir);
  const std::string fast = (dir / "fast").string();
  CHECK(run("fit --input " + input + " --inference map --max-iters 200 --patience 200 " +
            "--basis 4 --radii 0.8 --seed 3 --threads 1 --progress-every 0 --out " + fast) == 0);
  CHECK(fs::exists(fast + "/checkpoint.json"));
  const std::string finite = (dir / "finite").string();
  CHECK(run("fit --input " + input + " --inference map --clust-mode minibatch --max-iters 200 " +
            "--patience 200 --basis 4 --radii 0.8 --seed 3 --threads 1 --progress-every 0 " +
            "--out " + finite) == 0);
  CHECK(fs::exists(finite + "/clusters.csv"));
}

TEST_CASE("cli: simulate writes results and summary") {
  const fs::path dir = fs::temp_directory_path() / "latnet_cli_sim";
  fs::remove_all(dir);
  CHECK(run("simulate --experiment vary_p --replicates 1 --p-list 16 --max-iters 120 "
            "--grid 10 --threads 1 --out " +
            (dir / "sim").string()) == 0);
  CHECK(fs::exists(dir / "sim" / "results.csv"));
  CHECK(fs::exists(dir / "sim" / "summary.csv"));
  CHECK(fs::exists(dir / "sim" / "manifest.json"));
}
