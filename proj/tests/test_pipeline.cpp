#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "thinobs/pipeline.hpp"

using namespace thinobs;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("thinobs_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("sha256") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("solve and monitor on laplace-exact") {
  ExperimentConfig c;
  c.scenario.nodes = 65;
  c.stages = {"monitor"};
  const auto out = scratch("monitor");
  const RunManifest m = run(c, {out, true});
  REQUIRE(m.stages.size() == 2u);
  CHECK(m.stages[0].name == "solve");
  CHECK(m.stages[1].name == "monitor");
  CHECK(m.passed());

  std::ifstream in(out / "profile.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "r,H,D,I,G,psi,sigma,M,J,N,Ntilde,W");
  int checked = 0;
  while (std::getline(in, line)) {
    std::vector<double> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(std::stod(cell));
    REQUIRE(cols.size() == 12u);
    if (cols[0] >= 0.1 && cols[0] <= 0.5) {
      CHECK(cols[10] == doctest::Approx(1.5).epsilon(0.05));
      ++checked;
    }
  }
  CHECK(checked > 5);

  // Every emitted file is listed with its checksum.
  const nlohmann::json man = nlohmann::json::parse(slurp(out / "manifest.json"));
  for (const auto& f : man["files"])
    CHECK(f["sha256"] == sha256_file(out / f["name"].get<std::string>()));
  CHECK(man["files"].size() == 2u);
  std::filesystem::remove_all(out);
}

TEST_CASE("deterministic reruns are byte-identical") {
  ExperimentConfig c;
  c.scenario.name = "lipschitz-perturbed";
  c.scenario.nodes = 65;
  c.epi.nodes = 33;
  c.epi.count = 2;
  c.epi.bumps = 2;
  c.stages = {"monitor", "fb", "epi"};
  const auto a = scratch("det_a"), b = scratch("det_b");
  const RunManifest ma = run(c, {a, true});
  const RunManifest mb = run(c, {b, true});
  CHECK(ma.config_hash == mb.config_hash);
  REQUIRE(ma.files.size() == mb.files.size());
  for (std::size_t k = 0; k < ma.files.size(); ++k) {
    if (ma.files[k].name == "summary.json") continue;  // holds stage timings
    CHECK(ma.files[k].name == mb.files[k].name);
    CHECK(ma.files[k].sha256 == mb.files[k].sha256);
  }
  for (const char* f : {"profile.csv", "gamma_points.csv", "epi_batch.csv"})
    CHECK(std::filesystem::exists(a / f));
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
}

TEST_CASE("invalid configs fail before any output") {
  ExperimentConfig c;
  c.scenario.name = "no-such-scenario";
  const auto out = scratch("invalid");
  CHECK_THROWS_AS(run(c, {out, true}), std::invalid_argument);
  CHECK_FALSE(std::filesystem::exists(out));
}

TEST_CASE("stage failures are recorded") {
  // A sweep budget of one cannot converge: the solve stage records the error
  // and the dependent stage is marked failed.
  ExperimentConfig c;
  c.scenario.nodes = 65;
  c.solver.max_sweeps = 1;
  c.stages = {"monitor"};
  const auto out = scratch("failure");
  const RunManifest m = run(c, {out, true});
  CHECK_FALSE(m.passed());
  REQUIRE(m.stages.size() == 2u);
  CHECK_FALSE(m.stages[0].error.empty());
  CHECK(m.stages[1].error.find("solve") != std::string::npos);
  const nlohmann::json summary = nlohmann::json::parse(slurp(out / "summary.json"));
  CHECK(summary["stages"]["solve"].contains("error"));
  CHECK(std::filesystem::exists(out / "manifest.json"));
  std::filesystem::remove_all(out);
}

TEST_CASE("solved scenarios") {
  const SolvedScenario s = solve_scenario({"nonzero-obstacle", 2, 65}, SolverParams{1.9});
  CHECK(s.u.residual.passed());
  REQUIRE(s.center_node.has_value());
  CHECK(s.center == nearest_gamma(s.chart, {0.0, 0.0, 0.0}).x);
  CHECK(s.v.source_bound > 0.0);
  CHECK_FALSE(s.l2_error.has_value());

  const SolvedScenario e = solve_scenario({"laplace-exact", 2, 65}, SolverParams{1.9});
  REQUIRE(e.l2_error.has_value());
  CHECK(*e.l2_error <= 0.03);
}
