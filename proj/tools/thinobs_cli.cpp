#include <omp.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "thinobs/acceptance.hpp"
#include "thinobs/config.hpp"
#include "thinobs/pipeline.hpp"

namespace {

struct Common {
  std::string config;
  std::string out;
  std::string scenario;
  int nodes = 0;
  int threads = 0;
  bool deterministic = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "experiment config (JSON)")->check(CLI::ExistingFile);
  app->add_option("--out", c.out, "output directory (overrides the config)");
  app->add_option("--scenario", c.scenario, "scenario name (overrides the config)");
  app->add_option("--nodes", c.nodes, "grid nodes per axis (overrides the config)");
  app->add_option("--threads", c.threads, "cap on worker threads")->check(CLI::PositiveNumber);
  app->add_flag("--deterministic", c.deterministic, "sequential reductions, one thread");
}

thinobs::ExperimentConfig load(const Common& c) {
  thinobs::ExperimentConfig cfg;
  if (!c.config.empty()) cfg = thinobs::load_config(c.config);
  if (!c.scenario.empty()) {
    cfg.scenario.name = c.scenario;
    if (c.scenario == "laplace-exact-3d") cfg.scenario.dim = 3;
  }
  if (c.nodes > 0) cfg.scenario.nodes = c.nodes;
  cfg.validate();
  return cfg;
}

int run_stages(const Common& c, const std::vector<std::string>& stages) {
  thinobs::ExperimentConfig cfg = load(c);
  if (!stages.empty()) cfg.stages = stages;
  if (c.threads > 0) omp_set_num_threads(c.threads);
  thinobs::RunOptions opt;
  if (!c.out.empty()) opt.out = c.out;
  opt.deterministic = c.deterministic;
  const thinobs::RunManifest m = thinobs::run(cfg, opt);
  for (const auto& s : m.stages) {
    std::cout << (s.ran && s.checks_passed ? "PASS  " : "FAIL  ") << s.name << " ("
              << s.seconds << " s)";
    if (!s.error.empty()) std::cout << ": " << s.error;
    std::cout << '\n';
  }
  std::cout << "outputs in " << (opt.out.empty() ? cfg.output : opt.out.string()) << '\n';
  return m.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"thin obstacle problem experiments"};
  app.require_subcommand(1);

  Common common;
  const std::vector<std::pair<std::string, std::string>> stage_cmds{
      {"solve", "solve the scenario and extract its free boundary"},
      {"monitor", "radial monitors, identity and monotonicity audits"},
      {"blowup", "classification and blowup limit at the centre"},
      {"epi", "epiperimetric batch and first-variation check"},
      {"fb", "free boundary classification, cones, graph and Holder fits"},
      {"all", "every stage"}};
  for (const auto& [name, help] : stage_cmds) add_common(app.add_subcommand(name, help), common);

  thinobs::AcceptanceOptions acc;
  std::string report;
  int verify_threads = 0;
  CLI::App* verify = app.add_subcommand("verify", "run the acceptance suite");
  verify->add_flag("--quick", acc.quick, "reduced grids (smoke run)");
  verify->add_option("--only", acc.only, "criterion ids to run")->check(CLI::Range(1, 11));
  verify->add_option("--tolerance-scale", acc.tolerance_scale, "multiplies every tolerance")
      ->check(CLI::PositiveNumber);
  verify->add_option("--out", report, "directory for acceptance.json");
  verify->add_option("--threads", verify_threads, "cap on worker threads")
      ->check(CLI::PositiveNumber);

  app.add_subcommand("defaults", "print the default config");

  CLI11_PARSE(app, argc, argv);

  try {
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "defaults") {
      std::cout << thinobs::ExperimentConfig{}.to_json().dump(2) << '\n';
      return 0;
    }
    if (name == "verify") {
      if (verify_threads > 0) omp_set_num_threads(verify_threads);
      const auto results = thinobs::run_acceptance(acc);
      bool ok = true;
      for (const auto& r : results) {
        std::cout << thinobs::format_line(r) << '\n';
        ok = ok && r.passed;
      }
      if (!report.empty()) {
        std::filesystem::create_directories(report);
        std::ofstream(std::filesystem::path(report) / "acceptance.json")
            << thinobs::to_json(results).dump(2) << '\n';
      }
      return ok ? 0 : 1;
    }
    if (name == "all") return run_stages(common, thinobs::stage_names());
    return run_stages(common, {name});
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
