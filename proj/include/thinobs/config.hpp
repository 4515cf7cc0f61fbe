#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "thinobs/epiperimetric.hpp"
#include "thinobs/monitors.hpp"
#include "thinobs/scenarios.hpp"
#include "thinobs/solver.hpp"

namespace thinobs {

struct EpiConfig {
  int count = 20;
  std::uint64_t seed = 7;
  double theta = 0.1;
  double distance_min = 0.06;
  int nodes = 129;
  int bumps = 10;
  int max_attempts = 400;
};

struct FreeBoundaryConfig {
  double epsilon = 0.5;      // cone opening
  double cone_radius = 0.2;
  int points = 10;           // free boundary points classified
  double window = 0.3;       // points are drawn from the thin ball of this radius
};

/// One experiment. Parsing rejects unknown keys and validates ranges before
/// any computation.
struct ExperimentConfig {
  ScenarioParams scenario;
  SolverParams solver{1.9};
  MonitorParams monitor;
  EpiConfig epi;
  FreeBoundaryConfig fb;
  std::vector<std::string> stages{"solve", "monitor", "blowup", "epi", "fb"};
  std::string output = "out";

  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  /// Throws std::invalid_argument on the first violated constraint.
  void validate() const;
};

/// Throws std::invalid_argument for unreadable files or schema errors.
ExperimentConfig load_config(const std::filesystem::path& path);

std::vector<std::string> stage_names();

}  // namespace thinobs
