#pragma once

#include <optional>
#include <string>
#include <vector>

#include "thinobs/reference.hpp"
#include "thinobs/solver.hpp"

namespace thinobs {

struct ScenarioParams {
  std::string name = "laplace-exact";
  int dim = 2;
  int nodes = 129;
  double epsilon = 0.1;       // coefficient perturbation size
  double kappa = 0.25;        // obstacle height
  double rotation_deg = 0.0;  // free boundary direction in three dimensions
};

struct Scenario {
  std::string name;
  ProblemSpec spec;
  /// False when the field is sampled from a closed form instead of solved.
  bool solved = true;
  ScalarFn closed_form;
  /// Blowup at the origin when known in closed form.
  std::optional<FamilyMember> truth;
  /// Exact frequency at the origin when known.
  std::optional<double> frequency;
};

std::vector<std::string> scenario_names();

/// Throws std::invalid_argument on an unknown name or a dimension the
/// scenario does not support.
Scenario make_scenario(const ScenarioParams& params);

/// x_1^2 - x_n^2: harmonic, even in x_n, vanishing to order 2 at the origin.
double frequency_two(const Vec& x, int dim);

}  // namespace thinobs
