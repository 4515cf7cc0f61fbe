#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace thinobs {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct AcceptanceOptions {
  /// Quick mode: n=2 at N=65 (33 for the convergence pair) and n=3 at N=33.
  bool quick = false;
  /// Multiplies every tolerance; values below 1 tighten the suite.
  double tolerance_scale = 1.0;
  /// Criterion ids to run; empty runs all eleven.
  std::vector<int> only;
};

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options);

/// "PASS  3 weiss-vanishing: detail" style line.
std::string format_line(const CriterionResult& result);

nlohmann::json to_json(const std::vector<CriterionResult>& results);

}  // namespace thinobs
