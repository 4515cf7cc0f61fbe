#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "thinobs/blowup.hpp"
#include "thinobs/config.hpp"
#include "thinobs/epiperimetric.hpp"
#include "thinobs/freeboundary.hpp"
#include "thinobs/monitors.hpp"
#include "thinobs/scenarios.hpp"

namespace thinobs {

/// A solved scenario, normalized at the coincidence node next to the free
/// boundary point nearest the origin.
struct SolvedScenario {
  Scenario scenario;
  SignoriniSolution u;  // raw solution, or the sampled closed form
  FreeBoundaryChart chart;
  Vec center{0.0, 0.0, 0.0};  // free boundary point nearest the origin; origin when none
  std::optional<std::size_t> center_node;
  SignoriniSolution v;        // normalized solution (u itself without a coincidence node)
  double dn_plus_center = 0.0;
  std::optional<double> l2_error;  // ||u - exact|| / ||exact|| over the grid
  double seconds = 0.0;
};

SolvedScenario solve_scenario(const ScenarioParams& params, const SolverParams& solver);

double relative_l2_error(const GridField& v, const ScalarFn& exact);

struct MonitorStudy {
  Recentered rec;
  RadialProfile profile;
  std::vector<double> identity_residual;
  double n_prefix = 0.5;             // N audited on r <= n_prefix
  MonotonicityReport n_audit;
  double weiss_c = 0.0;              // C^ fitted on the negative part of W
  MonotonicityReport w_audit;        // W + C^ r^{1/2}
  int weiss_bound_violations = 0;    // radii with W < -1.5 C^ r^{1/2} - slack
  double max_interior_residual = 0.0;
};

MonitorStudy monitor_study(const SolvedScenario& s, const MonitorParams& params);

struct BlowupStudy {
  ScalingStack stack;
  std::optional<BlowupLimit> limit;  // only at regular points
  double a_rel_diff = 0.0;           // |a - a_next| / a
  double nu_diff_deg = 0.0;
};

BlowupStudy blowup_study(const SolvedScenario& s, const MonitorParams& params);

struct PointStudy {
  GammaPoint point;
  Vec normal{1.0, 0.0, 0.0};  // A^{-1/2} nu in the original frame
  std::optional<ConeResult> cone;
  std::string error;
};

struct FreeBoundaryStudy {
  std::vector<PointStudy> points;
  std::optional<GraphFit> graph;
  double graph_normal_vs_fit_deg = 0.0;  // fitted graph normal against A^{-1/2} nu
  std::optional<double> graph_normal_vs_truth_deg;
  std::optional<HolderFit> holder;
  std::string note;
  bool separates = true;
  bool openness = true;  // no non-regular point when the centre is regular
  bool nondegenerate = true;
};

/// Classifies up to `fb.points` free boundary points in the thin ball of
/// radius fb.window, spread along the free boundary.
FreeBoundaryStudy free_boundary_study(const SolvedScenario& s, const MonitorParams& params,
                                      const FreeBoundaryConfig& fb);

struct EpiStudy {
  EpiBatch batch;
  std::vector<Bump> bumps;
  std::vector<std::pair<double, double>> variations;
  double worst_variation = 0.0;  // max relative disagreement of the two sides
  double seconds = 0.0;
};

EpiStudy epi_study(int dim, const EpiConfig& epi, const SolverParams& solver);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

struct StageRecord {
  std::string name;
  double seconds = 0.0;
  bool ran = false;
  bool checks_passed = false;
  std::string error;
};

struct FileRecord {
  std::string name;
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  std::string config_hash;
  std::string version;
  std::vector<StageRecord> stages;
  std::vector<FileRecord> files;

  bool passed() const;
  nlohmann::json to_json() const;
};

struct RunOptions {
  std::filesystem::path out;  // empty: config.output
  bool deterministic = false;
};

/// Runs the requested stages (plus the solve they depend on) and writes
/// profile.csv, epi_batch.csv, gamma_points.csv, summary.json and
/// manifest.json. Stage failures are recorded, not thrown.
RunManifest run(const ExperimentConfig& config, const RunOptions& options);

}  // namespace thinobs
