#include "thinobs/config.hpp"

#include <fstream>
#include <set>

namespace thinobs {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::string& where, const std::set<std::string>& keys) {
  if (!j.is_object()) throw std::invalid_argument("config: '" + where + "' must be an object");
  for (const auto& [k, _] : j.items())
    if (!keys.count(k)) throw std::invalid_argument("config: unknown key '" + where + "." + k + "'");
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument("config: bad type for '" + where + "." + key + "'");
  }
}

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument("config: " + message);
}

std::string to_string(SweepOrder o) { return o == SweepOrder::red_black ? "red_black" : "lexicographic"; }
std::string to_string(InitialGuess g) { return g == InitialGuess::zero ? "zero" : "boundary_extension"; }

}  // namespace

std::vector<std::string> stage_names() { return {"solve", "monitor", "blowup", "epi", "fb"}; }

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  reject_unknown(j, "", {"scenario", "grid", "solver", "monitor", "epi", "fb", "stages", "output"});
  if (j.contains("scenario")) {
    const json& s = j["scenario"];
    reject_unknown(s, "scenario", {"name", "epsilon", "kappa", "rotation_deg"});
    read(s, "name", c.scenario.name, "scenario");
    read(s, "epsilon", c.scenario.epsilon, "scenario");
    read(s, "kappa", c.scenario.kappa, "scenario");
    read(s, "rotation_deg", c.scenario.rotation_deg, "scenario");
  }
  if (j.contains("grid")) {
    const json& g = j["grid"];
    reject_unknown(g, "grid", {"dim", "nodes"});
    read(g, "dim", c.scenario.dim, "grid");
    read(g, "nodes", c.scenario.nodes, "grid");
  }
  if (j.contains("solver")) {
    const json& s = j["solver"];
    reject_unknown(s, "solver",
                   {"omega", "max_sweeps", "energy_tol", "update_tol", "tol_c", "order", "initial"});
    read(s, "omega", c.solver.omega, "solver");
    read(s, "max_sweeps", c.solver.max_sweeps, "solver");
    read(s, "energy_tol", c.solver.energy_tol, "solver");
    read(s, "update_tol", c.solver.update_tol, "solver");
    read(s, "tol_c", c.solver.tol_c, "solver");
    std::string order = to_string(c.solver.order), initial = to_string(c.solver.initial);
    read(s, "order", order, "solver");
    read(s, "initial", initial, "solver");
    require(order == "red_black" || order == "lexicographic",
            "solver.order must be 'red_black' or 'lexicographic'");
    require(initial == "zero" || initial == "boundary_extension",
            "solver.initial must be 'zero' or 'boundary_extension'");
    c.solver.order = order == "red_black" ? SweepOrder::red_black : SweepOrder::lexicographic;
    c.solver.initial = initial == "zero" ? InitialGuess::zero : InitialGuess::boundary_extension;
  }
  if (j.contains("monitor")) {
    const json& m = j["monitor"];
    reject_unknown(m, "monitor",
                   {"delta", "k_prime", "r_max", "ratio", "r_min_factor", "sphere_resolution"});
    read(m, "delta", c.monitor.delta, "monitor");
    read(m, "k_prime", c.monitor.k_prime, "monitor");
    read(m, "r_max", c.monitor.r_max, "monitor");
    read(m, "ratio", c.monitor.ratio, "monitor");
    read(m, "r_min_factor", c.monitor.r_min_factor, "monitor");
    read(m, "sphere_resolution", c.monitor.sphere_resolution, "monitor");
  }
  if (j.contains("epi")) {
    const json& e = j["epi"];
    reject_unknown(e, "epi",
                   {"count", "seed", "theta", "distance_min", "nodes", "bumps", "max_attempts"});
    read(e, "count", c.epi.count, "epi");
    read(e, "seed", c.epi.seed, "epi");
    read(e, "theta", c.epi.theta, "epi");
    read(e, "distance_min", c.epi.distance_min, "epi");
    read(e, "nodes", c.epi.nodes, "epi");
    read(e, "bumps", c.epi.bumps, "epi");
    read(e, "max_attempts", c.epi.max_attempts, "epi");
  }
  if (j.contains("fb")) {
    const json& f = j["fb"];
    reject_unknown(f, "fb", {"epsilon", "cone_radius", "points", "window"});
    read(f, "epsilon", c.fb.epsilon, "fb");
    read(f, "cone_radius", c.fb.cone_radius, "fb");
    read(f, "points", c.fb.points, "fb");
    read(f, "window", c.fb.window, "fb");
  }
  read(j, "stages", c.stages, "");
  read(j, "output", c.output, "");
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  const auto names = scenario_names();
  require(std::find(names.begin(), names.end(), scenario.name) != names.end(),
          "unknown scenario '" + scenario.name + "'");
  require(scenario.dim == 2 || scenario.dim == 3, "grid.dim must be 2 or 3");
  require(scenario.nodes >= 9 && scenario.nodes % 2 == 1, "grid.nodes must be odd and >= 9");
  require(scenario.epsilon >= 0.0 && scenario.epsilon * std::sqrt(3.0) < 1.0,
          "scenario.epsilon must lie in [0, 1/sqrt(3))");
  require(scenario.kappa >= 0.0, "scenario.kappa must be nonnegative");
  try {
    solver.check();
    (void)monitor.ladder(Grid::build(scenario.name == "laplace-exact-3d" ? 3 : scenario.dim,
                                     scenario.nodes));
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  require(epi.count >= 1 && epi.max_attempts >= epi.count, "epi.count must be in [1, max_attempts]");
  require(epi.theta > 0.0 && epi.distance_min > 0.0 && epi.distance_min <= epi.theta,
          "epi needs 0 < distance_min <= theta");
  require(epi.nodes >= 9 && epi.nodes % 2 == 1, "epi.nodes must be odd and >= 9");
  require(epi.bumps >= 0, "epi.bumps must be nonnegative");
  require(fb.epsilon > 0.0 && fb.epsilon < 1.0, "fb.epsilon must lie in (0, 1)");
  require(fb.cone_radius > 0.0 && fb.window > 0.0 && fb.window < 1.0,
          "fb.cone_radius and fb.window must be positive, window < 1");
  require(fb.points >= 1, "fb.points must be positive");
  const auto known = stage_names();
  require(!stages.empty(), "stages must not be empty");
  for (const std::string& s : stages)
    require(std::find(known.begin(), known.end(), s) != known.end(), "unknown stage '" + s + "'");
  require(!output.empty(), "output must not be empty");
}

json ExperimentConfig::to_json() const {
  return json{
      {"scenario",
       {{"name", scenario.name},
        {"epsilon", scenario.epsilon},
        {"kappa", scenario.kappa},
        {"rotation_deg", scenario.rotation_deg}}},
      {"grid", {{"dim", scenario.dim}, {"nodes", scenario.nodes}}},
      {"solver",
       {{"omega", solver.omega},
        {"max_sweeps", solver.max_sweeps},
        {"energy_tol", solver.energy_tol},
        {"update_tol", solver.update_tol},
        {"tol_c", solver.tol_c},
        {"order", to_string(solver.order)},
        {"initial", to_string(solver.initial)}}},
      {"monitor",
       {{"delta", monitor.delta},
        {"k_prime", monitor.k_prime},
        {"r_max", monitor.r_max},
        {"ratio", monitor.ratio},
        {"r_min_factor", monitor.r_min_factor},
        {"sphere_resolution", monitor.sphere_resolution}}},
      {"epi",
       {{"count", epi.count},
        {"seed", epi.seed},
        {"theta", epi.theta},
        {"distance_min", epi.distance_min},
        {"nodes", epi.nodes},
        {"bumps", epi.bumps},
        {"max_attempts", epi.max_attempts}}},
      {"fb",
       {{"epsilon", fb.epsilon},
        {"cone_radius", fb.cone_radius},
        {"points", fb.points},
        {"window", fb.window}}},
      {"stages", stages},
      {"output", output}};
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot read " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  return ExperimentConfig::from_json(j);
}

}  // namespace thinobs
