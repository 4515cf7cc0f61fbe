#include "thinobs/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <omp.h>
#include <openssl/evp.h>

#include "thinobs/format.hpp"

namespace thinobs {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

constexpr double kDegree = 180.0 / std::numbers::pi;

Vec thin_unit(const Vec& v, int dim) {
  Vec out{0.0, 0.0, 0.0};
  const double l = norm(v, dim - 1);
  for (int k = 0; k < dim - 1; ++k) out[k] = v[k] / l;
  return out;
}

// A^{-1/2} nu restricted to the thin space, normalized.
Vec original_normal(const Recentered& rec, const Vec& nu, int dim) {
  const Vec m = matvec(matrix_inverse(rec.sqrt_a, dim), nu, dim);
  return thin_unit(m, dim);
}

std::vector<std::size_t> spread_indices(std::size_t count, std::size_t wanted) {
  std::vector<std::size_t> idx;
  if (count <= wanted) {
    for (std::size_t i = 0; i < count; ++i) idx.push_back(i);
    return idx;
  }
  for (std::size_t i = 0; i < wanted; ++i)
    idx.push_back(wanted == 1 ? 0 : (i * (count - 1) + (wanted - 1) / 2) / (wanted - 1));
  return idx;
}

}  // namespace

double relative_l2_error(const GridField& v, const ScalarFn& exact) {
  const Grid& grid = v.grid();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < grid.node_count(); ++i) {
    const double e = exact(grid.position(i));
    num += (v[i] - e) * (v[i] - e);
    den += e * e;
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

SolvedScenario solve_scenario(const ScenarioParams& params, const SolverParams& solver) {
  const auto t0 = Clock::now();
  SolvedScenario out;
  out.scenario = make_scenario(params);
  const Scenario& sc = out.scenario;
  const Grid& grid = sc.spec.grid;
  if (sc.solved) {
    out.u = solve(sc.spec, solver);
  } else {
    out.u.v = GridField::sample(grid, sc.closed_form);
    out.u.v.attach_one_sided_layers();
    const double scale = std::max(out.u.v.max_abs(), 1e-300);
    out.u.residual = residuals(out.u.v, sc.spec.field, 1e-6 * scale, scale);
    out.u.source = sc.spec.source;
  }
  if (sc.closed_form) out.l2_error = relative_l2_error(out.u.v, sc.closed_form);
  out.chart = extract(out.u, sc.spec.obstacle);

  if (!out.chart.gamma.empty()) {
    const GammaPoint& g = nearest_gamma(out.chart, Vec{0.0, 0.0, 0.0});
    const Vec node = grid.position(g.lambda_node);
    out.center = g.x;
    double d = 0.0;
    for (int k = 0; k < grid.dim(); ++k) d += (g.x[k] - node[k]) * (g.x[k] - node[k]);
    if (std::sqrt(d) <= 0.1 * grid.spacing()) out.center = node;
    out.center_node = g.lambda_node;
    out.v = normalize(out.u, sc.spec, node, 1e-6 * std::max(out.u.residual.scale, 1e-12));
  } else {
    out.v = out.u;
    out.v.source = sc.spec.source;
  }
  out.dn_plus_center = gamma_normal_derivative(out.v.v, out.center);
  out.seconds = seconds_since(t0);
  return out;
}

MonitorStudy monitor_study(const SolvedScenario& s, const MonitorParams& params_in) {
  MonitorStudy st;
  const CoefficientField& field = s.scenario.spec.field;
  st.rec = recenter(s.v.v, field, s.v.source, s.center, s.dn_plus_center);
  MonitorParams params = params_in;
  const Grid& grid = s.v.v.grid();
  params.r_max = std::min(params.r_max, st.rec.valid_radius - 2.0 * grid.spacing());
  st.profile = compute_profile(st.rec.v, st.rec.field, st.rec.source, params);
  const RadialProfile& p = st.profile;
  const int dim = grid.dim();
  st.identity_residual = identity_audit_Hprime(p);
  for (std::size_t k = 1; k + 1 < p.size(); ++k)
    st.max_interior_residual = std::max(st.max_interior_residual, std::abs(st.identity_residual[k]));

  std::vector<double> r, n, res;
  for (std::size_t k = 0; k < p.size(); ++k)
    if (p.r[k] <= st.n_prefix * (1.0 + 1e-12)) {
      r.push_back(p.r[k]);
      n.push_back(p.N[k]);
      res.push_back(st.identity_residual[k]);
    }
  st.n_audit = monotonicity_audit(r, n, 0.0, 0.0, slack_from_residual(res, n));

  std::vector<double> hscale(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) hscale[k] = p.H[k] / std::pow(p.r[k], dim + 2);
  st.weiss_c = fit_negative_part(p.r, p.W);
  const auto slack_w = slack_from_residual(st.identity_residual, hscale);
  st.w_audit = monotonicity_audit(p.r, p.W, st.weiss_c, 0.5, slack_w);
  for (std::size_t k = 0; k < p.size(); ++k)
    if (p.W[k] < -1.5 * st.weiss_c * std::sqrt(p.r[k]) - slack_w[k]) ++st.weiss_bound_violations;
  return st;
}

BlowupStudy blowup_study(const SolvedScenario& s, const MonitorParams& params) {
  BlowupStudy st;
  st.stack = build_stack(s.v.v, s.scenario.spec.field, s.v.source, s.center, params,
                         s.dn_plus_center);
  if (st.stack.classification.label == PointLabel::regular) {
    st.limit = blowup_limit(st.stack);
    const BlowupFit& a = st.limit->fit;
    const BlowupFit& b = st.limit->fit_next;
    const int dim = s.v.v.grid().dim();
    st.a_rel_diff = a.a > 0.0 ? std::abs(a.a - b.a) / a.a : 1.0;
    st.nu_diff_deg = thin_angle_between(a.nu, b.nu, dim) * kDegree;
  }
  return st;
}

FreeBoundaryStudy free_boundary_study(const SolvedScenario& s, const MonitorParams& params,
                                      const FreeBoundaryConfig& fb) {
  FreeBoundaryStudy st;
  const Grid& grid = s.v.v.grid();
  const int dim = grid.dim();
  const FreeBoundaryChart& chart = s.chart;
  st.separates = gamma_separates(chart, grid);
  if (chart.gamma.empty()) {
    st.note = chart.note.empty() ? "no free boundary points" : chart.note;
    return st;
  }

  // Centre point first, then points spread along the free boundary.
  const GammaPoint& centre = nearest_gamma(chart, Vec{0.0, 0.0, 0.0});
  std::vector<GammaPoint> pool;
  for (const GammaPoint& g : chart.gamma)
    if (norm(g.x, dim - 1) <= fb.window && &g != &centre) pool.push_back(g);
  std::sort(pool.begin(), pool.end(), [](const GammaPoint& a, const GammaPoint& b) {
    return a.x[1] != b.x[1] ? a.x[1] < b.x[1] : a.x[0] < b.x[0];
  });
  std::vector<GammaPoint> chosen{centre};
  if (fb.points > 1)
    for (std::size_t i : spread_indices(pool.size(), static_cast<std::size_t>(fb.points - 1)))
      chosen.push_back(pool[i]);

  const CoefficientField& field = s.scenario.spec.field;
  for (const GammaPoint& g : chosen) {
    PointStudy ps;
    ps.point = g;
    try {
      const ScalingStack stack = build_stack(s.v.v, field, s.v.source, g.x, params,
                                             gamma_normal_derivative(s.v.v, g.x));
      ps.point.label = stack.classification.label;
      ps.point.ntilde0 = stack.classification.estimate;
      if (ps.point.label == PointLabel::regular) {
        const BlowupLimit lim = blowup_limit(stack);
        ps.point.fit = lim.fit;
        st.nondegenerate = st.nondegenerate && lim.nondegenerate;
        ps.normal = original_normal(stack.rec, lim.fit.nu, dim);
        ps.cone = cone_test(chart, grid, g.x, ps.normal, fb.epsilon, fb.cone_radius);
      }
    } catch (const std::exception& e) {
      ps.error = e.what();
    }
    st.points.push_back(ps);
  }

  const PointStudy& c = st.points.front();
  if (c.point.label == PointLabel::regular)
    for (const PointStudy& p : st.points)
      st.openness = st.openness && p.point.label != PointLabel::non_regular;

  if (dim == 3 && c.point.fit) {
    try {
      st.graph = graph_fit(chart, c.point.x, c.normal, fb.window);
      st.graph_normal_vs_fit_deg = thin_angle_between(st.graph->normal, c.normal, dim) * kDegree;
      if (s.scenario.truth)
        st.graph_normal_vs_truth_deg =
            thin_angle_between(st.graph->normal, s.scenario.truth->nu(), dim) * kDegree;
    } catch (const std::invalid_argument& e) {
      st.note = e.what();
    }
  }
  std::vector<GammaPoint> fitted;
  for (const PointStudy& p : st.points) fitted.push_back(p.point);
  try {
    st.holder = holder_fit(fitted);
  } catch (const std::invalid_argument& e) {
    if (st.note.empty()) st.note = e.what();
  }
  return st;
}

EpiStudy epi_study(int dim, const EpiConfig& epi, const SolverParams& solver) {
  const auto t0 = Clock::now();
  EpiStudy st;
  const Grid grid = Grid::build(dim, epi.nodes);
  EpiParams p;
  p.count = epi.count;
  p.seed = epi.seed;
  p.theta = epi.theta;
  p.distance_min = epi.distance_min;
  p.max_attempts = epi.max_attempts;
  p.solver = solver;
  st.batch = epi_batch(grid, p);

  std::mt19937_64 rng(epi.seed + 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> c1(-0.6, 0.0), c2(-0.3, 0.3), rho(0.15, 0.35);
  while (static_cast<int>(st.bumps.size()) < epi.bumps) {
    Bump b;
    b.dim = dim;
    b.center = {c1(rng), 0.0, 0.0};
    if (dim == 3) b.center[1] = c2(rng);
    b.radius = rho(rng);
    if (norm(b.center, dim) + b.radius > 0.95) continue;
    st.bumps.push_back(b);
  }
  for (const Bump& b : st.bumps) {
    const auto v = first_variation(b);
    st.variations.push_back(v);
    const double den = std::max({std::abs(v.first), std::abs(v.second), 1e-300});
    st.worst_variation = std::max(st.worst_variation, std::abs(v.first - v.second) / den);
  }
  st.seconds = seconds_since(t0);
  return st;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
  std::ostringstream out;
  out << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) out << std::setw(2) << static_cast<int>(digest[i]);
  return out.str();
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

bool RunManifest::passed() const {
  for (const StageRecord& s : stages)
    if (!s.ran || !s.checks_passed) return false;
  return true;
}

json RunManifest::to_json() const {
  json j;
  j["config_hash"] = config_hash;
  j["version"] = version;
  j["stages"] = json::array();
  for (const StageRecord& s : stages)
    j["stages"].push_back({{"name", s.name},
                           {"seconds", s.seconds},
                           {"ran", s.ran},
                           {"checks_passed", s.checks_passed},
                           {"error", s.error}});
  j["files"] = json::array();
  for (const FileRecord& f : files)
    j["files"].push_back({{"name", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  j["passed"] = passed();
  return j;
}

namespace {

json vec_json(const Vec& v, int dim) {
  json a = json::array();
  for (int k = 0; k < dim; ++k) a.push_back(v[k]);
  return a;
}

void write_epi_csv(const EpiStudy& st, std::uint64_t seed, std::ostream& out) {
  out << "seed,attempt,distance_to_h,distance_fit,W_w,W_zeta,kappa,in_hypothesis\n";
  for (const EpiSample& s : st.batch.accepted)
    out << seed << ',' << s.attempt << ',' << format_number(s.report.distance_to_h) << ','
        << format_number(s.report.distance) << ',' << format_number(s.report.W_w) << ','
        << format_number(s.report.W_zeta) << ',' << format_number(*s.report.kappa) << ','
        << (s.report.in_hypothesis ? 1 : 0) << '\n';
}

void write_gamma_csv(const FreeBoundaryStudy& st, std::ostream& out) {
  out << "x1,x2,x3,label,ntilde0,a,nu1,nu2,cone_positive,cone_lambda\n";
  for (const PointStudy& p : st.points) {
    const GammaPoint& g = p.point;
    out << format_number(g.x[0]) << ',' << format_number(g.x[1]) << ',' << format_number(g.x[2])
        << ',' << to_string(g.label) << ',' << format_number(g.ntilde0) << ',';
    if (g.fit)
      out << format_number(g.fit->a) << ',' << format_number(p.normal[0]) << ','
          << format_number(p.normal[1]);
    else
      out << ",,";
    out << ',';
    if (p.cone) out << (p.cone->positive_side ? 1 : 0);
    out << ',';
    if (p.cone) out << (p.cone->lambda_side ? 1 : 0);
    out << '\n';
  }
}

}  // namespace

RunManifest run(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const std::filesystem::path out = options.out.empty() ? std::filesystem::path(config.output) : options.out;
  std::filesystem::create_directories(out);

  MonitorParams mparams = config.monitor;
  const int saved_threads = omp_get_max_threads();
  if (options.deterministic) {
    omp_set_num_threads(1);
    mparams.exec = Execution::serial;
  }

  auto requested = [&](const std::string& s) {
    return std::find(config.stages.begin(), config.stages.end(), s) != config.stages.end();
  };
  std::vector<std::string> order;
  if (requested("solve") || requested("monitor") || requested("blowup") || requested("fb"))
    order.push_back("solve");
  for (const char* s : {"monitor", "blowup", "fb", "epi"})
    if (requested(s)) order.push_back(s);

  RunManifest manifest;
  manifest.version = THINOBS_VERSION;
  manifest.config_hash = sha256_hex(config.to_json().dump());
  json summary;
  summary["config"] = config.to_json();

  std::optional<SolvedScenario> solved;
  std::vector<std::string> written;
  for (const std::string& name : order) {
    StageRecord rec;
    rec.name = name;
    const auto t0 = Clock::now();
    json js;
    try {
      if (name != "solve" && name != "epi" && !solved)
        throw std::runtime_error("solve stage did not complete");
      if (name == "solve") {
        solved = solve_scenario(config.scenario, config.solver);
        const SolvedScenario& s = *solved;
        const int dim = s.u.v.grid().dim();
        js["sweeps"] = s.u.sweeps;
        js["residual"] = {{"negative_trace", s.u.residual.negative_trace},
                          {"negative_jump", s.u.residual.negative_jump},
                          {"product", s.u.residual.product},
                          {"tol_c", s.u.residual.tol_c},
                          {"passed", s.u.residual.passed()}};
        if (s.l2_error) js["relative_l2_error"] = *s.l2_error;
        js["lambda_nodes"] = s.chart.lambda_count();
        js["gamma_points"] = s.chart.gamma.size();
        js["center"] = vec_json(s.center, dim);
        js["b"] = s.v.b;
        js["source_bound"] = s.v.source_bound;
        if (!s.chart.note.empty()) js["note"] = s.chart.note;
        rec.checks_passed = s.u.residual.passed() && (!s.l2_error || *s.l2_error <= 0.03);
      } else if (name == "monitor") {
        const MonitorStudy st = monitor_study(*solved, mparams);
        std::ofstream f(out / "profile.csv");
        write_profile_csv(st.profile, f);
        written.push_back("profile.csv");
        js["alpha"] = st.profile.alpha;
        js["beta_hat"] = st.profile.beta_hat;
        js["max_identity_residual"] = st.max_interior_residual;
        js["n_violations"] = st.n_audit.violations;
        js["weiss_c"] = st.weiss_c;
        js["weiss_violations"] = st.w_audit.violations;
        js["weiss_bound_violations"] = st.weiss_bound_violations;
        rec.checks_passed = st.max_interior_residual <= 0.05 && st.n_audit.violations == 0 &&
                            st.w_audit.violations == 0 && st.weiss_bound_violations == 0;
      } else if (name == "blowup") {
        const BlowupStudy st = blowup_study(*solved, mparams);
        const Classification& c = st.stack.classification;
        js["label"] = to_string(c.label);
        js["ntilde0"] = c.estimate;
        js["band"] = c.band;
        rec.checks_passed = c.label != PointLabel::undecided;
        if (st.limit) {
          js["a"] = st.limit->fit.a;
          js["angle"] = st.limit->fit.angle;
          js["fit_residual"] = st.limit->fit.residual;
          js["a_min"] = st.limit->a_min;
          js["decay_gamma"] = st.limit->decay.gamma;
          js["a_rel_diff"] = st.a_rel_diff;
          js["nu_diff_deg"] = st.nu_diff_deg;
          rec.checks_passed = rec.checks_passed && st.limit->nondegenerate &&
                              st.a_rel_diff <= 0.03 && st.nu_diff_deg <= 3.0;
        }
      } else if (name == "fb") {
        const FreeBoundaryStudy st = free_boundary_study(*solved, mparams, config.fb);
        std::ofstream f(out / "gamma_points.csv");
        write_gamma_csv(st, f);
        written.push_back("gamma_points.csv");
        bool cones = true;
        int errors = 0;
        for (const PointStudy& p : st.points) {
          if (p.cone) cones = cones && p.cone->positive_side && p.cone->lambda_side;
          errors += !p.error.empty();
        }
        js["points"] = st.points.size();
        js["point_errors"] = errors;
        js["cones_pass"] = cones;
        js["separates"] = st.separates;
        js["openness"] = st.openness;
        js["nondegenerate"] = st.nondegenerate;
        if (st.graph) {
          js["graph"] = {{"rotated", st.graph->rotated},
                         {"original", st.graph->original},
                         {"rms_residual", st.graph->rms_residual},
                         {"sup_slope", st.graph->sup_slope},
                         {"accepted", st.graph->accepted},
                         {"normal_vs_fit_deg", st.graph_normal_vs_fit_deg}};
          if (st.graph_normal_vs_truth_deg)
            js["graph"]["normal_vs_truth_deg"] = *st.graph_normal_vs_truth_deg;
        }
        if (st.holder) {
          js["holder"] = {{"beta_a", st.holder->beta_a},
                          {"beta_nu", st.holder->beta_nu},
                          {"flat_a", st.holder->flat_a},
                          {"flat_nu", st.holder->flat_nu}};
        }
        if (!st.note.empty()) js["note"] = st.note;
        rec.checks_passed = st.separates && st.openness && st.nondegenerate && cones &&
                            errors == 0 && (!st.graph || st.graph->accepted);
      } else if (name == "epi") {
        const int dim = config.scenario.name == "laplace-exact-3d" ? 3 : config.scenario.dim;
        const EpiStudy st = epi_study(dim, config.epi, config.solver);
        std::ofstream f(out / "epi_batch.csv");
        write_epi_csv(st, config.epi.seed, f);
        written.push_back("epi_batch.csv");
        js["accepted"] = st.batch.accepted.size();
        js["attempts"] = st.batch.attempts;
        js["below_tolerance"] = st.batch.below_tolerance;
        js["min_kappa"] = st.batch.min_kappa;
        js["all_positive"] = st.batch.all_positive;
        js["worst_first_variation"] = st.worst_variation;
        rec.checks_passed = static_cast<int>(st.batch.accepted.size()) == config.epi.count &&
                            st.batch.all_positive && st.batch.min_kappa >= 0.01 &&
                            st.worst_variation <= 0.03;
      }
      rec.ran = true;
    } catch (const std::exception& e) {
      rec.error = e.what();
      js["error"] = e.what();
    }
    rec.seconds = seconds_since(t0);
    js["checks_passed"] = rec.checks_passed;
    summary["stages"][name] = js;
    manifest.stages.push_back(rec);
  }

  {
    std::ofstream f(out / "summary.json");
    f << summary.dump(2) << '\n';
  }
  written.push_back("summary.json");
  for (const std::string& name : written) {
    const auto path = out / name;
    manifest.files.push_back({name, sha256_file(path), std::filesystem::file_size(path)});
  }
  {
    std::ofstream f(out / "manifest.json");
    f << manifest.to_json().dump(2) << '\n';
  }
  if (options.deterministic) omp_set_num_threads(saved_threads);
  return manifest;
}

}  // namespace thinobs
