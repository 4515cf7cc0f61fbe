#include "thinobs/acceptance.hpp"

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <sstream>

#include "thinobs/pipeline.hpp"

namespace thinobs {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double x, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << x;
  return s.str();
}

class Suite {
 public:
  explicit Suite(const AcceptanceOptions& o) : opt_(o) {
    n2_ = o.quick ? 65 : 129;
    n2_coarse_ = o.quick ? 33 : 65;
    n3_ = o.quick ? 33 : 65;
    solver_.omega = 1.9;
    solver_.order = SweepOrder::red_black;
  }

  double tol(double t) const { return t * opt_.tolerance_scale; }

  const SolvedScenario& solved(const std::string& name, int nodes = 0) {
    ScenarioParams p;
    p.name = name;
    p.dim = name == "laplace-exact-3d" ? 3 : 2;
    p.nodes = nodes ? nodes : (p.dim == 3 ? n3_ : n2_);
    p.epsilon = 0.1;
    p.rotation_deg = name == "laplace-exact-3d" ? 20.0 : 0.0;
    const std::string key = name + "/" + std::to_string(p.nodes);
    auto it = solved_.find(key);
    if (it == solved_.end())
      it = solved_.emplace(key, std::make_unique<SolvedScenario>(solve_scenario(p, solver_))).first;
    return *it->second;
  }

  const MonitorStudy& monitor(const std::string& name) {
    auto it = monitor_.find(name);
    if (it == monitor_.end())
      it = monitor_.emplace(name, std::make_unique<MonitorStudy>(monitor_study(solved(name), mp_)))
               .first;
    return *it->second;
  }

  const BlowupStudy& blowup(const std::string& name) {
    auto it = blowup_.find(name);
    if (it == blowup_.end())
      it = blowup_.emplace(name, std::make_unique<BlowupStudy>(blowup_study(solved(name), mp_)))
               .first;
    return *it->second;
  }

  const FreeBoundaryStudy& fb(const std::string& name) {
    auto it = fb_.find(name);
    if (it == fb_.end()) {
      FreeBoundaryConfig c;
      c.epsilon = 0.5;
      c.cone_radius = 0.2;
      c.points = 10;
      c.window = 0.3;
      it = fb_.emplace(name, std::make_unique<FreeBoundaryStudy>(
                                 free_boundary_study(solved(name), mp_, c)))
               .first;
    }
    return *it->second;
  }

  CriterionResult run(int id);

  int n2_, n2_coarse_, n3_;
  AcceptanceOptions opt_;
  SolverParams solver_;
  MonitorParams mp_;

 private:
  std::map<std::string, std::unique_ptr<SolvedScenario>> solved_;
  std::map<std::string, std::unique_ptr<MonitorStudy>> monitor_;
  std::map<std::string, std::unique_ptr<BlowupStudy>> blowup_;
  std::map<std::string, std::unique_ptr<FreeBoundaryStudy>> fb_;
};

const std::vector<std::string> kLibrary{"laplace-exact", "laplace-exact-3d", "lipschitz-perturbed",
                                        "nonzero-obstacle", "synthetic-frequency2"};

CriterionResult Suite::run(int id) {
  CriterionResult r;
  r.id = id;
  std::ostringstream d;
  switch (id) {
    case 1: {
      r.name = "exact-solution-reproduction";
      const auto t0 = Clock::now();
      const double coarse = *solved("laplace-exact", n2_coarse_).l2_error;
      const double fine = *solved("laplace-exact", n2_).l2_error;
      const double t = seconds_since(t0);
      const double ratio = fine / coarse;
      // Second-order convergence gives a ratio near 1/4; the check accepts
      // any reduction at least as strong as halving with the 30% margin.
      r.passed = fine <= tol(0.03) && ratio <= tol(0.65) && t <= 60.0;
      d << "rel L2 error N=" << n2_coarse_ << ": " << fmt(coarse) << ", N=" << n2_ << ": "
        << fmt(fine) << "; ratio " << fmt(ratio, 3) << " (<= 0.65; observed order "
        << fmt(std::log2(1.0 / ratio), 3) << "); " << fmt(t, 3) << " s";
      break;
    }
    case 2: {
      r.name = "frequency-plateau";
      const RadialProfile& p = monitor("laplace-exact").profile;
      double lo = 1e9, hi = -1e9;
      for (std::size_t k = 0; k < p.size(); ++k)
        if (p.r[k] >= 0.1 && p.r[k] <= 0.5) {
          lo = std::min(lo, p.Ntilde[k]);
          hi = std::max(hi, p.Ntilde[k]);
        }
      r.passed = lo >= 1.5 - tol(0.05) && hi <= 1.5 + tol(0.05);
      d << "N~ on r in [0.1, 0.5]: [" << fmt(lo, 5) << ", " << fmt(hi, 5) << "]";
      break;
    }
    case 3: {
      r.name = "weiss-vanishing";
      const RadialProfile& p = monitor("laplace-exact").profile;
      const double dh = 1.5 * std::numbers::pi;
      double worst = 0.0, w_small = 0.0, w_large = 0.0, r_small = 1.0, r_large = 0.0;
      for (std::size_t k = 0; k < p.size(); ++k)
        if (p.r[k] >= 0.1 && p.r[k] <= 0.5) {
          worst = std::max(worst, std::abs(p.W[k]));
          if (p.r[k] < r_small) r_small = p.r[k], w_small = std::abs(p.W[k]);
          if (p.r[k] > r_large) r_large = p.r[k], w_large = std::abs(p.W[k]);
        }
      r.passed = worst <= tol(0.05) * dh && w_small <= w_large;
      d << "max |W| " << fmt(worst) << " (bound " << fmt(tol(0.05) * dh) << "); |W(" << fmt(r_small, 3)
        << ")| = " << fmt(w_small) << " vs |W(" << fmt(r_large, 3) << ")| = " << fmt(w_large);
      break;
    }
    case 4: {
      r.name = "derivative-identity";
      const double a = monitor("laplace-exact").max_interior_residual;
      const double b = monitor("lipschitz-perturbed").max_interior_residual;
      r.passed = a <= tol(0.05) && b <= tol(0.05);
      d << "max relative residual: laplace-exact " << fmt(a) << ", lipschitz-perturbed " << fmt(b);
      break;
    }
    case 5: {
      r.name = "frequency-monotonicity";
      const MonitorStudy& m = monitor("lipschitz-perturbed");
      r.passed = m.n_audit.violations == 0;
      d << m.n_audit.violations << " violations over " << m.n_audit.pairs << " pairs on r <= "
        << m.n_prefix;
      break;
    }
    case 6: {
      r.name = "weiss-almost-monotonicity";
      bool ok = true;
      for (const char* s : {"lipschitz-perturbed", "nonzero-obstacle"}) {
        const MonitorStudy& m = monitor(s);
        ok = ok && m.w_audit.violations == 0 && m.weiss_bound_violations == 0;
        d << s << ": C^ " << fmt(m.weiss_c) << ", " << m.w_audit.violations
          << " monotonicity violations, " << m.weiss_bound_violations << " bound violations; ";
      }
      r.passed = ok;
      break;
    }
    case 7: {
      r.name = "epiperimetric-inequality";
      EpiConfig e;
      e.nodes = n2_;
      e.count = 20;
      e.bumps = 10;
      const EpiStudy st = epi_study(2, e, solver_);
      const auto& b = st.batch;
      r.passed = static_cast<int>(b.accepted.size()) == e.count && b.all_positive &&
                 b.min_kappa >= 0.01 / opt_.tolerance_scale && st.worst_variation <= tol(0.03) &&
                 st.seconds <= 600.0;
      d << b.accepted.size() << " traces (" << b.attempts << " drawn, " << b.below_tolerance
        << " below tol_W); min kappa " << fmt(b.min_kappa) << "; first variation worst rel diff "
        << fmt(st.worst_variation, 3) << " over " << st.bumps.size() << " bumps; "
        << fmt(st.seconds, 3) << " s";
      break;
    }
    case 8: {
      r.name = "blowup-decay";
      const BlowupStudy& b = blowup("lipschitz-perturbed");
      const Classification& c = b.stack.classification;
      if (!b.limit) {
        r.passed = false;
        d << "centre classified " << to_string(c.label) << " (N~(0+) " << fmt(c.estimate) << ")";
        break;
      }
      const double gamma = b.limit->decay.gamma;
      r.passed = gamma >= 0.1 / opt_.tolerance_scale && b.a_rel_diff <= tol(0.03) &&
                 b.nu_diff_deg <= tol(3.0);
      d << "gamma^ " << fmt(gamma, 3) << "; a " << fmt(b.limit->fit.a) << " vs "
        << fmt(b.limit->fit_next.a) << " (rel " << fmt(b.a_rel_diff, 3) << "); nu diff "
        << fmt(b.nu_diff_deg, 3) << " deg";
      break;
    }
    case 9: {
      r.name = "nondegeneracy";
      bool ok = true;
      int count = 0;
      double worst = std::numeric_limits<double>::infinity();
      for (const char* s : {"laplace-exact", "laplace-exact-3d", "lipschitz-perturbed",
                            "nonzero-obstacle"}) {
        const BlowupStudy& b = blowup(s);
        if (b.limit) {
          ++count;
          ok = ok && b.limit->nondegenerate;
          worst = std::min(worst, b.limit->fit.a / b.limit->a_min);
        }
        for (const PointStudy& p : fb(s).points)
          if (p.point.label == PointLabel::regular) {
            ++count;
            ok = ok && p.point.fit && p.point.fit->a > 0.0;
          }
        ok = ok && fb(s).nondegenerate;
      }
      r.passed = ok && count > 0;
      d << count << " regular points checked; smallest a / a_min at the centres " << fmt(worst);
      break;
    }
    case 10: {
      r.name = "free-boundary-geometry";
      const FreeBoundaryStudy& st = fb("laplace-exact-3d");
      const double h = solved("laplace-exact-3d").u.v.grid().spacing();
      int regular = 0, cones = 0;
      for (const PointStudy& p : st.points) {
        regular += p.point.label == PointLabel::regular;
        cones += p.cone && p.cone->positive_side && p.cone->lambda_side;
      }
      const int n = static_cast<int>(st.points.size());
      const bool graph = st.graph && st.graph->rms_residual <= tol(2.0) * h;
      const double angle = st.graph_normal_vs_truth_deg.value_or(180.0);
      r.passed = n >= 10 && regular == n && cones == n && graph && angle <= tol(3.0);
      d << n << " points, " << regular << " regular, " << cones << " cone passes; ";
      if (st.graph)
        d << "graph rms " << fmt(st.graph->rms_residual, 3) << " (2h = " << fmt(2 * h, 3)
          << "), original slope " << fmt(st.graph->original_slope, 4) << ", normal vs truth "
          << fmt(angle, 3) << " deg";
      else
        d << "no graph fit: " << st.note;
      break;
    }
    case 11: {
      r.name = "frequency-gap";
      const double upper = (3.0 + mp_.delta) / 2.0 - 0.1;
      bool ok = true;
      for (const std::string& s : kLibrary) {
        std::vector<double> est{blowup(s).stack.classification.estimate};
        for (const PointStudy& p : fb(s).points)
          if (p.error.empty()) est.push_back(p.point.ntilde0);
        double lo = 1e9, hi = -1e9;
        for (double e : est) {
          ok = ok && !(e > 1.6 && e < upper);
          lo = std::min(lo, e);
          hi = std::max(hi, e);
        }
        d << s << " [" << fmt(lo, 4) << ", " << fmt(hi, 4) << "]; ";
      }
      r.passed = ok;
      d << "gap (1.6, " << fmt(upper, 3) << ")";
      break;
    }
    default:
      throw std::invalid_argument("unknown criterion " + std::to_string(id));
  }
  r.detail = d.str();
  return r;
}

}  // namespace

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options) {
  Suite suite(options);
  std::vector<int> ids = options.only;
  if (ids.empty())
    for (int i = 1; i <= 11; ++i) ids.push_back(i);
  std::vector<CriterionResult> out;
  for (int id : ids) {
    const auto t0 = Clock::now();
    CriterionResult r;
    try {
      r = suite.run(id);
    } catch (const std::exception& e) {
      r.id = id;
      r.passed = false;
      r.detail = std::string("error: ") + e.what();
    }
    r.seconds = seconds_since(t0);
    out.push_back(r);
  }
  return out;
}

std::string format_line(const CriterionResult& r) {
  std::ostringstream s;
  s << (r.passed ? "PASS" : "FAIL") << ' ' << (r.id < 10 ? " " : "") << r.id << ' ' << r.name
    << ": " << r.detail;
  return s.str();
}

nlohmann::json to_json(const std::vector<CriterionResult>& results) {
  nlohmann::json j = nlohmann::json::array();
  for (const CriterionResult& r : results)
    j.push_back({{"id", r.id},
                 {"name", r.name},
                 {"passed", r.passed},
                 {"detail", r.detail},
                 {"seconds", r.seconds}});
  return j;
}

}  // namespace thinobs
