#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "thinobs/monitors.hpp"
#include "thinobs/reference.hpp"
#include "thinobs/scenarios.hpp"
#include "thinobs/solver.hpp"

using namespace thinobs;
using std::numbers::pi;

namespace {

const Grid& grid129() {
  static const Grid g = Grid::build(2, 129);
  return g;
}

const GridField& h129() {
  static const GridField v = [] {
    GridField f = GridField::sample(grid129(), [](const Vec& x) { return eval_h(x, 2); });
    f.attach_one_sided_layers();
    return f;
  }();
  return v;
}

const RadialProfile& h_profile() {
  static const RadialProfile p =
      compute_profile(h129(), CoefficientField::identity(2), {}, MonitorParams{});
  return p;
}

CoefficientField perturbed() {
  return CoefficientField(
      2,
      [](const Vec& x) {
        Mat a{};
        a[0][0] = a[1][1] = 1.0 + 0.1 * x[0];
        return a;
      },
      0.85, 0.1, "I + 0.1 x1 I", true);
}

}  // namespace

TEST_CASE("height of h") {
  const CoefficientField id = CoefficientField::identity(2);
  CHECK(height(h129(), id, 1.0) == doctest::Approx(pi).epsilon(0.01));
  CHECK(height(h129(), id, 0.5) == doctest::Approx(pi / 16).epsilon(0.01));
  CHECK(height(GridField(grid129()), id, 0.5) == 0.0);
}

TEST_CASE("Dirichlet energy of h") {
  const CoefficientField id = CoefficientField::identity(2);
  CHECK(energy_D(h129(), id, 1.0) == doctest::Approx(1.5 * pi).epsilon(0.05));
  CHECK(energy_D(h129(), id, 0.5) == doctest::Approx(1.5 * pi * 0.125).epsilon(0.05));
  const GridField c = GridField::sample(grid129(), [](const Vec&) { return 2.5; });
  CHECK(energy_D(c, id, 0.7) == doctest::Approx(0.0).scale(1.0));
  // With f = 1, I = D + int_{B_r} v.
  const double d = energy_D(h129(), id, 0.6);
  const double i = energy_I(h129(), id, [](const Vec&) { return 1.0; }, 0.6);
  CHECK(i - d == doctest::Approx(ball_integral(h129(), 0.6)).epsilon(1e-9));
}

TEST_CASE("G") {
  CHECK(gee(h129(), CoefficientField::identity(2), 0.5) == doctest::Approx(2.0).epsilon(0.01));
  const Grid g3 = Grid::build(3, 33);
  CHECK(gee(GridField(g3), CoefficientField::identity(3), 0.25) == 8.0);
}

TEST_CASE("psi, sigma and the frequency of h") {
  const RadialProfile& p = h_profile();
  for (std::size_t k = 0; k < p.size(); ++k) {
    CHECK(p.psi[k] == doctest::Approx(p.r[k]).epsilon(0.01));
    CHECK(p.sigma[k] == doctest::Approx(p.r[k]).epsilon(0.01));
    CHECK(p.sigma[k] / p.r[k] >= std::exp(-p.beta_hat) - 1e-12);
    CHECK(p.sigma[k] / p.r[k] <= std::exp(p.beta_hat) + 1e-12);
    if (p.r[k] >= 0.1 && p.r[k] <= 0.5) CHECK(std::abs(p.Ntilde[k] - 1.5) <= 0.05);
    CHECK(std::abs(p.W[k]) <= 0.02 * 1.5 * pi);
  }
  CHECK(p.alpha == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("frequency two") {
  // Scaled so the truncation r^{3+delta} stays below M on the audited radii.
  GridField v = GridField::sample(grid129(), [](const Vec& x) { return 10.0 * frequency_two(x, 2); });
  const RadialProfile p = compute_profile(v, CoefficientField::identity(2), {}, MonitorParams{});
  for (std::size_t k = 0; k < p.size(); ++k)
    if (p.r[k] >= 0.1 && p.r[k] <= 0.5) CHECK(std::abs(p.Ntilde[k] - 2.0) <= 0.05);
  const GrowthReport g = growth_audit(p);
  CHECK(g.sup_v.exponent == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("truncation is active for tiny fields") {
  MonitorParams mp;
  mp.k_prime = 0.3;
  const GridField tiny =
      GridField::sample(grid129(), [](const Vec& x) { return 1e-12 * eval_h(x, 2); });
  RadialProfile p = compute_profile(tiny, CoefficientField::identity(2), {}, mp);
  for (std::size_t k = 1; k + 1 < p.size(); ++k) {
    const double want = (3.0 + mp.delta) / 2.0 * std::exp(mp.k_prime * std::pow(p.r[k], 0.25));
    CHECK(p.Ntilde[k] == doctest::Approx(want).epsilon(0.01));
  }
}

TEST_CASE("Weiss energy scales quadratically") {
  const RadialProfile& p = h_profile();
  const GridField v2 = GridField::sample(grid129(), [](const Vec& x) { return 2.0 * eval_h(x, 2); });
  const RadialProfile q = compute_profile(v2, CoefficientField::identity(2), {}, MonitorParams{});
  for (std::size_t k = 0; k < p.size(); ++k)
    CHECK(q.W[k] == doctest::Approx(4.0 * p.W[k]).epsilon(1e-9).scale(1e-12));
  const RadialProfile z =
      compute_profile(GridField(grid129()), CoefficientField::identity(2), {}, MonitorParams{});
  for (double w : z.W) CHECK(w == 0.0);
}

TEST_CASE("derivative identity") {
  const auto res = identity_audit_Hprime(h_profile());
  for (std::size_t k = 1; k + 1 < res.size(); ++k) CHECK(std::abs(res[k]) <= 0.03);
  const RadialProfile z =
      compute_profile(GridField(grid129()), CoefficientField::identity(2), {}, MonitorParams{});
  for (double r : identity_audit_Hprime(z)) CHECK(r == 0.0);
}

TEST_CASE("derivative identity on a perturbed-coefficient solve") {
  // The identity holds for solutions, so the oracle is refinement: the
  // residual on the coarse grid bounds the residual on the fine grid.
  std::vector<double> worst;
  for (int nodes : {65, 129}) {
    const Scenario sc = make_scenario({"lipschitz-perturbed", 2, nodes});
    const SignoriniSolution u = solve(sc.spec, SolverParams{1.9});
    const RadialProfile p = compute_profile(u.v, sc.spec.field, {}, MonitorParams{});
    const auto res = identity_audit_Hprime(p);
    double w = 0.0;
    for (std::size_t k = 1; k + 1 < res.size(); ++k)
      if (p.r[k] >= 6.0 * sc.spec.grid.spacing()) w = std::max(w, std::abs(res[k]));
    worst.push_back(w);
  }
  CHECK(worst[1] <= 0.05);
  CHECK(worst[1] <= worst[0]);
}

TEST_CASE("G stays within the fitted bound for perturbed coefficients") {
  const RadialProfile p = compute_profile(h129(), perturbed(), {}, MonitorParams{});
  for (std::size_t k = 0; k < p.size(); ++k) CHECK(std::abs(p.G[k] - 1.0 / p.r[k]) <= p.beta_hat);
}

TEST_CASE("monotonicity audit") {
  const RadialProfile& p = h_profile();
  const auto slack = slack_from_residual(identity_audit_Hprime(p), p.N);
  CHECK(monotonicity_audit(p.r, p.N, 0.0, 0.0, slack).violations == 0);

  const std::vector<double> r{0.1, 0.2, 0.3, 0.4};
  const std::vector<double> dec{4.0, 3.0, 2.0, 1.0};
  const MonotonicityReport rep = monotonicity_audit(r, dec, 0.0, 0.0, {});
  CHECK(rep.violations == 3);
  CHECK(rep.pairs == 3);
  CHECK(monotone_prefix(r, rep) == doctest::Approx(0.1));
  // A large enough compensator repairs it.
  CHECK(monotonicity_audit(r, dec, 20.0, 1.0, {}).violations == 0);
}

TEST_CASE("property: audit of increasing series never flags") {
  std::mt19937 rng(43);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> r, y;
    double acc = u(rng);
    for (int k = 0; k < 12; ++k) {
      r.push_back(0.05 + 0.07 * k);
      acc += u(rng);
      y.push_back(acc);
    }
    std::shuffle(r.begin(), r.end(), rng);  // the audit sorts by r itself
    std::vector<double> sorted = r;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> ys(12);
    for (int k = 0; k < 12; ++k)
      ys[k] = y[std::find(sorted.begin(), sorted.end(), r[k]) - sorted.begin()];
    CHECK(monotonicity_audit(r, ys, 0.0, 0.0, {}).violations == 0);
  }
}

TEST_CASE("fit of the negative part") {
  std::vector<double> r, w;
  for (int k = 1; k <= 10; ++k) {
    r.push_back(0.1 * k);
    w.push_back(-0.3 * std::sqrt(0.1 * k));
  }
  CHECK(fit_negative_part(r, w) == doctest::Approx(0.3));
  CHECK(fit_negative_part({0.1, 0.2}, {1.0, 2.0}) == 0.0);
}

TEST_CASE("property: log slope is exact for powers") {
  std::mt19937 rng(47);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const auto r = geometric_ladder(0.9, 0.9, 0.05);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = u(rng), c = u(rng);
    std::vector<double> y;
    for (double x : r) y.push_back(c + a * std::log(x));
    for (double s : log_slope(r, y)) CHECK(s == doctest::Approx(a).epsilon(1e-9).scale(1.0));
  }
}

TEST_CASE("growth exponents") {
  const GrowthReport g = growth_audit(h_profile());
  CHECK(g.sup_v.exponent == doctest::Approx(1.5).epsilon(0.07));
  CHECK(g.sup_grad.exponent == doctest::Approx(0.5).epsilon(0.2));
  CHECK(g.height.exponent == doctest::Approx(4.0).epsilon(0.025));
  CHECK(g.energy.exponent == doctest::Approx(3.0).epsilon(0.034));
  const RadialProfile z =
      compute_profile(GridField(grid129()), CoefficientField::identity(2), {}, MonitorParams{});
  CHECK(growth_audit(z).sup_v.degenerate);
}

TEST_CASE("profile csv") {
  std::ostringstream out;
  write_profile_csv(h_profile(), out);
  const std::string s = out.str();
  CHECK(s.rfind("r,H,D,I,G,psi,sigma,M,J,N,Ntilde,W\n", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == static_cast<long>(h_profile().size() + 1));
}

TEST_CASE("property: serial and parallel profiles agree bitwise") {
  MonitorParams s, p;
  s.exec = Execution::serial;
  p.exec = Execution::parallel;
  const Grid g = Grid::build(3, 33);
  std::mt19937 rng(53);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double a = u(rng), b = u(rng);
  const GridField v =
      GridField::sample(g, [&](const Vec& x) { return eval_h(x, 3) + a * x[1] * x[0] + b * x[2] * x[2]; });
  const RadialProfile ps = compute_profile(v, CoefficientField::identity(3), {}, s);
  const RadialProfile pp = compute_profile(v, CoefficientField::identity(3), {}, p);
  CHECK(ps.H == pp.H);
  CHECK(ps.D == pp.D);
  CHECK(ps.N == pp.N);
}
