#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "thinobs/reference.hpp"
#include "thinobs/scenarios.hpp"
#include "thinobs/solver.hpp"

using namespace thinobs;
using std::numbers::pi;

namespace {

ScalarFn constant(double c) {
  return [c](const Vec&) { return c; };
}

ProblemSpec laplace(int dim, int nodes, ScalarFn boundary, ScalarFn obstacle = constant(0.0)) {
  return {Grid::build(dim, nodes), CoefficientField::identity(dim), std::move(obstacle),
          constant(0.0), std::move(boundary), {}};
}

double rel_l2(const GridField& v, const ScalarFn& exact) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < v.grid().node_count(); ++i) {
    const double e = exact(v.grid().position(i));
    num += (v[i] - e) * (v[i] - e);
    den += e * e;
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("energy form") {
  const ProblemSpec spec = laplace(2, 33, constant(0.0));
  const EnergyForm form = assemble_energy(spec);
  const std::size_t mid = spec.grid.index({16, 16, 0});
  const auto w = form.stencil(mid);
  REQUIRE(w.size() == 5);
  CHECK(w[0] == doctest::Approx(4.0));
  for (int k = 1; k < 5; ++k) CHECK(w[k] == doctest::Approx(-1.0));

  const EnergyForm form3 = assemble_energy(laplace(3, 33, constant(0.0)));
  const auto w3 = form3.stencil(spec.grid.index({16, 16, 0}) + 16 * 33 * 33);
  CHECK(w3[0] == doctest::Approx(6.0));

  std::vector<double> c(spec.grid.node_count(), 3.7);
  CHECK(form.energy(c) == doctest::Approx(0.0));

  const Grid g = Grid::build(2, 129);
  const EnergyForm fh = assemble_energy(laplace(2, 129, constant(0.0)));
  const GridField h = GridField::sample(g, [](const Vec& x) { return eval_h(x, 2); });
  CHECK(fh.dirichlet(h.values(), 1.0) == doctest::Approx(1.5 * pi).epsilon(0.05));
}

TEST_CASE("assembly rejects non-diagonal and invalid fields") {
  ProblemSpec spec = laplace(2, 33, constant(0.0));
  spec.field = CoefficientField(
      2,
      [](const Vec&) {
        Mat a{};
        a[0][0] = a[1][1] = 1.0;
        a[0][1] = a[1][0] = 0.1;
        return a;
      },
      0.5, 0.0, "off-diagonal");
  CHECK_THROWS_AS(assemble_energy(spec), std::invalid_argument);
}

TEST_CASE("solver parameter checks") {
  SolverParams p;
  p.omega = 2.0;
  CHECK_THROWS_AS(p.check(), std::invalid_argument);
  p.omega = 1.5;
  p.max_sweeps = 0;
  CHECK_THROWS_AS(p.check(), std::invalid_argument);
}

TEST_CASE("laplace-exact reproduces h") {
  const ProblemSpec spec = laplace(2, 129, [](const Vec& x) { return eval_h(x, 2); });
  SolverParams p{1.9};
  p.order = SweepOrder::red_black;
  const SignoriniSolution u = solve(spec, p);
  CHECK(u.residual.passed());
  CHECK(rel_l2(u.v, [](const Vec& x) { return eval_h(x, 2); }) <= 0.03);
  // The energy history never increases.
  for (std::size_t k = 1; k < u.energy_history.size(); ++k)
    CHECK(u.energy_history[k] <= u.energy_history[k - 1] + 1e-12 * std::abs(u.energy_history[0]));
}

TEST_CASE("trivial and inactive problems") {
  const SignoriniSolution zero = solve(laplace(2, 33, constant(0.0)), {1.8});
  CHECK(zero.v.max_abs() == 0.0);

  // With a low obstacle the constraint is inactive; x1 x2 + 2 is harmonic.
  auto g = [](const Vec& x) { return x[0] * x[1] + 2.0; };
  const SignoriniSolution u = solve(laplace(2, 33, g, constant(-1.0)), {1.8});
  CHECK(rel_l2(u.v, g) < 1e-6);
}

TEST_CASE("property: serial and red-black solves agree") {
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int trial = 0; trial < 3; ++trial) {
    const double a = std::abs(u(rng)), c = std::abs(u(rng));
    auto g = [a, c](const Vec& x) { return eval_h(x, 2) + a * x[0] * x[0] - a * x[1] * x[1] + c; };
    const ProblemSpec spec = laplace(2, 33, g);
    SolverParams s{1.8}, r{1.8};
    s.order = SweepOrder::lexicographic;
    r.order = SweepOrder::red_black;
    const SignoriniSolution us = solve(spec, s), ur = solve(spec, r);
    double diff = 0.0;
    for (std::size_t i = 0; i < spec.grid.node_count(); ++i)
      diff = std::max(diff, std::abs(us.v[i] - ur.v[i]));
    CHECK(diff < 1e-7);
    CHECK(us.residual.passed());
    CHECK(ur.residual.passed());
  }
}

TEST_CASE("property: the discrete solution satisfies the complementarity conditions") {
  std::mt19937 rng(37);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (int trial = 0; trial < 3; ++trial) {
    // a x_1 + |a| keeps the data above the obstacle at x_1 = -1.
    const double a = u(rng);
    auto g = [a](const Vec& x) { return eval_h(x, 2) + a * x[0] + std::abs(a); };
    const ProblemSpec spec = laplace(2, 33, g);
    const SignoriniSolution s = solve(spec, {1.8});
    const EnergyForm form = assemble_energy(spec);
    const Grid& grid = spec.grid;
    const double tol = 1e-6;
    for (std::size_t t = 0; t < grid.thin_node_count(); ++t) {
      const std::size_t i = grid.node_from_thin(t);
      if (!form.free_mask()[i]) continue;
      const double m = form.multiplier(s.v.values(), i);
      CHECK(s.v[i] >= -tol);
      CHECK(m >= -tol);
      CHECK(std::abs(s.v[i] * m) <= tol);
    }
  }
}

TEST_CASE("normalization") {
  const Grid g = Grid::build(2, 65);
  const ProblemSpec spec = laplace(2, 65, [](const Vec& x) { return eval_h(x, 2); });
  auto sol_of = [&](const ScalarFn& f) {
    SignoriniSolution s;
    s.v = GridField::sample(g, f);
    s.v.attach_one_sided_layers();
    s.residual.tol_c = 1e-9;
    return s;
  };
  // The origin is a free boundary point of h, where the upper layer alone is
  // only Holder-1/2; the mean of the two layers is the normal derivative.
  auto mean_layer = [&](const SignoriniSolution& s) {
    const std::size_t t = g.thin_from_node(g.index({32, 32, 0}));
    return 0.5 * (s.v.layers().dn_plus[t] + s.v.layers().dn_minus[t]);
  };
  const SignoriniSolution h = sol_of([](const Vec& x) { return eval_h(x, 2); });
  CHECK(std::abs(h.v.layers().dn_plus[g.thin_from_node(g.index({32, 32, 0}))]) > 0.01);
  const SignoriniSolution nh = normalize(h, spec, {0.0, 0.0, 0.0}, 0.0, mean_layer(h));
  CHECK(std::abs(nh.b) < 1e-12);
  for (std::size_t i = 0; i < g.node_count(); ++i) CHECK(nh.v[i] == doctest::Approx(h.v[i]));

  // u = h + x_n: the normal derivative from above is 1, so b = -1 recovers h.
  const SignoriniSolution lin = sol_of([](const Vec& x) { return eval_h(x, 2) + x[1]; });
  const SignoriniSolution nl = normalize(lin, spec, {0.0, 0.0, 0.0}, 0.0, mean_layer(lin));
  CHECK(nl.b == doctest::Approx(-1.0));
  double diff = 0.0;
  for (std::size_t i = 0; i < g.node_count(); ++i) diff = std::max(diff, std::abs(nl.v[i] - h.v[i]));
  CHECK(diff < 1e-12);

  CHECK_THROWS_AS(normalize(h, spec, {0.5, 0.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(normalize(h, spec, {0.0, 0.1, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(normalize(h, spec, {0.01, 0.0, 0.0}), std::invalid_argument);

  ProblemSpec obst = spec;
  obst.obstacle = [](const Vec& x) { return 0.3 - x[0] * x[0]; };
  const SignoriniSolution phi = sol_of([](const Vec& x) { return 0.3 - x[0] * x[0]; });
  const SignoriniSolution nphi = normalize(phi, obst, {0.0, 0.0, 0.0});
  CHECK(nphi.b == doctest::Approx(0.0));
  CHECK(nphi.v.max_abs() < 1e-12);
  // Induced source -L(phi) = 2 for the cap.
  CHECK(nphi.source({0.1, 0.2, 0.0}) == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("complementarity residuals") {
  const Grid g = Grid::build(2, 129);
  const CoefficientField id = CoefficientField::identity(2);
  const GridField h = GridField::sample(g, [](const Vec& x) { return eval_h(x, 2); });
  const ResidualRecord rh = residuals(h, id, 0.0);
  CHECK(rh.negative_trace <= g.spacing());
  CHECK(rh.negative_jump <= 10.0 * g.spacing());
  CHECK(rh.product <= 10.0 * g.spacing());

  const ResidualRecord r0 = residuals(GridField(g), id, 0.0);
  CHECK(r0.negative_trace == 0.0);
  CHECK(r0.negative_jump == 0.0);
  CHECK(r0.product == 0.0);

  const GridField neg = GridField::sample(g, [](const Vec& x) { return -std::abs(x[0]); });
  const ResidualRecord rn = residuals(neg, id, 0.0);
  CHECK(rn.negative_trace == doctest::Approx(1.0 - g.spacing()).epsilon(1e-9));
}

TEST_CASE("open ball mask") {
  const Grid g = Grid::build(2, 33);
  const auto mask = open_ball_mask(g);
  for (std::size_t i = 0; i < g.node_count(); ++i)
    if (mask[i]) CHECK(norm(g.position(i), 2) < 1.0);
  CHECK(mask[g.index({16, 16, 0})] == 1);
}
