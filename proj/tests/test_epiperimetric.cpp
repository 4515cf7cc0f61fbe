#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "thinobs/epiperimetric.hpp"
#include "thinobs/reference.hpp"

using namespace thinobs;
using std::numbers::pi;

namespace {

const Grid& g2() {
  static const Grid g = Grid::build(2, 129);
  return g;
}

double hfun(const Vec& x) { return eval_h(x, 2); }

double theta_of(const Vec& x) { return std::atan2(std::abs(x[1]), x[0]); }

}  // namespace

TEST_CASE("boundary adjusted energy") {
  const GridField h = GridField::sample(g2(), hfun);
  const double wh = boundary_adjusted_energy(h);
  CHECK(std::abs(wh) <= 0.05 * 1.5 * pi);
  const GridField one = GridField::sample(g2(), [](const Vec&) { return 1.0; });
  CHECK(boundary_adjusted_energy(one) == doctest::Approx(-1.5 * 2.0 * pi).epsilon(1e-6));

  const BallFaceWeights fw = BallFaceWeights::build(g2());
  for (double c : {0.5, 3.0}) {
    const GridField ch = GridField::sample(g2(), [c](const Vec& x) { return c * eval_h(x, 2); });
    CHECK(boundary_adjusted_energy(ch, fw) == doctest::Approx(c * c * wh).epsilon(1e-10));
  }
}

TEST_CASE("homogeneous extension") {
  const GridField w = homogeneous_extension(g2(), hfun);
  for (std::size_t i = 0; i < g2().node_count(); i += 7)
    CHECK(w[i] == doctest::Approx(hfun(g2().position(i))).epsilon(1e-12).scale(1.0));
  const GridField one = homogeneous_extension(g2(), [](const Vec&) { return 1.0; });
  for (std::size_t i = 0; i < g2().node_count(); i += 7)
    CHECK(one[i] == doctest::Approx(std::pow(norm(g2().position(i), 2), 1.5)));
}

TEST_CASE("property: the extension is 3/2-homogeneous") {
  std::mt19937 rng(71);
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  auto trace = [](const Vec& x) { return 1.0 + 0.3 * std::cos(3.0 * theta_of(x)); };
  const GridField w = homogeneous_extension(g2(), trace);
  for (int k = 0; k < 50; ++k) {
    Vec x{u(rng), u(rng), 0.0};
    if (norm(x, 2) < 0.3 || norm(x, 2) > 0.99) continue;
    for (double lam : {0.5, 0.25}) {
      const Vec y{lam * x[0], lam * x[1], 0.0};
      const double want = std::pow(lam, 1.5) * w.value(x);
      // Linear interpolation error of a 3/2-homogeneous function near the origin.
      CHECK(std::abs(w.value(y) - want) <= 0.01 + 0.1 * std::abs(want));
    }
  }
}

TEST_CASE("property: sphere formula matches the grid energy of the extension") {
  std::mt19937_64 rng(73);
  const BallFaceWeights fw = BallFaceWeights::build(g2());
  for (int k = 0; k < 5; ++k) {
    RandomTrace tr = draw_trace(2, rng);
    tr.t = 0.5;
    const Trace g = tr.trace();
    const double sphere = homogeneous_energy(g, 2);
    const double grid = boundary_adjusted_energy(homogeneous_extension(g2(), g), fw);
    CHECK(grid == doctest::Approx(sphere).epsilon(0.05).scale(0.05));
  }
}

TEST_CASE("minimizer") {
  const SolverParams sp{1.9};
  const SignoriniSolution z = minimizer_zeta(g2(), hfun, sp);
  double diff = 0.0;
  for (std::size_t i = 0; i < g2().node_count(); ++i)
    if (g2().in_ball(i)) diff = std::max(diff, std::abs(z.v[i] - hfun(g2().position(i))));
  CHECK(diff < 0.01);

  const SignoriniSolution zero = minimizer_zeta(g2(), [](const Vec&) { return 0.0; }, sp);
  CHECK(zero.v.max_abs() == 0.0);

  CHECK_THROWS_WITH_AS(minimizer_zeta(g2(), [](const Vec& x) { return -0.1 + 0.0 * x[0]; }, sp),
                       doctest::Contains("infeasible trace"), std::invalid_argument);
}

TEST_CASE("minimizer with an inactive constraint is the harmonic extension") {
  const Grid g = Grid::build(2, 65);
  auto trace = [](const Vec& x) { return eval_h(x, 2) + 1.0; };
  const SolverParams sp{1.9};
  const SignoriniSolution z = minimizer_zeta(g, trace, sp);
  // Brute-force oracle: the same Dirichlet problem with the obstacle far below.
  const GridField w = homogeneous_extension(g, trace);
  const ProblemSpec spec{g,
                         CoefficientField::identity(2),
                         [](const Vec&) { return -100.0; },
                         [](const Vec&) { return 0.0; },
                         [&w](const Vec& x) { return w.value(x); },
                         open_ball_mask(g)};
  const SignoriniSolution harmonic = solve(spec, sp);
  double diff = 0.0;
  for (std::size_t i = 0; i < g.node_count(); ++i) diff = std::max(diff, std::abs(z.v[i] - harmonic.v[i]));
  CHECK(diff < 1e-7);
  const BallFaceWeights fw = BallFaceWeights::build(g);
  CHECK(boundary_adjusted_energy(z.v, fw) < boundary_adjusted_energy(w, fw));
}

TEST_CASE("epiperimetric checks") {
  CHECK(epi_tolerance(2) == doctest::Approx(1e-3 * 1.5 * pi).epsilon(1e-9));

  const EpiReport eh = epi_check(g2(), hfun);
  CHECK_FALSE(eh.kappa.has_value());
  CHECK(eh.distance_to_h < 1e-9);
  CHECK(eh.in_hypothesis);

  // h is critical, so W grows quadratically in the amplitude of a tilt and a
  // 5% tilt stays under the noise tolerance; 20% clears it.
  auto tilt = [](double amp) {
    return [amp](const Vec& x) { return eval_h(x, 2) * (1.0 + amp * std::cos(theta_of(x))); };
  };
  const EpiReport small = epi_check(g2(), tilt(0.05));
  CHECK_FALSE(small.kappa.has_value());
  const EpiReport et = epi_check(g2(), tilt(0.2));
  CHECK(et.W_w == doctest::Approx(4.0 * epi_check(g2(), tilt(0.1)).W_w).epsilon(0.1));
  REQUIRE(et.kappa.has_value());
  CHECK(*et.kappa > 0.0);
  CHECK(et.W_zeta <= et.W_w);
}

TEST_CASE("property: random traces satisfy the energy inequality") {
  std::mt19937_64 rng(79);
  const Grid g = Grid::build(2, 65);
  for (int k = 0; k < 6; ++k) {
    RandomTrace tr = draw_trace(2, rng);
    tr.t = 0.3;
    const EpiReport r = epi_check(g, tr.trace());
    CHECK(r.W_zeta <= r.W_w + 1e-12);
  }
}

TEST_CASE("homogeneous distance") {
  // s = c h: the distance is |c| times the W^{1,2} norm of h, whose square is
  // D(h,1) + int_{B_1} h^2 = 3 pi / 2 + pi / 4 in two dimensions.
  const double c = 0.1;
  const double d = homogeneous_distance([c](const Vec& x) { return c * eval_h(x, 2); }, 2);
  CHECK(d == doctest::Approx(c * std::sqrt(1.5 * pi + 0.25 * pi)).epsilon(1e-6));
}

TEST_CASE("batch") {
  EpiParams p;
  p.count = 3;
  const Grid g = Grid::build(2, 65);
  const EpiBatch a = epi_batch(g, p), b = epi_batch(g, p);
  REQUIRE(a.accepted.size() == 3u);
  CHECK(a.all_positive);
  CHECK(a.min_kappa > 0.0);
  for (std::size_t k = 0; k < 3; ++k) {
    const EpiReport& r = a.accepted[k].report;
    CHECK(r.distance_to_h >= p.distance_min - 1e-9);
    CHECK(r.distance_to_h <= p.theta + 1e-9);
    CHECK(r.W_w > r.tol_W);
    CHECK(*r.kappa == *b.accepted[k].report.kappa);
  }
}

TEST_CASE("first variation") {
  const Bump right{{0.5, 0.0, 0.0}, 0.25, 2};
  const auto [l0, r0] = first_variation(right);
  CHECK(std::abs(r0) < 1e-12);
  CHECK(std::abs(l0) < 1e-6);

  const Bump left{{-0.5, 0.0, 0.0}, 0.3, 2};
  const auto [l1, r1] = first_variation(left);
  CHECK(l1 == doctest::Approx(r1).epsilon(0.03));
  // Right side by a dense midpoint rule: -4 int phi dn+h = 6 int phi sqrt(-x1).
  const int m = 200000;
  double oracle = 0.0;
  const double a = -0.8, b = -0.2, dx = (b - a) / m;
  for (int i = 0; i < m; ++i) {
    const double x1 = a + (i + 0.5) * dx;
    oracle += -4.0 * left.value({x1, 0.0, 0.0}) * dn_plus_h(x1) * dx;
  }
  CHECK(r1 == doctest::Approx(oracle).epsilon(1e-6));
}

TEST_CASE("property: first variation sides agree for random bumps") {
  std::mt19937 rng(83);
  std::uniform_real_distribution<double> cx(-0.6, 0.3), cy(-0.3, 0.3), rad(0.15, 0.35);
  for (int k = 0; k < 6; ++k) {
    const Bump b{{cx(rng), cy(rng), 0.0}, rad(rng), 2};
    if (norm(b.center, 2) + b.radius > 0.95) continue;
    const auto [l, r] = first_variation(b);
    CHECK(l == doctest::Approx(r).epsilon(0.03).scale(1e-6));
  }
}

TEST_CASE("bump gradient") {
  const Bump b{{0.1, -0.2, 0.0}, 0.4, 2};
  const Vec x{0.2, -0.1, 0.0};
  const Vec g = b.gradient(x);
  for (int j = 0; j < 2; ++j) {
    Vec p = x, q = x;
    p[j] += 1e-6;
    q[j] -= 1e-6;
    CHECK(g[j] == doctest::Approx((b.value(p) - b.value(q)) / 2e-6).epsilon(1e-5));
  }
}
