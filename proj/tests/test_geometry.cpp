#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "thinobs/geometry.hpp"
#include "thinobs/reference.hpp"

using namespace thinobs;
using std::numbers::pi;

namespace {

// Polar form of h, independent of the complex-power implementation.
double h_polar(double x1, double xn) {
  const double rho = std::hypot(x1, xn);
  const double th = std::atan2(std::abs(xn), x1);
  return std::pow(rho, 1.5) * std::cos(1.5 * th);
}

}  // namespace

TEST_CASE("grid construction") {
  const Grid g = Grid::build(2, 65);
  CHECK(g.spacing() == doctest::Approx(0.03125));
  CHECK(g.node_count() == 65u * 65u);
  CHECK(g.thin_layer() == 32);
  CHECK(Grid::build(3, 65).node_count() == 65u * 65u * 65u);
  CHECK_THROWS_WITH_AS(Grid::build(2, 64), doctest::Contains("even"), std::invalid_argument);
  CHECK_THROWS_AS(Grid::build(4, 65), std::invalid_argument);
}

TEST_CASE("grid index round trip") {
  const Grid g = Grid::build(3, 33);
  std::mt19937 rng(11);
  std::uniform_int_distribution<std::size_t> pick(0, g.node_count() - 1);
  for (int k = 0; k < 200; ++k) {
    const std::size_t i = pick(rng);
    CHECK(g.index(g.multi_index(i)) == i);
    if (g.on_thin_plane(i)) {
      CHECK(g.node_from_thin(g.thin_from_node(i)) == i);
      CHECK(g.position(i)[2] == 0.0);
    }
  }
}

TEST_CASE("interpolation") {
  const Grid g = Grid::build(2, 65);
  const GridField seven = GridField::sample(g, [](const Vec&) { return 7.0; });
  CHECK(interpolate(seven, {0.123, -0.77, 0.0}) == doctest::Approx(7.0));
  const GridField x1 = GridField::sample(g, [](const Vec& x) { return x[0]; });
  CHECK(interpolate(x1, {0.3, 0.2, 0.0}) == doctest::Approx(0.3).epsilon(1e-12));

  const GridField h = GridField::sample(g, [](const Vec& x) { return eval_h(x, 2); });
  const double exact = h_polar(0.5, 0.5);
  CHECK(exact == doctest::Approx(0.2276).epsilon(1e-3));
  CHECK(std::abs(interpolate(h, {0.5, 0.5, 0.0}) - exact) < 4.0 * g.spacing() * g.spacing());
  CHECK_THROWS_AS(interpolate(h, {1.2, 0.0, 0.0}), std::out_of_range);
}

TEST_CASE("property: multilinear interpolation reproduces affine functions") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int dim : {2, 3}) {
    const Grid g = Grid::build(dim, 33);
    for (int trial = 0; trial < 20; ++trial) {
      const double c0 = u(rng), c1 = u(rng), c2 = u(rng), c3 = u(rng);
      auto f = [&](const Vec& x) { return c0 + c1 * x[0] + c2 * x[1] + c3 * x[2]; };
      const GridField field = GridField::sample(g, f);
      const Vec x{u(rng), u(rng), dim == 3 ? u(rng) : 0.0};
      CHECK(interpolate(field, x) == doctest::Approx(f(x)).epsilon(1e-10));
    }
  }
}

TEST_CASE("h closed form") {
  CHECK(eval_h({1.0, 0.0, 0.0}, 2) == doctest::Approx(1.0));
  CHECK(std::abs(eval_h({-1.0, 0.0, 0.0}, 2)) < 1e-12);
  CHECK(eval_h({0.0, 1.0, 0.0}, 2) == doctest::Approx(-std::sqrt(0.5)));
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 100; ++k) {
    const double a = u(rng), b = u(rng);
    CHECK(eval_h({a, b, 0.0}, 2) == doctest::Approx(h_polar(a, b)).epsilon(1e-12));
    CHECK(eval_h({a, 0.3, b}, 3) == doctest::Approx(h_polar(a, b)).epsilon(1e-12));
  }
  // One-sided difference of h as oracle for the normal derivative.
  const double s = 1e-7;
  CHECK(dn_plus_h(-0.25) == doctest::Approx((eval_h({-0.25, s, 0}, 2) - eval_h({-0.25, 0, 0}, 2)) / s)
                                .epsilon(1e-5));
  CHECK(dn_plus_h(-0.25) == doctest::Approx(-0.75));
  CHECK(dn_plus_h(0.5) == 0.0);
  CHECK(dn_plus_h(0.0) == 0.0);
}

TEST_CASE("sphere rules") {
  const SphereRule c = unit_sphere_rule(2, 720);
  CHECK(c.total_weight() == doctest::Approx(2.0 * pi).epsilon(1e-12));
  const double h2 = c.integrate([](const Vec& x) { return std::pow(eval_h(x, 2), 2); });
  CHECK(std::abs(h2 - pi) < 1e-6);

  const Grid g3 = Grid::build(3, 65);
  const SphereRule s = sphere_rule(g3, 0.5);
  CHECK(std::abs(s.total_weight() - pi) < 1e-8);
  CHECK_THROWS(sphere_rule(g3, 0.01));
}

TEST_CASE("property: sphere rule integrates low-degree polynomials") {
  // int_{S^2} x^{2a} y^{2b} z^{2c} by the Beta-function formula.
  auto moment = [](int a, int b, int c) {
    auto g = [](double t) { return std::tgamma(t); };
    return 2.0 * g(a + 0.5) * g(b + 0.5) * g(c + 0.5) / g(a + b + c + 1.5);
  };
  const SphereRule s = unit_sphere_rule(3);
  std::mt19937 rng(17);
  std::uniform_int_distribution<int> d(0, 3);
  for (int k = 0; k < 20; ++k) {
    const int a = d(rng), b = d(rng), c = d(rng);
    const double q = s.integrate([&](const Vec& x) {
      return std::pow(x[0], 2 * a) * std::pow(x[1], 2 * b) * std::pow(x[2], 2 * c);
    });
    CHECK(q == doctest::Approx(moment(a, b, c)).epsilon(1e-9));
  }
}

TEST_CASE("ball quadrature") {
  const Grid g = Grid::build(2, 129);
  const GridField one = GridField::sample(g, [](const Vec&) { return 1.0; });
  CHECK(std::abs(ball_integral(one, 1.0) - pi) < 2.0 * g.spacing());
  const GridField zero(g);
  CHECK(ball_integral(zero, 1.0) == 0.0);
  const GridField grad2 = GridField::sample(g, [](const Vec& x) { return 2.25 * norm(x, 2); });
  CHECK(ball_integral(grad2, 1.0) == doctest::Approx(1.5 * pi).epsilon(0.05));
}

TEST_CASE("property: ball quadrature serial and parallel paths agree bitwise") {
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int dim : {2, 3}) {
    const Grid g = Grid::build(dim, 33);
    const BallQuadrature q(g);
    for (int trial = 0; trial < 5; ++trial) {
      const double a = u(rng), b = u(rng);
      auto f = [&](const Vec& x) { return std::exp(a * x[0]) * std::cos(b * x[1]) + x[dim - 1]; };
      const std::vector<double> radii{0.9, 0.5, 0.25};
      CHECK(q.integrate(radii, f, Execution::serial) == q.integrate(radii, f, Execution::parallel));
    }
  }
}

TEST_CASE("property: ball quadrature of |x|^2 converges to the polar integral") {
  std::mt19937 rng(29);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  const Grid g = Grid::build(3, 65);
  const BallQuadrature q(g);
  for (int k = 0; k < 5; ++k) {
    const double r = u(rng);
    const double got = q.integrate(r, [](const Vec& x) { return dot(x, x, 3); });
    CHECK(got == doctest::Approx(4.0 * pi * std::pow(r, 5) / 5.0).epsilon(0.02));
  }
}

TEST_CASE("geometric ladder") {
  const auto r = geometric_ladder(0.9, 0.93, 0.1);
  REQUIRE(r.size() > 2);
  CHECK(r.front() == doctest::Approx(0.9));
  for (std::size_t k = 1; k < r.size(); ++k) {
    CHECK(r[k] == doctest::Approx(r[k - 1] * 0.93));
    CHECK(r[k] >= 0.1);
  }
  CHECK(r.back() * 0.93 < 0.1);
  CHECK_THROWS(geometric_ladder(0.9, 1.2, 0.1));
  CHECK_THROWS(geometric_ladder(0.9, 0.93, 0.0));
}
