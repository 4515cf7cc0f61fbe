#include <doctest.h>

#include <cmath>
#include <random>

#include "thinobs/coefficients.hpp"

using namespace thinobs;

namespace {

CoefficientField diag_1_1px2() {
  return CoefficientField(
      2,
      [](const Vec& x) {
        Mat a{};
        a[0][0] = 1.0;
        a[1][1] = 1.0 + x[0] * x[0];
        return a;
      },
      0.5, 2.0, "diag(1, 1+x1^2)", true);
}

CoefficientField constant(const Mat& m, int dim, double lambda) {
  return CoefficientField(dim, [m](const Vec&) { return m; }, lambda, 0.0, "constant");
}

// Brute-force flux divergence: central differences of the flux A grad psi,
// with the gradient itself taken by central differences at step s.
double flux_divergence(const CoefficientField& a, const std::function<double(const Vec&)>& psi,
                       const Vec& x, int dim, double s) {
  auto grad = [&](const Vec& y) {
    Vec g{0, 0, 0};
    for (int k = 0; k < dim; ++k) {
      Vec p = y, m = y;
      p[k] += s;
      m[k] -= s;
      g[k] = (psi(p) - psi(m)) / (2 * s);
    }
    return g;
  };
  double div = 0.0;
  for (int k = 0; k < dim; ++k) {
    Vec p = x, m = x;
    p[k] += s;
    m[k] -= s;
    const Vec fp = matvec(a(p), grad(p), dim), fm = matvec(a(m), grad(m), dim);
    div += (fp[k] - fm[k]) / (2 * s);
  }
  return div;
}

}  // namespace

TEST_CASE("validation") {
  const ValidationReport id = validate(CoefficientField::identity(2), 256);
  CHECK(id.passed);
  CHECK(id.symmetry_defect == 0.0);
  CHECK(id.min_eigenvalue == doctest::Approx(1.0));
  CHECK(id.lipschitz_quotient == 0.0);
  CHECK(id.thin_offdiagonal == 0.0);

  const ValidationReport d = validate(diag_1_1px2(), 512);
  CHECK(d.passed);
  CHECK(d.min_eigenvalue >= 1.0 - 1e-12);
  CHECK(d.max_eigenvalue <= 2.0 + 1e-12);
  CHECK(d.lipschitz_quotient <= 2.0 + 1e-12);

  Mat m{};
  m[0][0] = m[1][1] = 1.0;
  m[0][1] = m[1][0] = 0.1;
  const ValidationReport bad = validate(constant(m, 2, 0.5), 64);
  CHECK_FALSE(bad.passed);
  CHECK(bad.violation.find("conormal") != std::string::npos);
  CHECK_THROWS_AS(require_valid(constant(m, 2, 0.5)), std::invalid_argument);

  Mat big{};
  big[0][0] = 3.0;
  big[1][1] = 1.0;
  CHECK_FALSE(validate(constant(big, 2, 0.5), 16).passed);
}

TEST_CASE("property: validation samples are nested") {
  const CoefficientField f = diag_1_1px2();
  for (int k : {16, 64, 200}) {
    const ValidationReport a = validate(f, k), b = validate(f, 2 * k);
    CHECK(b.lipschitz_quotient >= a.lipschitz_quotient);
    CHECK(b.max_eigenvalue >= a.max_eigenvalue);
    CHECK(b.min_eigenvalue <= a.min_eigenvalue);
  }
}

TEST_CASE("conformal factor and Z") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    const Vec x{u(rng), u(rng), u(rng)};
    CHECK(conformal_mu(CoefficientField::identity(3), x) == doctest::Approx(1.0));
    const Vec z = vector_Z(CoefficientField::identity(3), x);
    for (int i = 0; i < 3; ++i) CHECK(z[i] == doctest::Approx(x[i]));
  }
  const double s = 1.0 / std::sqrt(2.0);
  CHECK(conformal_mu(diag_1_1px2(), {s, s, 0.0}) == doctest::Approx(1.25));
  CHECK(conformal_mu(diag_1_1px2(), {1.0, 0.0, 0.0}) == doctest::Approx(1.0));

  Mat d12{};
  d12[0][0] = 1.0;
  d12[1][1] = 2.0;
  const CoefficientField c = constant(d12, 2, 0.5);
  const Vec z1 = vector_Z(c, {1.0, 0.0, 0.0}), z2 = vector_Z(c, {0.0, 1.0, 0.0});
  CHECK(z1[0] == doctest::Approx(1.0));
  CHECK(z1[1] == doctest::Approx(0.0));
  CHECK(z2[0] == doctest::Approx(0.0));
  CHECK(z2[1] == doctest::Approx(1.0));
}

TEST_CASE("matrix square root") {
  Mat d{};
  d[0][0] = 4.0;
  d[1][1] = 9.0;
  const Mat r = matrix_sqrt(d, 2);
  CHECK(r[0][0] == doctest::Approx(2.0));
  CHECK(r[1][1] == doctest::Approx(3.0));
  CHECK(r[0][1] == doctest::Approx(0.0));

  Mat indefinite{};
  indefinite[0][0] = 1.0;
  indefinite[1][1] = -1.0;
  CHECK_THROWS_AS(matrix_sqrt(indefinite, 2), std::domain_error);
}

TEST_CASE("property: square root squares back and inverse inverts") {
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int dim = 2 + trial % 2;
    Mat b{};
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) b[i][j] = u(rng);
    Mat a{};  // B B^T + I is SPD
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) {
        for (int k = 0; k < dim; ++k) a[i][j] += b[i][k] * b[j][k];
        a[i][j] += i == j ? 1.0 : 0.0;
      }
    const Mat s = matrix_sqrt(a, dim);
    const Mat ss = matmul(s, s, dim);
    const Mat ai = matmul(a, matrix_inverse(a, dim), dim);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) {
        CHECK(ss[i][j] == doctest::Approx(a[i][j]).epsilon(1e-10));
        CHECK(s[i][j] == doctest::Approx(s[j][i]).epsilon(1e-12));
        CHECK(ai[i][j] == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-10).scale(1.0));
      }
  }
}

TEST_CASE("div(A grad |x|)") {
  CHECK(div_A_grad_r(CoefficientField::identity(2), {0.3, 0.4, 0.0}, 1e-3) ==
        doctest::Approx(2.0).epsilon(1e-4));
  CHECK(div_A_grad_r(CoefficientField::identity(3), {0.0, 0.3, 0.4}, 1e-3) ==
        doctest::Approx(4.0).epsilon(1e-4));
  CHECK(div_A_grad_r(CoefficientField::identity(3), {0.25, 0.0, 0.0}, 1e-3) ==
        doctest::Approx(8.0).epsilon(1e-4));
  CHECK_THROWS(div_A_grad_r(CoefficientField::identity(2), {0.0, 0.0, 0.0}, 1e-3));

  const CoefficientField p(
      2,
      [](const Vec& x) {
        Mat a{};
        a[0][0] = a[1][1] = 1.0 + 0.1 * x[0];
        return a;
      },
      0.8, 0.1, "I + 0.1 x1 I", true);
  const Vec x{0.2, 0.1, 0.0};
  const double oracle = flux_divergence(p, [](const Vec& y) { return norm(y, 2); }, x, 2, 5e-4);
  CHECK(div_A_grad_r(p, x, 1e-3) == doctest::Approx(oracle).epsilon(0.01));
}

TEST_CASE("property: div(A grad psi) matches brute-force flux divergence") {
  std::mt19937 rng(41);
  std::uniform_real_distribution<double> u(-0.7, 0.7);
  const CoefficientField f = diag_1_1px2();
  auto psi = [](const Vec& y) { return std::sin(y[0]) * std::exp(y[1]) + y[0] * y[0] * y[1]; };
  for (int k = 0; k < 20; ++k) {
    const Vec x{u(rng), u(rng), 0.0};
    const double oracle = flux_divergence(f, psi, x, 2, 2e-4);
    CHECK(div_A_grad(f, psi, x, 1e-3) == doctest::Approx(oracle).epsilon(1e-3).scale(1.0));
  }
}
