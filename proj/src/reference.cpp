#include "thinobs/reference.hpp"

#include <complex>

namespace thinobs {

namespace {

// Re z^{3/2} and the derivatives with respect to Re z and Im z, for z in the
// closed upper half-plane (principal branch).
struct Branch {
  double value, d_re, d_im;
};

Branch three_halves(double t, double s) {
  const std::complex<double> z(t, s);
  if (z == 0.0) return {0.0, 0.0, 0.0};
  const std::complex<double> root = std::sqrt(z);
  const std::complex<double> p = z * root;
  return {p.real(), 1.5 * root.real(), -1.5 * root.imag()};
}

}  // namespace

double eval_h(const Vec& x, int dim) { return three_halves(x[0], std::abs(x[dim - 1])).value; }

double dn_plus_h(double x1) { return x1 < 0.0 ? -1.5 * std::sqrt(-x1) : 0.0; }

Vec thin_direction(int dim, double angle) {
  if (dim == 2) return {std::cos(angle) >= 0.0 ? 1.0 : -1.0, 0.0, 0.0};
  return {std::cos(angle), std::sin(angle), 0.0};
}

double thin_angle_between(const Vec& a, const Vec& b, int dim) {
  const double c = dot(a, b, dim - 1) / (norm(a, dim - 1) * norm(b, dim - 1));
  return std::acos(std::clamp(c, -1.0, 1.0));
}

Vec FamilyMember::nu() const { return thin_direction(dim, angle); }

double FamilyMember::value(const Vec& x) const {
  const Vec n = nu();
  return a * three_halves(dot(x, n, dim - 1), std::abs(x[dim - 1])).value;
}

Vec FamilyMember::gradient(const Vec& x) const {
  const Vec n = nu();
  const double xn = x[dim - 1];
  const Branch b = three_halves(dot(x, n, dim - 1), std::abs(xn));
  Vec g{0.0, 0.0, 0.0};
  for (int k = 0; k < dim - 1; ++k) g[k] = a * b.d_re * n[k];
  g[dim - 1] = a * b.d_im * (xn < 0.0 ? -1.0 : 1.0);
  return g;
}

}  // namespace thinobs
