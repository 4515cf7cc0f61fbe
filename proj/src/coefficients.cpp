#include "thinobs/coefficients.hpp"

#include <Eigen/Dense>
#include <random>
#include <sstream>

namespace thinobs {

CoefficientField::CoefficientField(int dim, Evaluator eval, double lambda, double lipschitz,
                                   std::string name, bool diagonal)
    : dim_(dim),
      eval_(std::move(eval)),
      lambda_(lambda),
      lipschitz_(lipschitz),
      name_(std::move(name)),
      diagonal_(diagonal) {
  if (dim != 2 && dim != 3) throw std::invalid_argument("coefficient dimension must be 2 or 3");
  if (!(lambda > 0.0 && lambda <= 1.0))
    throw std::invalid_argument("ellipticity constant must lie in (0, 1]");
  if (lipschitz < 0.0) throw std::invalid_argument("Lipschitz constant must be >= 0");
}

CoefficientField CoefficientField::identity(int dim) {
  CoefficientField f(
      dim,
      [dim](const Vec&) {
        Mat a{};
        for (int k = 0; k < dim; ++k) a[k][k] = 1.0;
        return a;
      },
      1.0, 0.0, "identity", true);
  f.identity_ = true;
  return f;
}

namespace {

Eigen::MatrixXd to_eigen(const Mat& a, int dim) {
  Eigen::MatrixXd m(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) m(i, j) = a[i][j];
  return m;
}

Mat from_eigen(const Eigen::MatrixXd& m) {
  Mat a{};
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) a[i][j] = m(i, j);
  return a;
}

Vec random_point(std::mt19937_64& rng, int dim, bool thin) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Vec x{0.0, 0.0, 0.0};
  for (int k = 0; k < dim; ++k) x[k] = u(rng);
  if (thin) x[dim - 1] = 0.0;
  return x;
}

}  // namespace

ValidationReport validate(const CoefficientField& field, int sample_count) {
  const int dim = field.dim();
  const double lambda = field.ellipticity();
  ValidationReport rep;
  rep.min_eigenvalue = std::numeric_limits<double>::infinity();
  rep.max_eigenvalue = 0.0;
  std::mt19937_64 rng(0x5eed0001ULL);
  std::uniform_real_distribution<double> dir(-1.0, 1.0);

  for (int s = 0; s < sample_count; ++s) {
    const Vec x = random_point(rng, dim, false);
    const Mat a = field(x);
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j)
        rep.symmetry_defect = std::max(rep.symmetry_defect, std::abs(a[i][j] - a[j][i]));
    Eigen::MatrixXd m = to_eigen(a, dim);
    Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    rep.min_eigenvalue = std::min(rep.min_eigenvalue, es.eigenvalues().minCoeff());
    rep.max_eigenvalue = std::max(rep.max_eigenvalue, es.eigenvalues().maxCoeff());

    // Lipschitz quotient from a nearby and a far partner.
    Vec near = x;
    for (int k = 0; k < dim; ++k) near[k] = std::clamp(x[k] + 1e-3 * dir(rng), -1.0, 1.0);
    const Vec far = random_point(rng, dim, false);
    for (const Vec& y : {near, far}) {
      Vec d{0.0, 0.0, 0.0};
      for (int k = 0; k < dim; ++k) d[k] = x[k] - y[k];
      const double dist = norm(d, dim);
      if (dist < 1e-12) continue;
      const Mat b = field(y);
      for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j)
          rep.lipschitz_quotient =
              std::max(rep.lipschitz_quotient, std::abs(a[i][j] - b[i][j]) / dist);
    }

    const Vec xt = random_point(rng, dim, true);
    const Mat at = field(xt);
    for (int i = 0; i < dim - 1; ++i)
      rep.thin_offdiagonal = std::max(
          {rep.thin_offdiagonal, std::abs(at[i][dim - 1]), std::abs(at[dim - 1][i])});
  }

  constexpr double tol = 1e-12;
  std::ostringstream why;
  if (rep.symmetry_defect > tol) {
    why << "symmetry violated: max |a_ij - a_ji| = " << rep.symmetry_defect;
  } else if (rep.min_eigenvalue < lambda - tol || rep.max_eigenvalue > 1.0 / lambda + tol) {
    why << "uniform ellipticity violated: eigenvalues in [" << rep.min_eigenvalue << ", "
        << rep.max_eigenvalue << "] outside [" << lambda << ", " << 1.0 / lambda << "]";
  } else if (rep.lipschitz_quotient > field.lipschitz() * (1.0 + 1e-9) + tol) {
    why << "Lipschitz bound violated: quotient " << rep.lipschitz_quotient << " > declared "
        << field.lipschitz();
  } else if (rep.thin_offdiagonal > tol) {
    why << "thin-plane conormal condition violated: max |a_in(x',0)| = " << rep.thin_offdiagonal;
  }
  rep.violation = why.str();
  rep.passed = rep.violation.empty();
  return rep;
}

void require_valid(const CoefficientField& field, int sample_count) {
  const ValidationReport rep = validate(field, sample_count);
  if (!rep.passed)
    throw std::invalid_argument("coefficient field '" + field.name() + "': " + rep.violation);
}

double conformal_mu(const CoefficientField& field, const Vec& x) {
  const int dim = field.dim();
  const double r2 = dot(x, x, dim);
  if (r2 == 0.0) return 1.0;
  return dot(matvec(field(x), x, dim), x, dim) / r2;
}

Vec vector_Z(const CoefficientField& field, const Vec& x) {
  const int dim = field.dim();
  Vec ax = matvec(field(x), x, dim);
  const double mu = conformal_mu(field, x);
  for (int k = 0; k < dim; ++k) ax[k] /= mu;
  return ax;
}

Mat matmul(const Mat& a, const Mat& b, int dim) {
  Mat c{};
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      for (int k = 0; k < dim; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

Vec matvec(const Mat& a, const Vec& x, int dim) {
  Vec y{0.0, 0.0, 0.0};
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) y[i] += a[i][j] * x[j];
  return y;
}

Mat matrix_sqrt(const Mat& a, int dim) {
  Eigen::MatrixXd m = to_eigen(a, dim);
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff()))
    throw std::domain_error("matrix square root requires a symmetric matrix");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw std::domain_error("matrix square root requires a positive-definite matrix");
  const Eigen::MatrixXd root =
      es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
  return from_eigen(0.5 * (root + root.transpose()));
}

Mat matrix_sqrt(const CoefficientField& field, const Vec& x0) {
  return matrix_sqrt(field(x0), field.dim());
}

Mat matrix_inverse(const Mat& a, int dim) {
  const Eigen::MatrixXd m = to_eigen(a, dim);
  return from_eigen(m.inverse());
}

namespace {

template <class Flux>
double centred_divergence(const Flux& flux, const Vec& x, double step, int dim) {
  auto div = [&](double s) {
    double d = 0.0;
    for (int k = 0; k < dim; ++k) {
      Vec xp = x, xm = x;
      xp[k] += s;
      xm[k] -= s;
      d += (flux(xp)[k] - flux(xm)[k]) / (2.0 * s);
    }
    return d;
  };
  return (4.0 * div(0.5 * step) - div(step)) / 3.0;
}

}  // namespace

double div_A_grad_r(const CoefficientField& field, const Vec& x, double step) {
  const int dim = field.dim();
  if (norm(x, dim) == 0.0) throw std::domain_error("div(A grad r) is undefined at the origin");
  auto flux = [&](const Vec& y) {
    const double r = norm(y, dim);
    Vec g{0.0, 0.0, 0.0};
    for (int k = 0; k < dim; ++k) g[k] = y[k] / r;
    return matvec(field(y), g, dim);
  };
  return centred_divergence(flux, x, step, dim);
}

double div_A_grad(const CoefficientField& field, const ScalarFn& psi, const Vec& x, double step) {
  const int dim = field.dim();
  auto flux = [&](const Vec& y) {
    Vec g{0.0, 0.0, 0.0};
    const double s = 0.25 * step;
    for (int k = 0; k < dim; ++k) {
      Vec yp = y, ym = y;
      yp[k] += s;
      ym[k] -= s;
      g[k] = (psi(yp) - psi(ym)) / (2.0 * s);
    }
    return matvec(field(y), g, dim);
  };
  return centred_divergence(flux, x, step, dim);
}

}  // namespace thinobs
