#pragma once

#include <functional>
#include <string>

#include "thinobs/geometry.hpp"

namespace thinobs {

using ScalarFn = std::function<double(const Vec&)>;

/// Symmetric matrix field A(x) with its declared ellipticity constant
/// lambda in (0,1] and Lipschitz constant Q >= 0.
class CoefficientField {
 public:
  using Evaluator = std::function<Mat(const Vec&)>;

  CoefficientField() = default;
  CoefficientField(int dim, Evaluator eval, double lambda, double lipschitz, std::string name,
                   bool diagonal = false);

  static CoefficientField identity(int dim);

  Mat operator()(const Vec& x) const { return eval_(x); }
  int dim() const noexcept { return dim_; }
  double ellipticity() const noexcept { return lambda_; }
  double lipschitz() const noexcept { return lipschitz_; }
  const std::string& name() const noexcept { return name_; }
  /// True when the field is declared diagonal everywhere.
  bool diagonal() const noexcept { return diagonal_; }
  bool is_identity() const noexcept { return identity_; }

 private:
  int dim_ = 0;
  Evaluator eval_;
  double lambda_ = 1.0;
  double lipschitz_ = 0.0;
  std::string name_;
  bool diagonal_ = false;
  bool identity_ = false;
};

struct ValidationReport {
  double symmetry_defect = 0.0;     // max |a_ij - a_ji|
  double min_eigenvalue = 0.0;      // must be >= lambda
  double max_eigenvalue = 0.0;      // must be <= 1/lambda
  double lipschitz_quotient = 0.0;  // max |a_ij(x) - a_ij(y)| / |x - y|
  double thin_offdiagonal = 0.0;    // max |a_in(x', 0)|, i < n
  bool passed = true;
  std::string violation;  // empty when passed
};

/// Checks symmetry, ellipticity, the Lipschitz bound and the thin-plane
/// conormal condition on a deterministic nested sample of the box: the
/// first k samples of a larger run are exactly the k-sample run.
ValidationReport validate(const CoefficientField& field, int sample_count);

/// Throws std::invalid_argument naming the violated assumption.
void require_valid(const CoefficientField& field, int sample_count = 256);

/// mu(x) = <A(x)x, x> / |x|^2, equal to 1 at the origin.
double conformal_mu(const CoefficientField& field, const Vec& x);

/// Z(x) = A(x)x / mu(x).
Vec vector_Z(const CoefficientField& field, const Vec& x);

/// Symmetric positive-definite square root; throws std::domain_error for
/// a non-SPD matrix.
Mat matrix_sqrt(const Mat& a, int dim);
Mat matrix_sqrt(const CoefficientField& field, const Vec& x0);
Mat matrix_inverse(const Mat& a, int dim);
Mat matmul(const Mat& a, const Mat& b, int dim);
Vec matvec(const Mat& a, const Vec& x, int dim);

/// div(A grad|x|) by centred differences of the flux with Richardson
/// extrapolation between steps s and s/2. Throws at the origin.
double div_A_grad_r(const CoefficientField& field, const Vec& x, double step);

/// div(A grad psi) for a scalar function psi, same differencing.
double div_A_grad(const CoefficientField& field, const ScalarFn& psi, const Vec& x, double step);

}  // namespace thinobs
