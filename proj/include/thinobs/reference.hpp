#pragma once

#include "thinobs/geometry.hpp"

namespace thinobs {

/// h(x) = Re(x_1 + i|x_n|)^{3/2}, constant in the remaining thin coordinates.
double eval_h(const Vec& x, int dim);

/// Upper one-sided normal derivative of h on the thin plane:
/// -(3/2)|x_1|^{1/2} for x_1 < 0 and 0 otherwise.
double dn_plus_h(double x1);

/// Member a Re(<x', nu> + i|x_n|)^{3/2} of the homogeneous family. In two
/// dimensions the thin space is a line and nu = (cos angle) e_1 with
/// angle in {0, pi}; in three dimensions nu = (cos angle, sin angle).
struct FamilyMember {
  int dim = 2;
  double a = 1.0;
  double angle = 0.0;

  Vec nu() const;
  double value(const Vec& x) const;
  /// Gradient; on the thin plane the upper one-sided normal derivative.
  Vec gradient(const Vec& x) const;
};

/// Unit vector of the thin space at the given angle (see FamilyMember).
Vec thin_direction(int dim, double angle);

/// Angle between two thin unit vectors in [0, pi].
double thin_angle_between(const Vec& a, const Vec& b, int dim);

}  // namespace thinobs
