#pragma once

#include <optional>
#include <string>
#include <vector>

#include "thinobs/coefficients.hpp"
#include "thinobs/geometry.hpp"
#include "thinobs/monitors.hpp"
#include "thinobs/reference.hpp"

namespace thinobs {

/// v_{x0}(x) = v(x0 + S x) - b x_n with S = A^{1/2}(x0), resampled on a grid
/// of the same size, together with A_{x0} and f_{x0}.
struct Recentered {
  GridField v;
  CoefficientField field;
  ScalarFn source;
  Vec center{0.0, 0.0, 0.0};
  Mat sqrt_a{};
  double b = 0.0;
  /// Radius of the ball whose image under x0 + S x stays in the source box.
  double valid_radius = 1.0;
  double value_at_origin = 0.0;
  double gradient_at_origin = 0.0;
  double mu_at_origin = 1.0;
};

/// Throws std::invalid_argument if x0 is off the thin plane or leaves no
/// usable radius. `dn_plus` replaces the interpolated upper normal derivative
/// of v at x0 when given.
Recentered recenter(const GridField& v, const CoefficientField& field, const ScalarFn& source,
                    const Vec& x0, std::optional<double> dn_plus = std::nullopt);

/// Rescaled problem data on B_1: v_r(x) = v(rx) / r^{3/2}, A_r(x) = A(rx),
/// f_r(x) = r^{1/2} f(rx).
struct Scaled {
  GridField v;
  CoefficientField field;
  ScalarFn source;
  double r = 1.0;
  double d = 1.0;  // Almgren normalizer; 1 for homogeneous scalings
  double normalization = 0.0;  // int_{S_1} v^2 mu_r after rescaling
};

Scaled homogeneous_scaling(const GridField& v, const CoefficientField& field,
                           const ScalarFn& source, double r);

/// v(rx) / d with d = (H(r) / r^{n-1})^{1/2}. Throws std::domain_error on a
/// vanishing height.
Scaled almgren_scaling(const GridField& v, const CoefficientField& field, const ScalarFn& source,
                       double r);

struct BlowupFit {
  double a = 0.0;
  Vec nu{1.0, 0.0, 0.0};
  double angle = 0.0;
  double residual = 0.0;   // discrete W^{1,2}(B_1) distance to a h_nu
  double norm_w = 0.0;     // ||w||_{W^{1,2}(B_1)}
  double norm_h = 0.0;     // ||h_nu||_{W^{1,2}(B_1)}
  double radius = 1.0;

  FamilyMember member(int dim) const { return {dim, a, angle}; }
  /// Fit scale: the amplitude of h_nu with the norm of w.
  double scale() const { return norm_h > 0.0 ? norm_w / norm_h : 0.0; }
};

/// Best a >= 0 and nu for w on B_1.
BlowupFit fit_to_family(const GridField& w);

/// Same fit for the homogeneous scaling v_r, computed on B_r of the original
/// grid without resampling.
BlowupFit fit_scaled(const GridField& v, double r);

enum class PointLabel { regular, non_regular, undecided };
std::string to_string(PointLabel label);

struct Classification {
  PointLabel label = PointLabel::undecided;
  double estimate = 0.0;  // extrapolated N~(0+)
  double band = 0.1;
  int points = 0;
};

/// Regular iff the extrapolated N~(0+) is within band of 3/2, non-regular iff
/// it is at least (3+delta)/2 - band. `r_floor` is the smallest reliable radius.
Classification classify(const RadialProfile& profile, double r_floor);

/// Recentred field, its Almgren-normalized profile and classification.
struct ScalingStack {
  Recentered rec;
  RadialProfile profile;
  double amplitude = 1.0;     // d at the largest ladder radius
  std::vector<double> d;      // d_{x,r} along the ladder
  double r_floor = 0.0;       // smallest reliable radius (6 grid spacings)
  Classification classification;
};

ScalingStack build_stack(const GridField& v, const CoefficientField& field,
                         const ScalarFn& source, const Vec& x0, MonitorParams params,
                         std::optional<double> dn_plus = std::nullopt);

struct DecayRecord {
  std::vector<double> r;
  std::vector<double> distance;  // int_{S_1} |v_r - fit|
  double gamma = 0.0;
  bool exact = false;  // every distance vanished
};

struct BlowupLimit {
  BlowupFit fit;
  BlowupFit fit_next;  // fit at the second smallest reliable radius
  DecayRecord decay;
  double a_min = 0.0;
  bool nondegenerate = false;
};

BlowupLimit blowup_limit(const ScalingStack& stack);

/// int_{S_1} |v_t - v_s| for homogeneous scalings of v.
double decay_distance(const GridField& v, double s, double t, int resolution = 0);

/// Distances int_{S_1}|v_t - v_s| for each t in `radii` with s fixed; gamma
/// from a log-log fit over radii > s.
DecayRecord decay_curve(const GridField& v, const std::vector<double>& radii, double s);

}  // namespace thinobs
