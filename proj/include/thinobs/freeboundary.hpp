#pragma once

#include <optional>
#include <string>
#include <vector>

#include "thinobs/blowup.hpp"
#include "thinobs/solver.hpp"

namespace thinobs {

struct GammaPoint {
  Vec x{0.0, 0.0, 0.0};
  std::size_t lambda_node = 0;    // adjacent coincidence node
  std::size_t positive_node = 0;  // adjacent node with positive trace
  int axis = 0;                   // thin axis of the straddled edge
  PointLabel label = PointLabel::undecided;
  double ntilde0 = 0.0;
  std::optional<BlowupFit> fit;
};

struct FreeBoundaryChart {
  int dim = 2;
  double spacing = 0.0;
  std::vector<std::uint8_t> in_ball;  // per thin node: inside the thin ball
  std::vector<std::uint8_t> lambda;   // per thin node: in the coincidence set
  std::vector<double> trace;          // per thin node
  std::vector<GammaPoint> gamma;
  bool empty_lambda = false;
  bool full_lambda = false;
  std::string note;

  std::size_t lambda_count() const;
};

/// Coincidence set by trace <= rel_trace * scale and flux jump
/// >= rel_jump * scale; free boundary points on thin cell edges whose ends
/// straddle the set, placed by averaging the 3/2-power estimate from the
/// positive side and the 1/2-power estimate of the jump from the other side.
/// `obstacle` is subtracted from the trace when given.
FreeBoundaryChart extract(const SignoriniSolution& sol, const ScalarFn& obstacle = {},
                          double rel_trace = 1e-6, double rel_jump = 1e-5);

/// Thin node of the coincidence set nearest to `x` that borders its
/// complement. Throws std::runtime_error when the chart has no free boundary.
std::size_t nearest_lambda_boundary_node(const FreeBoundaryChart& chart, const Grid& grid,
                                         const Vec& x);

/// Upper normal derivative of v at a free boundary point, taken as the
/// interpolated mean of the two one-sided layers. The even part's normal
/// derivative vanishes on the free boundary and the odd part is smooth
/// across it, while the upper layer alone is only Holder-1/2 there.
double gamma_normal_derivative(const GridField& v, const Vec& x);

/// Free boundary point nearest to `x`.
const GammaPoint& nearest_gamma(const FreeBoundaryChart& chart, const Vec& x);

struct ConeResult {
  bool positive_side = true;  // x + (C_eps(nu) cap B'_r) has positive trace
  bool lambda_side = true;    // x - (C_eps(nu) cap B'_r) lies in Lambda
  int positive_nodes = 0;
  int lambda_nodes = 0;
  Vec worst_positive{0.0, 0.0, 0.0};
  Vec worst_lambda{0.0, 0.0, 0.0};
};

/// Nodes within two grid spacings of the apex are excluded. Throws
/// std::invalid_argument when either cone holds no node.
ConeResult cone_test(const FreeBoundaryChart& chart, const Grid& grid, const Vec& apex,
                     const Vec& nu, double eps, double r);

struct GraphFit {
  std::array<double, 3> rotated{0.0, 0.0, 0.0};   // t = c0 + c1 s + c2 s^2 in the nu frame
  std::array<double, 3> original{0.0, 0.0, 0.0};  // x_1 = d0 + d1 x_2 + d2 x_2^2
  double sup_slope = 0.0;        // sup |dt/ds| over the window
  double original_slope = 0.0;   // |d1|
  double rms_residual = 0.0;
  double max_residual = 0.0;
  Vec normal{0.0, 0.0, 0.0};     // fitted unit normal at the centre, towards positivity
  int points = 0;
  bool accepted = false;         // rms residual <= 2 grid spacings
};

/// Three dimensions only. Throws std::invalid_argument with "too few points"
/// when fewer than 5 free boundary points lie in the window.
GraphFit graph_fit(const FreeBoundaryChart& chart, const Vec& center, const Vec& nu,
                   double window);

struct HolderFit {
  double beta_a = 0.0, beta_nu = 0.0;
  double c_a = 0.0, c_nu = 0.0;
  bool flat_a = false, flat_nu = false;  // every pair below the noise floor
  int pairs = 0;
};

/// Log-log regression of |a_x - a_y| and |nu_x - nu_y| against |x - y| over
/// pairs of points with fits. Noise floors are 2% of the mean amplitude and
/// one degree. Throws std::invalid_argument with "too few points" below 6.
HolderFit holder_fit(const std::vector<GammaPoint>& points);

/// int_{S'_1} |a h_nu - b h_mu| on the thin unit sphere.
double blowup_distance(const BlowupFit& x, const BlowupFit& y, int dim);

/// True when removing free boundary edges disconnects the coincidence set
/// from its complement inside the thin ball.
bool gamma_separates(const FreeBoundaryChart& chart, const Grid& grid);

}  // namespace thinobs
