#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "thinobs/coefficients.hpp"
#include "thinobs/geometry.hpp"

namespace thinobs {

struct MonitorParams {
  double delta = 0.5;
  double k_prime = 0.0;
  double r_max = 0.9;
  double ratio = 0.93;
  double r_min_factor = 4.0;  // smallest ladder radius in grid spacings
  int sphere_resolution = 0;  // 0 selects the default
  Execution exec = Execution::parallel;

  std::vector<double> ladder(const Grid& grid) const;
};

/// Per-radius ladder of every radial quantity, radii in descending order.
struct RadialProfile {
  int dim = 0;
  double delta = 0.5;
  double k_prime = 0.0;
  std::vector<double> r;
  std::vector<double> H, D, I, G, psi, sigma, M, J, N, Ntilde, W, W322;
  std::vector<double> sphere_L;  // int_{S_r} v^2 L|x|
  std::vector<double> sup_v, sup_grad;
  double alpha = 1.0;     // extrapolated sigma(r)/r at 0+
  double beta_hat = 0.0;  // empirical bound for |G - (n-1)/r| and |log(sigma/r)|/(1-r)

  std::size_t size() const noexcept { return r.size(); }
};

/// H(r) = int_{S_r} v^2 mu.
double height(const GridField& v, const CoefficientField& field, double r, int resolution = 0);
/// D(r) = int_{B_r} <A grad v, grad v>.
double energy_D(const GridField& v, const CoefficientField& field, double r);
/// I(r) = D(r) + int_{B_r} v f; an empty source means f = 0.
double energy_I(const GridField& v, const CoefficientField& field, const ScalarFn& source,
                double r);
/// G(r) = int_{S_r} v^2 L|x| / H(r), or (n-1)/r when H(r) vanishes.
double gee(const GridField& v, const CoefficientField& field, double r, int resolution = 0);

/// Fills every column of the profile. `amplitude` divides v before use.
RadialProfile compute_profile(const GridField& v, const CoefficientField& field,
                              const ScalarFn& source, const MonitorParams& params,
                              double amplitude = 1.0);

/// psi by trapezoidal integration of rG over log r, anchored at
/// psi = r^{n-1} at the smallest radius; sigma = psi / r^{n-2}; M and J.
void psi_sigma(RadialProfile& profile);
/// N and N~ = (r / sigma) N. Requires at least 3 radii.
void truncated_frequency(RadialProfile& profile);
/// W from the energy/height combination and from the M' form.
void weiss(RadialProfile& profile);

/// d y / d log r by three-point Lagrange differences on a (possibly
/// non-uniform) log-radius grid.
std::vector<double> log_slope(const std::vector<double>& r, const std::vector<double>& y);

/// (H' - 2I - int v^2 L|x|) / (H / r) per radius; zero where H vanishes.
std::vector<double> identity_audit_Hprime(const RadialProfile& profile);

struct MonotonicityReport {
  int violations = 0;
  int pairs = 0;
  double worst_excess = 0.0;  // largest decrease beyond slack
  std::vector<std::size_t> flagged;  // index of the smaller radius of each flagged pair
};

/// Counts adjacent pairs (ordered by increasing r) where series + c r^p
/// decreases by more than the per-radius slack.
MonotonicityReport monotonicity_audit(const std::vector<double>& r,
                                      const std::vector<double>& series, double c, double p,
                                      const std::vector<double>& slack);

/// Least-squares C for W ~ -C r^{1/2} on the radii where W < 0.
double fit_negative_part(const std::vector<double>& r, const std::vector<double>& w);

/// Slack rule: 3 x identity residual x the series scale at each radius.
std::vector<double> slack_from_residual(const std::vector<double>& residual,
                                        const std::vector<double>& series_scale);

struct PowerFit {
  double exponent = 0.0;
  double constant = 0.0;
  bool degenerate = false;
};

/// log-log least squares y ~ C r^p over entries with y > 0.
PowerFit power_fit(const std::vector<double>& r, const std::vector<double>& y);

struct GrowthReport {
  PowerFit sup_v, sup_grad, height, energy;
};
GrowthReport growth_audit(const RadialProfile& profile);

/// Largest radius R such that the audit has no violations on r <= R.
double monotone_prefix(const std::vector<double>& r, const MonotonicityReport& report);

void write_profile_csv(const RadialProfile& profile, std::ostream& out);

}  // namespace thinobs
