#include "thinobs/monitors.hpp"

#include <ostream>

#include "thinobs/format.hpp"

namespace thinobs {

std::vector<double> MonitorParams::ladder(const Grid& grid) const {
  return geometric_ladder(r_max, ratio, r_min_factor * grid.spacing());
}

namespace {

double lx_value(const CoefficientField& field, const Vec& x, double r, double step) {
  if (field.is_identity()) return (field.dim() - 1) / r;
  return div_A_grad_r(field, x, step);
}

struct SphereSums {
  double H = 0.0, L = 0.0, sup_v = 0.0, sup_grad = 0.0;
};

SphereSums sphere_sums(const GridField& v, const CoefficientField& field, const SphereRule& rule,
                       double amplitude, Execution exec) {
  const int dim = v.grid().dim();
  const double step = 0.5 * v.grid().spacing();
  const std::size_t q = rule.nodes.size();
  std::vector<double> hv(q), lv(q), av(q), gv(q);
  auto node = [&](std::size_t j) {
    const Vec& x = rule.nodes[j];
    const double val = v.value(x) / amplitude;
    const double v2 = val * val;
    hv[j] = v2 * conformal_mu(field, x);
    lv[j] = v2 * lx_value(field, x, rule.radius, step);
    av[j] = std::abs(val);
    const Vec g = v.gradient(x);
    gv[j] = norm(g, dim) / amplitude;
  };
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(q); ++j)
      node(static_cast<std::size_t>(j));
  } else {
    for (std::size_t j = 0; j < q; ++j) node(j);
  }
  SphereSums s;
  for (std::size_t j = 0; j < q; ++j) {
    s.H += rule.weights[j] * hv[j];
    s.L += rule.weights[j] * lv[j];
    s.sup_v = std::max(s.sup_v, av[j]);
    s.sup_grad = std::max(s.sup_grad, gv[j]);
  }
  return s;
}

double a_grad_grad(const GridField& v, const CoefficientField& field, const Vec& x) {
  const int dim = v.grid().dim();
  const Vec g = v.gradient(x);
  if (field.is_identity()) return dot(g, g, dim);
  return dot(matvec(field(x), g, dim), g, dim);
}

}  // namespace

double height(const GridField& v, const CoefficientField& field, double r, int resolution) {
  const SphereRule rule = sphere_rule(v.grid(), r, resolution);
  return sphere_sums(v, field, rule, 1.0, Execution::parallel).H;
}

double energy_D(const GridField& v, const CoefficientField& field, double r) {
  BallQuadrature quad(v.grid());
  return quad.integrate(r, [&](const Vec& x) { return a_grad_grad(v, field, x); });
}

double energy_I(const GridField& v, const CoefficientField& field, const ScalarFn& source,
                double r) {
  BallQuadrature quad(v.grid());
  double d = quad.integrate(r, [&](const Vec& x) { return a_grad_grad(v, field, x); });
  if (source) d += quad.integrate(r, [&](const Vec& x) { return v.value(x) * source(x); });
  return d;
}

double gee(const GridField& v, const CoefficientField& field, double r, int resolution) {
  const SphereRule rule = sphere_rule(v.grid(), r, resolution);
  const SphereSums s = sphere_sums(v, field, rule, 1.0, Execution::parallel);
  const double vmax = v.max_abs();
  if (s.H <= 1e-14 * vmax * vmax * rule.total_weight() || s.H == 0.0)
    return (v.grid().dim() - 1) / r;
  return s.L / s.H;
}

RadialProfile compute_profile(const GridField& v, const CoefficientField& field,
                              const ScalarFn& source, const MonitorParams& params,
                              double amplitude) {
  if (!(amplitude > 0.0)) throw std::invalid_argument("profile amplitude must be positive");
  const Grid& grid = v.grid();
  const int dim = grid.dim();
  RadialProfile p;
  p.dim = dim;
  p.delta = params.delta;
  p.k_prime = params.k_prime;
  p.r = params.ladder(grid);
  if (p.r.size() < 3) throw std::invalid_argument("radius ladder needs at least 3 radii");
  const std::size_t m = p.r.size();

  const SphereRule unit = unit_sphere_rule(dim, params.sphere_resolution);
  const double vmax = v.max_abs() / amplitude;
  p.H.resize(m);
  p.G.resize(m);
  p.sphere_L.resize(m);
  p.sup_v.resize(m);
  p.sup_grad.resize(m);
  for (std::size_t k = 0; k < m; ++k) {
    const SphereRule rule = unit.scaled(p.r[k]);
    const SphereSums s = sphere_sums(v, field, rule, amplitude, params.exec);
    p.H[k] = s.H;
    p.sphere_L[k] = s.L;
    p.sup_v[k] = s.sup_v;
    p.sup_grad[k] = s.sup_grad;
    const bool vanishing = s.H == 0.0 || s.H <= 1e-14 * vmax * vmax * rule.total_weight();
    p.G[k] = vanishing ? (dim - 1) / p.r[k] : s.L / s.H;
  }

  BallQuadrature quad(grid);
  const double a2 = amplitude * amplitude;
  p.D = quad.integrate(
      std::span<const double>(p.r),
      [&](const Vec& x) { return a_grad_grad(v, field, x) / a2; }, params.exec);
  p.I = p.D;
  if (source) {
    const auto vf = quad.integrate(
        std::span<const double>(p.r),
        [&](const Vec& x) { return v.value(x) * source(x) / a2; }, params.exec);
    for (std::size_t k = 0; k < m; ++k) p.I[k] += vf[k];
  }

  psi_sigma(p);
  truncated_frequency(p);
  weiss(p);
  return p;
}

std::vector<double> log_slope(const std::vector<double>& r, const std::vector<double>& y) {
  const std::size_t m = r.size();
  if (m < 3 || y.size() != m) throw std::invalid_argument("log_slope needs at least 3 points");
  std::vector<double> x(m), d(m);
  for (std::size_t k = 0; k < m; ++k) x[k] = std::log(r[k]);
  // Derivative of the quadratic through (x0,y0),(x1,y1),(x2,y2) at xe.
  auto lagrange = [&](std::size_t i0, double xe) {
    const double x0 = x[i0], x1 = x[i0 + 1], x2 = x[i0 + 2];
    const double y0 = y[i0], y1 = y[i0 + 1], y2 = y[i0 + 2];
    return y0 * ((xe - x1) + (xe - x2)) / ((x0 - x1) * (x0 - x2)) +
           y1 * ((xe - x0) + (xe - x2)) / ((x1 - x0) * (x1 - x2)) +
           y2 * ((xe - x0) + (xe - x1)) / ((x2 - x0) * (x2 - x1));
  };
  d[0] = lagrange(0, x[0]);
  for (std::size_t k = 1; k + 1 < m; ++k) d[k] = lagrange(k - 1, x[k]);
  d[m - 1] = lagrange(m - 3, x[m - 1]);
  return d;
}

void psi_sigma(RadialProfile& p) {
  const std::size_t m = p.size();
  const int n = p.dim;
  p.psi.assign(m, 0.0);
  p.sigma.assign(m, 0.0);
  p.M.assign(m, 0.0);
  p.J.assign(m, 0.0);
  std::vector<double> log_psi(m);
  log_psi[m - 1] = (n - 1) * std::log(p.r[m - 1]);
  for (std::size_t k = m - 1; k-- > 0;) {
    const double a = p.r[k + 1] * p.G[k + 1], b = p.r[k] * p.G[k];
    log_psi[k] = log_psi[k + 1] + 0.5 * (a + b) * (std::log(p.r[k]) - std::log(p.r[k + 1]));
  }
  double beta = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    p.psi[k] = std::exp(log_psi[k]);
    p.sigma[k] = p.psi[k] / std::pow(p.r[k], n - 2);
    p.M[k] = p.H[k] / p.psi[k];
    p.J[k] = p.I[k] / p.psi[k];
    beta = std::max(beta, std::abs(p.G[k] - (n - 1) / p.r[k]));
    beta = std::max(beta, std::abs(std::log(p.sigma[k] / p.r[k])) / (1.0 - p.r[k]));
  }
  p.beta_hat = beta;
  // alpha: linear extrapolation of sigma/r to r = 0 over the smallest radii.
  std::vector<double> rs, ys;
  for (std::size_t k = m >= 5 ? m - 5 : 0; k < m; ++k) {
    rs.push_back(p.r[k]);
    ys.push_back(p.sigma[k] / p.r[k]);
  }
  const double mr = std::accumulate(rs.begin(), rs.end(), 0.0) / rs.size();
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t j = 0; j < rs.size(); ++j) {
    sxy += (rs[j] - mr) * (ys[j] - my);
    sxx += (rs[j] - mr) * (rs[j] - mr);
  }
  p.alpha = sxx > 0.0 ? my - (sxy / sxx) * mr : my;
}

void truncated_frequency(RadialProfile& p) {
  const std::size_t m = p.size();
  if (m < 3) throw std::invalid_argument("truncated frequency needs at least 3 ladder points");
  std::vector<double> y(m);
  for (std::size_t k = 0; k < m; ++k)
    y[k] = std::log(std::max(p.M[k], std::pow(p.r[k], 3.0 + p.delta)));
  const std::vector<double> slope = log_slope(p.r, y);
  p.N.assign(m, 0.0);
  p.Ntilde.assign(m, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    const double e = std::exp(p.k_prime * std::pow(p.r[k], 0.5 * (1.0 - p.delta)));
    p.N[k] = 0.5 * p.sigma[k] * e * slope[k] / p.r[k];
    p.Ntilde[k] = p.r[k] / p.sigma[k] * p.N[k];
  }
}

void weiss(RadialProfile& p) {
  const std::size_t m = p.size();
  const int n = p.dim;
  p.W.assign(m, 0.0);
  p.W322.assign(m, 0.0);
  std::vector<double> logm(m);
  bool positive = true;
  for (std::size_t k = 0; k < m; ++k) {
    positive = positive && p.M[k] > 0.0;
    logm[k] = p.M[k] > 0.0 ? std::log(p.M[k]) : 0.0;
  }
  const std::vector<double> slope = log_slope(p.r, logm);
  for (std::size_t k = 0; k < m; ++k) {
    const double r = p.r[k];
    p.W[k] = p.I[k] / std::pow(r, n + 1) - 1.5 * p.H[k] / std::pow(r, n + 2);
    p.W322[k] = positive ? p.H[k] / std::pow(r, n + 2) * (0.5 * slope[k] - 1.5) : 0.0;
  }
}

std::vector<double> identity_audit_Hprime(const RadialProfile& p) {
  const std::size_t m = p.size();
  std::vector<double> res(m, 0.0);
  bool positive = true;
  std::vector<double> logh(m);
  for (std::size_t k = 0; k < m; ++k) {
    positive = positive && p.H[k] > 0.0;
    logh[k] = p.H[k] > 0.0 ? std::log(p.H[k]) : 0.0;
  }
  if (!positive) return res;
  const std::vector<double> slope = log_slope(p.r, logh);
  // H' = (H/r) dlogH/dlogr, so the normalized residual needs no division by H'.
  for (std::size_t k = 0; k < m; ++k)
    res[k] = slope[k] - p.r[k] * (2.0 * p.I[k] + p.sphere_L[k]) / p.H[k];
  return res;
}

MonotonicityReport monotonicity_audit(const std::vector<double>& r,
                                      const std::vector<double>& series, double c, double p,
                                      const std::vector<double>& slack) {
  MonotonicityReport rep;
  const std::size_t m = r.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return r[a] < r[b]; });
  for (std::size_t j = 0; j + 1 < m; ++j) {
    const std::size_t lo = order[j], hi = order[j + 1];
    const double a = series[lo] + c * std::pow(r[lo], p);
    const double b = series[hi] + c * std::pow(r[hi], p);
    const double allow = slack.empty() ? 0.0 : std::max(slack[lo], slack[hi]);
    ++rep.pairs;
    const double drop = a - b;
    if (drop > allow) {
      ++rep.violations;
      rep.flagged.push_back(lo);
      rep.worst_excess = std::max(rep.worst_excess, drop - allow);
    }
  }
  return rep;
}

double fit_negative_part(const std::vector<double>& r, const std::vector<double>& w) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < r.size(); ++k) {
    if (w[k] >= 0.0) continue;
    num -= w[k] * std::sqrt(r[k]);
    den += r[k];
  }
  return den > 0.0 ? num / den : 0.0;
}

std::vector<double> slack_from_residual(const std::vector<double>& residual,
                                        const std::vector<double>& series_scale) {
  std::vector<double> s(residual.size());
  for (std::size_t k = 0; k < s.size(); ++k)
    s[k] = 3.0 * std::abs(residual[k]) * std::abs(series_scale[k]);
  return s;
}

PowerFit power_fit(const std::vector<double>& r, const std::vector<double>& y) {
  PowerFit fit;
  std::vector<double> lx, ly;
  for (std::size_t k = 0; k < r.size(); ++k)
    if (y[k] > 0.0 && std::isfinite(y[k])) {
      lx.push_back(std::log(r[k]));
      ly.push_back(std::log(y[k]));
    }
  if (lx.size() < 2) {
    fit.degenerate = true;
    return fit;
  }
  const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
  const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t j = 0; j < lx.size(); ++j) {
    sxy += (lx[j] - mx) * (ly[j] - my);
    sxx += (lx[j] - mx) * (lx[j] - mx);
  }
  if (sxx <= 0.0) {
    fit.degenerate = true;
    return fit;
  }
  fit.exponent = sxy / sxx;
  fit.constant = std::exp(my - fit.exponent * mx);
  return fit;
}

GrowthReport growth_audit(const RadialProfile& p) {
  GrowthReport g;
  g.sup_v = power_fit(p.r, p.sup_v);
  g.sup_grad = power_fit(p.r, p.sup_grad);
  g.height = power_fit(p.r, p.H);
  g.energy = power_fit(p.r, p.I);
  return g;
}

double monotone_prefix(const std::vector<double>& r, const MonotonicityReport& report) {
  if (report.violations == 0) return r.empty() ? 0.0 : *std::max_element(r.begin(), r.end());
  double smallest_bad = std::numeric_limits<double>::infinity();
  for (std::size_t k : report.flagged) smallest_bad = std::min(smallest_bad, r[k]);
  return smallest_bad;
}

void write_profile_csv(const RadialProfile& p, std::ostream& out) {
  out << "r,H,D,I,G,psi,sigma,M,J,N,Ntilde,W\n";
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double row[] = {p.r[k],   p.H[k],     p.D[k], p.I[k], p.G[k], p.psi[k],
                          p.sigma[k], p.M[k], p.J[k], p.N[k], p.Ntilde[k], p.W[k]};
    for (std::size_t c = 0; c < std::size(row); ++c) {
      if (c) out << ',';
      out << format_number(row[c]);
    }
    out << '\n';
  }
}

}  // namespace thinobs
