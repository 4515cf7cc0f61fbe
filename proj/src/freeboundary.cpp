#include "thinobs/freeboundary.hpp"

#include <deque>
#include <numbers>

#include <Eigen/Dense>

namespace thinobs {

std::size_t FreeBoundaryChart::lambda_count() const {
  return static_cast<std::size_t>(std::count(lambda.begin(), lambda.end(), 1));
}

namespace {

// Thin-layer neighbour of thin index t along thin axis k, or nullopt.
std::optional<std::size_t> thin_step(const Grid& grid, std::size_t t, int k, int dir) {
  const auto ijk = grid.multi_index(grid.node_from_thin(t));
  const int j = ijk[k] + dir;
  if (j < 0 || j >= grid.nodes_per_axis()) return std::nullopt;
  auto m = ijk;
  m[k] = j;
  return grid.thin_from_node(grid.index(m));
}

}  // namespace

FreeBoundaryChart extract(const SignoriniSolution& sol, const ScalarFn& obstacle,
                          double rel_trace, double rel_jump) {
  GridField v = sol.v;
  if (!v.has_layers()) v.attach_one_sided_layers();
  const Grid& grid = v.grid();
  const int dim = grid.dim();
  const double h = grid.spacing();
  const std::size_t thin = grid.thin_node_count();
  const double scale = sol.residual.scale > 0.0 ? sol.residual.scale : 1.0;

  FreeBoundaryChart chart;
  chart.dim = dim;
  chart.spacing = h;
  chart.in_ball.assign(thin, 0);
  chart.lambda.assign(thin, 0);
  chart.trace.assign(thin, 0.0);
  std::vector<double> jump(thin, 0.0);
  const bool have_multiplier = sol.multiplier.size() == thin;
  for (std::size_t t = 0; t < thin; ++t) {
    const std::size_t i = grid.node_from_thin(t);
    const Vec x = grid.position(i);
    chart.trace[t] = v[i] - (obstacle ? obstacle(x) : 0.0);
    jump[t] = have_multiplier ? sol.multiplier[t]
                              : v.layers().dn_minus[t] - v.layers().dn_plus[t];
    chart.in_ball[t] = grid.in_ball(i) && !grid.on_box_boundary(i);
    if (chart.in_ball[t])
      chart.lambda[t] = chart.trace[t] <= rel_trace * scale && jump[t] >= rel_jump * scale;
  }
  std::size_t in_ball = 0, lam = 0;
  for (std::size_t t = 0; t < thin; ++t) {
    in_ball += chart.in_ball[t];
    lam += chart.lambda[t];
  }
  chart.empty_lambda = lam == 0;
  chart.full_lambda = lam == in_ball;
  if (chart.empty_lambda) chart.note = "empty coincidence set: no free boundary";
  if (chart.full_lambda) chart.note = "coincidence set covers the thin ball: no free boundary";

  for (std::size_t t = 0; t < thin; ++t) {
    if (!chart.in_ball[t]) continue;
    for (int k = 0; k < dim - 1; ++k) {
      const auto u = thin_step(grid, t, k, +1);
      if (!u || !chart.in_ball[*u] || chart.lambda[t] == chart.lambda[*u]) continue;
      const std::size_t a = chart.lambda[t] ? t : *u;  // coincidence end
      const std::size_t b = chart.lambda[t] ? *u : t;  // positive end
      const int dir = b == *u ? +1 : -1;               // from a towards b along axis k
      const double pa = grid.position(grid.node_from_thin(a))[k];
      const double pb = grid.position(grid.node_from_thin(b))[k];

      // Trace ~ C d^{3/2} on the positive side.
      std::optional<double> from_b;
      const auto c = thin_step(grid, b, k, dir);
      const double vb = chart.trace[b];
      if (c && vb > 0.0 && chart.trace[*c] > vb) {
        const double q = std::pow(chart.trace[*c] / vb, 2.0 / 3.0) - 1.0;
        if (q > 0.0) from_b = pb - dir * h / q;
      }
      // Jump ~ C d^{1/2} on the coincidence side.
      std::optional<double> from_a;
      const auto a2 = thin_step(grid, a, k, -dir);
      const double ja = jump[a];
      if (a2 && chart.lambda[*a2] && ja > 0.0 && jump[*a2] > ja) {
        const double q = std::pow(jump[*a2] / ja, 2.0) - 1.0;
        if (q > 0.0) from_a = pa + dir * h / q;
      }
      double pos = 0.5 * (pa + pb);
      if (from_a && from_b)
        pos = 0.5 * (*from_a + *from_b);
      else if (from_a)
        pos = *from_a;
      else if (from_b)
        pos = *from_b;
      pos = std::clamp(pos, std::min(pa, pb), std::max(pa, pb));

      GammaPoint g;
      g.x = grid.position(grid.node_from_thin(a));
      g.x[k] = pos;
      g.lambda_node = grid.node_from_thin(a);
      g.positive_node = grid.node_from_thin(b);
      g.axis = k;
      chart.gamma.push_back(g);
    }
  }
  return chart;
}

std::size_t nearest_lambda_boundary_node(const FreeBoundaryChart& chart, const Grid& grid,
                                         const Vec& x) {
  if (chart.gamma.empty()) throw std::runtime_error("chart has no free boundary points");
  const int dim = grid.dim();
  double best = std::numeric_limits<double>::infinity();
  std::size_t node = chart.gamma.front().lambda_node;
  for (const GammaPoint& g : chart.gamma) {
    const Vec p = grid.position(g.lambda_node);
    Vec d{0.0, 0.0, 0.0};
    for (int k = 0; k < dim; ++k) d[k] = p[k] - x[k];
    const double dist = norm(d, dim);
    if (dist < best - 1e-14) {
      best = dist;
      node = g.lambda_node;
    }
  }
  return node;
}

double gamma_normal_derivative(const GridField& v, const Vec& x) {
  const ThinLayers& l = v.layers();
  std::vector<double> mean(l.dn_plus.size());
  for (std::size_t t = 0; t < mean.size(); ++t) mean[t] = 0.5 * (l.dn_plus[t] + l.dn_minus[t]);
  return v.thin_layer_value(mean, x);
}

const GammaPoint& nearest_gamma(const FreeBoundaryChart& chart, const Vec& x) {
  if (chart.gamma.empty()) throw std::runtime_error("chart has no free boundary points");
  const int dim = chart.dim;
  double best = std::numeric_limits<double>::infinity();
  const GammaPoint* out = &chart.gamma.front();
  for (const GammaPoint& g : chart.gamma) {
    Vec d{0.0, 0.0, 0.0};
    for (int k = 0; k < dim; ++k) d[k] = g.x[k] - x[k];
    const double dist = norm(d, dim);
    if (dist < best - 1e-14) {
      best = dist;
      out = &g;
    }
  }
  return *out;
}

ConeResult cone_test(const FreeBoundaryChart& chart, const Grid& grid, const Vec& apex,
                     const Vec& nu, double eps, double r) {
  const int dim = grid.dim();
  const int tdim = dim - 1;
  const double h = grid.spacing();
  const double nn = norm(nu, tdim);
  ConeResult res;
  double worst_pos = std::numeric_limits<double>::infinity();
  double worst_lam = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < chart.lambda.size(); ++t) {
    if (!chart.in_ball[t]) continue;
    const Vec x = grid.position(grid.node_from_thin(t));
    Vec d{0.0, 0.0, 0.0};
    for (int k = 0; k < tdim; ++k) d[k] = x[k] - apex[k];
    const double dist = norm(d, tdim);
    if (dist > r || dist < 2.0 * h) continue;
    const double c = dot(d, nu, tdim) / nn;
    if (c >= eps * dist) {
      ++res.positive_nodes;
      const bool ok = !chart.lambda[t] && chart.trace[t] > 0.0;
      if (!ok) {
        res.positive_side = false;
        if (chart.trace[t] < worst_pos) {
          worst_pos = chart.trace[t];
          res.worst_positive = x;
        }
      }
    } else if (-c >= eps * dist) {
      ++res.lambda_nodes;
      if (!chart.lambda[t]) {
        res.lambda_side = false;
        if (chart.trace[t] > worst_lam) {
          worst_lam = chart.trace[t];
          res.worst_lambda = x;
        }
      }
    }
  }
  if (res.positive_nodes == 0 || res.lambda_nodes == 0)
    throw std::invalid_argument("cone is empty at grid resolution");
  return res;
}

GraphFit graph_fit(const FreeBoundaryChart& chart, const Vec& center, const Vec& nu,
                   double window) {
  if (chart.dim != 3) throw std::invalid_argument("graph fit needs a two-dimensional thin space");
  const double nl = std::hypot(nu[0], nu[1]);
  const Vec n{nu[0] / nl, nu[1] / nl, 0.0};
  const Vec tang{-n[1], n[0], 0.0};
  std::vector<double> s, t, x1, x2;
  for (const GammaPoint& g : chart.gamma) {
    const double dx = g.x[0] - center[0], dy = g.x[1] - center[1];
    if (std::hypot(dx, dy) > window) continue;
    s.push_back(dx * tang[0] + dy * tang[1]);
    t.push_back(dx * n[0] + dy * n[1]);
    x1.push_back(g.x[0]);
    x2.push_back(g.x[1]);
  }
  if (s.size() < 5) throw std::invalid_argument("too few points for a graph fit");
  auto quad_fit = [](const std::vector<double>& a, const std::vector<double>& b) {
    Eigen::MatrixXd m(a.size(), 3);
    Eigen::VectorXd y(a.size());
    for (std::size_t j = 0; j < a.size(); ++j) {
      m(j, 0) = 1.0;
      m(j, 1) = a[j];
      m(j, 2) = a[j] * a[j];
      y(j) = b[j];
    }
    const Eigen::Vector3d c = m.colPivHouseholderQr().solve(y);
    return std::array<double, 3>{c(0), c(1), c(2)};
  };
  GraphFit fit;
  fit.points = static_cast<int>(s.size());
  fit.rotated = quad_fit(s, t);
  fit.original = quad_fit(x2, x1);
  double ss = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    const double model = fit.rotated[0] + fit.rotated[1] * s[j] + fit.rotated[2] * s[j] * s[j];
    const double e = t[j] - model;
    ss += e * e;
    fit.max_residual = std::max(fit.max_residual, std::abs(e));
    fit.sup_slope = std::max(fit.sup_slope, std::abs(fit.rotated[1] + 2.0 * fit.rotated[2] * s[j]));
  }
  fit.rms_residual = std::sqrt(ss / s.size());
  fit.original_slope = std::abs(fit.original[1]);
  // Normal of t = g(s) at s = 0 is (-g'(0), 1) in the (tang, n) frame.
  const double g1 = fit.rotated[1];
  const double len = std::hypot(g1, 1.0);
  fit.normal = {(-g1 * tang[0] + n[0]) / len, (-g1 * tang[1] + n[1]) / len, 0.0};
  fit.accepted = fit.rms_residual <= 2.0 * chart.spacing;
  return fit;
}

HolderFit holder_fit(const std::vector<GammaPoint>& points) {
  std::vector<const GammaPoint*> fitted;
  for (const GammaPoint& p : points)
    if (p.fit && p.label == PointLabel::regular) fitted.push_back(&p);
  if (fitted.size() < 6) throw std::invalid_argument("too few points for a Holder fit");
  double mean_a = 0.0;
  for (const GammaPoint* p : fitted) mean_a += p->fit->a;
  mean_a /= fitted.size();
  const double floor_a = 0.02 * mean_a;
  const double floor_nu = std::numbers::pi / 180.0;
  std::vector<double> da_r, da, dn_r, dn;
  HolderFit out;
  for (std::size_t i = 0; i < fitted.size(); ++i)
    for (std::size_t j = i + 1; j < fitted.size(); ++j) {
      const Vec& x = fitted[i]->x;
      const Vec& y = fitted[j]->x;
      const double dist = std::hypot(std::hypot(x[0] - y[0], x[1] - y[1]), x[2] - y[2]);
      if (dist <= 0.0) continue;
      ++out.pairs;
      const double a = std::abs(fitted[i]->fit->a - fitted[j]->fit->a);
      const Vec& n1 = fitted[i]->fit->nu;
      const Vec& n2 = fitted[j]->fit->nu;
      const double nu = std::hypot(n1[0] - n2[0], n1[1] - n2[1]);
      if (a > floor_a) {
        da_r.push_back(dist);
        da.push_back(a);
      }
      if (nu > floor_nu) {
        dn_r.push_back(dist);
        dn.push_back(nu);
      }
    }
  out.flat_a = da.size() < 2;
  out.flat_nu = dn.size() < 2;
  if (!out.flat_a) {
    const PowerFit f = power_fit(da_r, da);
    out.beta_a = std::max(0.0, f.exponent);
    out.c_a = f.constant;
  }
  if (!out.flat_nu) {
    const PowerFit f = power_fit(dn_r, dn);
    out.beta_nu = std::max(0.0, f.exponent);
    out.c_nu = f.constant;
  }
  return out;
}

double blowup_distance(const BlowupFit& x, const BlowupFit& y, int dim) {
  const FamilyMember fx = x.member(dim), fy = y.member(dim);
  if (dim == 2) {
    double s = 0.0;
    for (double e : {-1.0, 1.0}) {
      const Vec p{e, 0.0, 0.0};
      s += std::abs(fx.value(p) - fy.value(p));
    }
    return s;
  }
  constexpr int count = 720;
  const double dt = 2.0 * std::numbers::pi / count;
  double s = 0.0;
  for (int k = 0; k < count; ++k) {
    const Vec p{std::cos(k * dt), std::sin(k * dt), 0.0};
    s += dt * std::abs(fx.value(p) - fy.value(p));
  }
  return s;
}

bool gamma_separates(const FreeBoundaryChart& chart, const Grid& grid) {
  // Every thin-ball edge joining the coincidence set to its complement is a
  // free boundary edge, so a flood fill from Lambda that refuses those edges
  // must never reach a positive node.
  const int dim = grid.dim();
  std::vector<std::uint8_t> seen(chart.lambda.size(), 0);
  std::deque<std::size_t> queue;
  for (std::size_t t = 0; t < chart.lambda.size(); ++t)
    if (chart.in_ball[t] && chart.lambda[t]) {
      seen[t] = 1;
      queue.push_back(t);
    }
  std::vector<std::pair<std::size_t, std::size_t>> cut;
  for (const GammaPoint& g : chart.gamma)
    cut.emplace_back(grid.thin_from_node(g.lambda_node), grid.thin_from_node(g.positive_node));
  auto is_cut = [&](std::size_t a, std::size_t b) {
    for (const auto& [p, q] : cut)
      if ((p == a && q == b) || (p == b && q == a)) return true;
    return false;
  };
  while (!queue.empty()) {
    const std::size_t t = queue.front();
    queue.pop_front();
    for (int k = 0; k < dim - 1; ++k)
      for (int dir : {-1, 1}) {
        const auto u = thin_step(grid, t, k, dir);
        if (!u || !chart.in_ball[*u] || seen[*u]) continue;
        if (!chart.lambda[*u] && is_cut(t, *u)) continue;
        if (!chart.lambda[*u]) return false;
        seen[*u] = 1;
        queue.push_back(*u);
      }
  }
  return true;
}

}  // namespace thinobs
