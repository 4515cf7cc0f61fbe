#include "thinobs/epiperimetric.hpp"

#include <numbers>

#include "thinobs/reference.hpp"

namespace thinobs {

namespace {

// Polar angle of (x_1, |x_n|) in [0, pi].
double half_plane_angle(const Vec& x, int dim) { return std::atan2(std::abs(x[dim - 1]), x[0]); }

double h_unit(const Vec& x, int dim) { return eval_h(x, dim); }

// Orthonormal tangent vectors of S_1 at the unit vector x.
std::vector<Vec> tangents(const Vec& x, int dim) {
  if (dim == 2) return {Vec{-x[1], x[0], 0.0}};
  Vec a{1.0, 0.0, 0.0};
  if (std::abs(x[0]) > 0.8) a = {0.0, 1.0, 0.0};
  const double p = dot(a, x, 3);
  Vec t1{a[0] - p * x[0], a[1] - p * x[1], a[2] - p * x[2]};
  const double l = norm(t1, 3);
  for (double& c : t1) c /= l;
  const Vec t2{x[1] * t1[2] - x[2] * t1[1], x[2] * t1[0] - x[0] * t1[2],
               x[0] * t1[1] - x[1] * t1[0]};
  return {t1, t2};
}

// |d_tau g|^2 at x on S_1 from one-sided differences of g(y/|y|); averaging
// the squares keeps it accurate at the kink of h on the thin plane.
double tangential_sq(const Trace& g, const Vec& x, int dim) {
  constexpr double step = 1e-5;
  auto radial = [&](const Vec& y) {
    const double l = norm(y, dim);
    Vec u = y;
    for (int k = 0; k < dim; ++k) u[k] /= l;
    return g(u);
  };
  const double g0 = g(x);
  double s = 0.0;
  for (const Vec& t : tangents(x, dim)) {
    Vec p = x, m = x;
    for (int k = 0; k < dim; ++k) {
      p[k] += step * t[k];
      m[k] -= step * t[k];
    }
    const double fwd = (radial(p) - g0) / step;
    const double bwd = (g0 - radial(m)) / step;
    s += 0.5 * (fwd * fwd + bwd * bwd);
  }
  return s;
}

void check_feasible(const Trace& trace, int dim) {
  std::vector<Vec> points;
  if (dim == 2) {
    points = {Vec{1.0, 0.0, 0.0}, Vec{-1.0, 0.0, 0.0}};
  } else {
    for (int k = 0; k < 720; ++k) {
      const double a = 2.0 * std::numbers::pi * k / 720.0;
      points.push_back({std::cos(a), std::sin(a), 0.0});
    }
  }
  for (const Vec& p : points)
    if (trace(p) < -1e-12) throw std::invalid_argument("infeasible trace: negative on the thin equator");
}

std::vector<std::pair<double, double>> composite_rule(double lo, double hi,
                                                      const std::vector<double>& splits,
                                                      int panels, int order) {
  std::vector<double> cuts{lo};
  for (double s : splits)
    if (s > lo && s < hi) cuts.push_back(s);
  cuts.push_back(hi);
  std::vector<double> gx, gw;
  gauss_legendre(order, gx, gw);
  std::vector<std::pair<double, double>> out;
  for (std::size_t j = 0; j + 1 < cuts.size(); ++j) {
    const double len = (cuts[j + 1] - cuts[j]) / panels;
    for (int p = 0; p < panels; ++p) {
      const double a = cuts[j] + p * len;
      for (int q = 0; q < order; ++q)
        out.emplace_back(a + 0.5 * len * (gx[q] + 1.0), 0.5 * len * gw[q]);
    }
  }
  return out;
}

}  // namespace

BallFaceWeights BallFaceWeights::build(const Grid& grid) {
  BallFaceWeights out;
  out.grid = grid;
  const int dim = grid.dim();
  const double h = grid.spacing();
  const int n = grid.nodes_per_axis();
  constexpr int m = 4;
  for (int axis = 0; axis < dim; ++axis) {
    std::vector<double>& w = out.weight[axis];
    w.assign(grid.node_count(), 0.0);
    for (std::size_t i = 0; i < grid.node_count(); ++i) {
      const auto ijk = grid.multi_index(i);
      if (ijk[axis] + 1 >= n) continue;
      // Dual box: [p, p + h e_axis] x [-h/2, h/2] in the other axes.
      const Vec p = grid.position(i);
      Vec lo = p, hi = p;
      for (int k = 0; k < dim; ++k) {
        if (k == axis) {
          hi[k] = p[k] + h;
        } else {
          lo[k] = p[k] - 0.5 * h;
          hi[k] = p[k] + 0.5 * h;
        }
      }
      double far = 0.0, near = 0.0;
      for (int k = 0; k < dim; ++k) {
        const double a = std::max(std::abs(lo[k]), std::abs(hi[k]));
        far += a * a;
        const double b = lo[k] <= 0.0 && hi[k] >= 0.0 ? 0.0 : std::min(std::abs(lo[k]), std::abs(hi[k]));
        near += b * b;
      }
      if (far <= 1.0) {
        w[i] = 1.0;
        continue;
      }
      if (near >= 1.0) continue;
      int inside = 0, total = 0;
      std::array<int, 3> s{0, 0, 0};
      const int count = dim == 2 ? m * m : m * m * m;
      for (int c = 0; c < count; ++c) {
        int rest = c;
        for (int k = 0; k < dim; ++k) {
          s[k] = rest % m;
          rest /= m;
        }
        double r2 = 0.0;
        for (int k = 0; k < dim; ++k) {
          const double x = lo[k] + (s[k] + 0.5) * (hi[k] - lo[k]) / m;
          r2 += x * x;
        }
        inside += r2 < 1.0;
        ++total;
      }
      w[i] = static_cast<double>(inside) / total;
    }
  }
  // Faces touching a free node of the open-ball mask lie inside B_1.
  const std::vector<std::uint8_t> mask = open_ball_mask(grid);
  for (int axis = 0; axis < dim; ++axis)
    for (std::size_t i = 0; i < grid.node_count(); ++i) {
      const auto ijk = grid.multi_index(i);
      if (ijk[axis] + 1 >= n) continue;
      if (mask[i] || mask[i + grid.stride(axis)]) out.weight[axis][i] = 1.0;
    }
  return out;
}

double BallFaceWeights::dirichlet(const GridField& v) const {
  const int dim = grid.dim();
  const double scale = std::pow(grid.spacing(), dim - 2);
  double s = 0.0;
  for (int axis = 0; axis < dim; ++axis) {
    const std::size_t st = grid.stride(axis);
    const std::vector<double>& w = weight[axis];
    for (std::size_t i = 0; i < grid.node_count(); ++i) {
      if (w[i] == 0.0) continue;
      const double d = v[i + st] - v[i];
      s += w[i] * d * d;
    }
  }
  return s * scale;
}

double boundary_adjusted_energy(const GridField& v, const BallFaceWeights& weights) {
  const SphereRule rule = sphere_rule(v.grid(), 1.0);
  const double sphere = rule.integrate([&](const Vec& x) {
    const double a = v.value(x);
    return a * a;
  });
  return weights.dirichlet(v) - 1.5 * sphere;
}

double boundary_adjusted_energy(const GridField& v) {
  return boundary_adjusted_energy(v, BallFaceWeights::build(v.grid()));
}

double homogeneous_energy(const Trace& trace, int dim, int resolution) {
  const SphereRule rule = unit_sphere_rule(dim, resolution);
  const double c = 1.5 * (dim - 0.5);
  const double s = rule.integrate([&](const Vec& x) {
    const double g = trace(x);
    return tangential_sq(trace, x, dim) - c * g * g;
  });
  return s / (dim + 1);
}

double homogeneous_distance(const Trace& s, int dim, int resolution) {
  const SphereRule rule = unit_sphere_rule(dim, resolution);
  const double grad = rule.integrate([&](const Vec& x) {
    const double g = s(x);
    return tangential_sq(s, x, dim) + 2.25 * g * g;
  });
  const double val = rule.integrate([&](const Vec& x) {
    const double g = s(x);
    return g * g;
  });
  return std::sqrt(grad / (dim + 1) + val / (dim + 2));
}

GridField homogeneous_extension(const Grid& grid, const Trace& trace) {
  const int dim = grid.dim();
  return GridField::sample(grid, [&](const Vec& x) {
    const double r = norm(x, dim);
    if (r == 0.0) return 0.0;
    Vec u = x;
    for (int k = 0; k < dim; ++k) u[k] /= r;
    return std::pow(r, 1.5) * trace(u);
  });
}

SignoriniSolution minimizer_zeta(const Grid& grid, const Trace& trace, const SolverParams& params) {
  const int dim = grid.dim();
  check_feasible(trace, dim);
  const GridField w = homogeneous_extension(grid, trace);
  auto boundary = [&w](const Vec& x) { return w.value(x); };
  auto zero = [](const Vec&) { return 0.0; };
  const ProblemSpec spec{grid, CoefficientField::identity(dim), zero, zero, boundary,
                         open_ball_mask(grid)};
  return solve(spec, params);
}

double epi_tolerance(int dim) {
  const SphereRule rule = unit_sphere_rule(dim);
  const double hh = rule.integrate([dim](const Vec& x) {
    const double a = h_unit(x, dim);
    return a * a;
  });
  return 1e-3 * 1.5 * hh;
}

namespace {

EpiReport epi_check_with(const Grid& grid, const Trace& trace, const EpiParams& params,
                         const BallFaceWeights& weights, double tol_w) {
  const int dim = grid.dim();
  EpiReport rep;
  rep.tol_W = tol_w;
  const GridField w = homogeneous_extension(grid, trace);
  rep.fit = fit_to_family(w);
  rep.distance = rep.fit.residual;
  rep.distance_to_h =
      homogeneous_distance([&](const Vec& x) { return trace(x) - h_unit(x, dim); }, dim);
  rep.in_hypothesis = rep.distance_to_h <= params.theta;
  const SignoriniSolution zeta = minimizer_zeta(grid, trace, params.solver);
  rep.sweeps = zeta.sweeps;
  rep.residual = zeta.residual;
  rep.W_w = boundary_adjusted_energy(w, weights);
  rep.W_zeta = boundary_adjusted_energy(zeta.v, weights);
  rep.W_w_sphere = homogeneous_energy(trace, dim);
  if (rep.W_w > tol_w) rep.kappa = 1.0 - rep.W_zeta / rep.W_w;
  return rep;
}

}  // namespace

EpiReport epi_check(const Grid& grid, const Trace& trace, const EpiParams& params) {
  check_feasible(trace, grid.dim());
  return epi_check_with(grid, trace, params, BallFaceWeights::build(grid),
                        epi_tolerance(grid.dim()));
}

double RandomTrace::perturbation(const Vec& x) const {
  const double th = half_plane_angle(x, dim);
  double p = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) p += c[j] * std::cos((j + 2.0) * th);
  if (dim == 3) p *= 1.0 + modulation * x[1];
  const double q = 0.25 * (1.0 - std::cos(th)) * (1.0 - std::cos(th));
  return h_unit(x, dim) * p + e * q;
}

Trace RandomTrace::trace() const {
  const RandomTrace self = *this;
  return [self](const Vec& x) { return h_unit(x, self.dim) + self.t * self.perturbation(x); };
}

RandomTrace draw_trace(int dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  RandomTrace tr;
  tr.dim = dim;
  for (int k = 2; k <= 6; ++k) tr.c.push_back(unit(rng) / k);
  if (dim == 3) tr.modulation = 0.5 * unit(rng);
  const double coin = unit(rng);
  tr.e = coin > 0.0 ? coin : 0.0;
  return tr;
}

EpiBatch epi_batch(const Grid& grid, const EpiParams& params) {
  const int dim = grid.dim();
  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> target(params.distance_min, params.theta);
  const BallFaceWeights weights = BallFaceWeights::build(grid);
  const double tol_w = epi_tolerance(dim);
  EpiBatch batch;
  while (static_cast<int>(batch.accepted.size()) < params.count &&
         batch.attempts < params.max_attempts) {
    ++batch.attempts;
    RandomTrace tr = draw_trace(dim, rng);
    const double d1 =
        homogeneous_distance([&](const Vec& x) { return tr.perturbation(x); }, dim);
    const double goal = target(rng);
    if (!(d1 > 0.0)) continue;
    tr.t = goal / d1;
    const Trace trace = tr.trace();
    try {
      check_feasible(trace, dim);
    } catch (const std::invalid_argument&) {
      continue;
    }
    EpiReport rep = epi_check_with(grid, trace, params, weights, tol_w);
    if (!rep.kappa) {
      ++batch.below_tolerance;
      continue;
    }
    batch.accepted.push_back({batch.attempts, tr, rep});
  }
  batch.all_positive = !batch.accepted.empty();
  batch.min_kappa = std::numeric_limits<double>::infinity();
  for (const EpiSample& s : batch.accepted) {
    batch.min_kappa = std::min(batch.min_kappa, *s.report.kappa);
    batch.all_positive = batch.all_positive && *s.report.kappa > 0.0;
  }
  if (batch.accepted.empty()) batch.min_kappa = 0.0;
  return batch;
}

double Bump::value(const Vec& x) const {
  double s = 0.0;
  for (int k = 0; k < dim; ++k) s += (x[k] - center[k]) * (x[k] - center[k]);
  s /= radius * radius;
  return s < 1.0 ? std::exp(-1.0 / (1.0 - s)) : 0.0;
}

Vec Bump::gradient(const Vec& x) const {
  double s = 0.0;
  for (int k = 0; k < dim; ++k) s += (x[k] - center[k]) * (x[k] - center[k]);
  s /= radius * radius;
  Vec g{0.0, 0.0, 0.0};
  if (s >= 1.0) return g;
  const double f = std::exp(-1.0 / (1.0 - s)) / ((1.0 - s) * (1.0 - s));
  for (int k = 0; k < dim; ++k) g[k] = -2.0 * f * (x[k] - center[k]) / (radius * radius);
  return g;
}

std::pair<double, double> first_variation(const Bump& phi) {
  const int dim = phi.dim;
  if (norm(phi.center, dim) + phi.radius > 1.0)
    throw std::invalid_argument("bump must lie inside the unit ball");
  const FamilyMember h{dim, 1.0, 0.0};
  const int panels = dim == 2 ? 8 : 3;
  const int order = dim == 2 ? 16 : 12;

  std::array<std::vector<std::pair<double, double>>, 3> axes;
  for (int k = 0; k < dim; ++k) {
    std::vector<double> splits;
    if (k == 0 || k == dim - 1) splits.push_back(0.0);
    axes[k] = composite_rule(phi.center[k] - phi.radius, phi.center[k] + phi.radius, splits,
                             panels, order);
  }
  double lhs = 0.0;
  const std::size_t n0 = axes[0].size(), n1 = axes[1].size();
  const std::size_t n2 = dim == 3 ? axes[2].size() : 1;
  for (std::size_t a = 0; a < n0; ++a)
    for (std::size_t b = 0; b < n1; ++b)
      for (std::size_t c = 0; c < n2; ++c) {
        Vec x{axes[0][a].first, axes[1][b].first, dim == 3 ? axes[2][c].first : 0.0};
        const double w = axes[0][a].second * axes[1][b].second * (dim == 3 ? axes[2][c].second : 1.0);
        const Vec gp = phi.gradient(x);
        if (gp[0] == 0.0 && gp[1] == 0.0 && gp[2] == 0.0) continue;
        lhs += w * 2.0 * dot(h.gradient(x), gp, dim);
      }

  // -4 int phi d_n^+ h = 6 int_{x_1 < 0} phi sqrt(-x_1); x_1 = -s^2 removes
  // the square root.
  double rhs = 0.0;
  const double x_lo = phi.center[0] - phi.radius;
  const double x_hi = std::min(phi.center[0] + phi.radius, 0.0);
  if (x_lo < x_hi) {
    const auto srule =
        composite_rule(std::sqrt(-x_hi), std::sqrt(-x_lo), {}, panels, order);
    std::vector<std::pair<double, double>> trule{{0.0, 1.0}};
    if (dim == 3)
      trule = composite_rule(phi.center[1] - phi.radius, phi.center[1] + phi.radius, {}, panels,
                             order);
    for (const auto& [s, ws] : srule)
      for (const auto& [t, wt] : trule) {
        const Vec x{-s * s, dim == 3 ? t : 0.0, 0.0};
        rhs += ws * wt * 12.0 * s * s * phi.value(x);
      }
  }
  return {lhs, rhs};
}

}  // namespace thinobs
