#include "thinobs/geometry.hpp"

#include <numbers>
#include <string>

namespace thinobs {

Grid Grid::build(int dim, int nodes_per_axis) {
  if (dim != 2 && dim != 3)
    throw std::invalid_argument("grid dimension must be 2 or 3, got " + std::to_string(dim));
  if (nodes_per_axis % 2 == 0)
    throw std::invalid_argument("even node count " + std::to_string(nodes_per_axis) +
                                ": the thin plane must be a node layer");
  if (nodes_per_axis < 33)
    throw std::invalid_argument("node count " + std::to_string(nodes_per_axis) +
                                " too small to resolve the radius ladder (need >= 33)");
  Grid g;
  g.dim_ = dim;
  g.n_ = nodes_per_axis;
  g.h_ = 2.0 / (nodes_per_axis - 1);
  g.count_ = 1;
  for (int k = 0; k < dim; ++k) {
    g.strides_[k] = g.count_;
    g.count_ *= static_cast<std::size_t>(nodes_per_axis);
  }
  return g;
}

std::size_t Grid::cell_count() const noexcept {
  std::size_t c = 1;
  for (int k = 0; k < dim_; ++k) c *= static_cast<std::size_t>(n_ - 1);
  return c;
}

Vec Grid::position(std::size_t idx) const noexcept {
  Vec x{0.0, 0.0, 0.0};
  const auto ijk = multi_index(idx);
  for (int k = 0; k < dim_; ++k) x[k] = coordinate(ijk[k]);
  return x;
}

bool Grid::on_box_boundary(std::size_t idx) const noexcept {
  const auto ijk = multi_index(idx);
  for (int k = 0; k < dim_; ++k)
    if (ijk[k] == 0 || ijk[k] == n_ - 1) return true;
  return false;
}

CellLocation locate(const Grid& grid, const Vec& x, std::optional<Side> side) {
  const int dim = grid.dim();
  const int n = grid.nodes_per_axis();
  const double h = grid.spacing();
  constexpr double slack = 1e-12;
  CellLocation loc;
  for (int k = 0; k < dim; ++k) {
    if (!(x[k] >= -1.0 - slack && x[k] <= 1.0 + slack))
      throw std::out_of_range("point outside the grid box");
    const double s = (std::clamp(x[k], -1.0, 1.0) + 1.0) / h;
    int i = static_cast<int>(std::floor(s));
    i = std::clamp(i, 0, n - 2);
    if (k == grid.thin_axis()) {
      const int mid = grid.thin_layer();
      const Side sd = side.value_or(x[k] < 0.0 ? Side::lower : Side::upper);
      if (sd == Side::upper && x[k] >= -slack) i = std::max(i, mid);
      if (sd == Side::lower && x[k] <= slack) i = std::min(i, mid - 1);
    }
    loc.base[k] = i;
    loc.t[k] = std::clamp(s - i, 0.0, 1.0);
  }
  return loc;
}

GridField::GridField(Grid grid) : grid_(grid), values_(grid.node_count(), 0.0) {}

GridField::GridField(Grid grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.node_count())
    throw std::invalid_argument("value count does not match the grid node count");
}

GridField GridField::sample(const Grid& grid, const std::function<double(const Vec&)>& fn,
                            Execution exec) {
  GridField out(grid);
  const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(grid.node_count());
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < count; ++i)
      out.values_[static_cast<std::size_t>(i)] = fn(grid.position(static_cast<std::size_t>(i)));
  } else {
    for (std::ptrdiff_t i = 0; i < count; ++i)
      out.values_[static_cast<std::size_t>(i)] = fn(grid.position(static_cast<std::size_t>(i)));
  }
  return out;
}

void GridField::attach_one_sided_layers() {
  const std::size_t thin = grid_.thin_node_count();
  const std::size_t s = grid_.stride(grid_.thin_axis());
  const double h = grid_.spacing();
  ThinLayers layers;
  layers.dn_plus.resize(thin);
  layers.dn_minus.resize(thin);
  for (std::size_t t = 0; t < thin; ++t) {
    const std::size_t i = grid_.node_from_thin(t);
    const double u0 = values_[i];
    layers.dn_plus[t] = (-3.0 * u0 + 4.0 * values_[i + s] - values_[i + 2 * s]) / (2.0 * h);
    layers.dn_minus[t] = (3.0 * u0 - 4.0 * values_[i - s] + values_[i - 2 * s]) / (2.0 * h);
  }
  layers_ = std::move(layers);
}

double GridField::value(const Vec& x) const {
  const CellLocation loc = locate(grid_, x);
  const int dim = grid_.dim();
  const std::size_t base = grid_.index(loc.base);
  double v = 0.0;
  for (int corner = 0; corner < (1 << dim); ++corner) {
    double w = 1.0;
    std::size_t idx = base;
    for (int k = 0; k < dim; ++k) {
      const bool up = (corner >> k) & 1;
      w *= up ? loc.t[k] : 1.0 - loc.t[k];
      if (up) idx += grid_.stride(k);
    }
    if (w != 0.0) v += w * values_[idx];
  }
  return v;
}

Vec GridField::gradient(const Vec& x, std::optional<Side> side) const {
  const CellLocation loc = locate(grid_, x, side);
  const int dim = grid_.dim();
  const double h = grid_.spacing();
  const std::size_t base = grid_.index(loc.base);
  Vec g{0.0, 0.0, 0.0};
  for (int corner = 0; corner < (1 << dim); ++corner) {
    std::size_t idx = base;
    for (int k = 0; k < dim; ++k)
      if ((corner >> k) & 1) idx += grid_.stride(k);
    const double u = values_[idx];
    for (int d = 0; d < dim; ++d) {
      double w = 1.0;
      for (int k = 0; k < dim; ++k) {
        const bool up = (corner >> k) & 1;
        if (k == d)
          w *= up ? 1.0 / h : -1.0 / h;
        else
          w *= up ? loc.t[k] : 1.0 - loc.t[k];
      }
      g[d] += w * u;
    }
  }
  return g;
}

double GridField::thin_layer_value(const std::vector<double>& layer, const Vec& x) const {
  Vec p = x;
  p[grid_.thin_axis()] = 0.0;
  const CellLocation loc = locate(grid_, p, Side::upper);
  const int thin_dim = grid_.dim() - 1;
  double v = 0.0;
  for (int corner = 0; corner < (1 << thin_dim); ++corner) {
    std::array<int, 3> ijk = loc.base;
    ijk[grid_.thin_axis()] = grid_.thin_layer();
    double w = 1.0;
    for (int k = 0; k < thin_dim; ++k) {
      const bool up = (corner >> k) & 1;
      w *= up ? loc.t[k] : 1.0 - loc.t[k];
      if (up) ijk[k] += 1;
    }
    if (w != 0.0) v += w * layer[grid_.thin_from_node(grid_.index(ijk))];
  }
  return v;
}

double GridField::max_abs() const noexcept {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

double interpolate(const GridField& field, const Vec& x) { return field.value(x); }

int default_sphere_resolution(int dim) { return dim == 2 ? 720 : 64; }

void gauss_legendre(int count, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(static_cast<std::size_t>(count), 0.0);
  weights.assign(static_cast<std::size_t>(count), 0.0);
  for (int i = 0; i < (count + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (count + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 1; j <= count; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = count * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    double p0 = 1.0, p1 = 0.0;
    for (int j = 1; j <= count; ++j) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
    }
    dp = count * (z * p0 - p1) / (z * z - 1.0);
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    nodes[static_cast<std::size_t>(i)] = -z;
    nodes[static_cast<std::size_t>(count - 1 - i)] = z;
    weights[static_cast<std::size_t>(i)] = w;
    weights[static_cast<std::size_t>(count - 1 - i)] = w;
  }
}

SphereRule unit_sphere_rule(int dim, int resolution) {
  if (resolution <= 0) resolution = default_sphere_resolution(dim);
  SphereRule rule;
  rule.dim = dim;
  rule.radius = 1.0;
  rule.resolution = resolution;
  if (dim == 2) {
    const double dtheta = 2.0 * std::numbers::pi / resolution;
    for (int k = 0; k < resolution; ++k) {
      const double th = k * dtheta;
      rule.nodes.push_back({std::cos(th), std::sin(th), 0.0});
      rule.weights.push_back(dtheta);
    }
  } else if (dim == 3) {
    std::vector<double> z, wz;
    gauss_legendre(resolution, z, wz);
    const int nphi = 2 * resolution;
    const double dphi = 2.0 * std::numbers::pi / nphi;
    // The polar axis is x_1 so that the thin equator {x_3 = 0} is sampled by
    // whole longitude circles rather than a single latitude.
    for (int a = 0; a < resolution; ++a) {
      const double s = std::sqrt(std::max(0.0, 1.0 - z[a] * z[a]));
      for (int b = 0; b < nphi; ++b) {
        const double phi = (b + 0.5) * dphi;
        rule.nodes.push_back({z[a], s * std::cos(phi), s * std::sin(phi)});
        rule.weights.push_back(wz[a] * dphi);
      }
    }
  } else {
    throw std::invalid_argument("sphere rule dimension must be 2 or 3");
  }
  return rule;
}

SphereRule SphereRule::scaled(double r) const {
  SphereRule out = *this;
  out.radius = radius * r;
  const double wscale = std::pow(r, dim - 1);
  for (auto& x : out.nodes)
    for (double& c : x) c *= r;
  for (double& w : out.weights) w *= wscale;
  return out;
}

SphereRule sphere_rule(const Grid& grid, double r, int resolution) {
  if (r < 2.0 * grid.spacing() - 1e-14 || r > 1.0 + 1e-14)
    throw std::invalid_argument("sphere radius " + std::to_string(r) +
                                " below the resolvable minimum or above 1");
  return unit_sphere_rule(grid.dim(), resolution).scaled(r);
}

BallQuadrature::BallQuadrature(const Grid& grid) : grid_(grid) {
  const int dim = grid.dim();
  const double h = grid.spacing();
  cells_per_axis_ = static_cast<std::size_t>(grid.nodes_per_axis() - 1);
  const std::size_t cells = grid.cell_count();
  r_lo_.resize(cells);
  r_hi_.resize(cells);
  for (std::size_t c = 0; c < cells; ++c) {
    const Vec o = cell_origin(c);
    double lo2 = 0.0, hi2 = 0.0;
    for (int k = 0; k < dim; ++k) {
      const double a = o[k], b = o[k] + h;
      const double near = (a <= 0.0 && b >= 0.0) ? 0.0 : std::min(std::abs(a), std::abs(b));
      const double far = std::max(std::abs(a), std::abs(b));
      lo2 += near * near;
      hi2 += far * far;
    }
    r_lo_[c] = std::sqrt(lo2);
    r_hi_[c] = std::sqrt(hi2);
  }
  by_hi_.resize(cells);
  by_lo_.resize(cells);
  std::iota(by_hi_.begin(), by_hi_.end(), std::size_t{0});
  std::iota(by_lo_.begin(), by_lo_.end(), std::size_t{0});
  std::stable_sort(by_hi_.begin(), by_hi_.end(),
                   [&](std::size_t a, std::size_t b) { return r_hi_[a] < r_hi_[b]; });
  std::stable_sort(by_lo_.begin(), by_lo_.end(),
                   [&](std::size_t a, std::size_t b) { return r_lo_[a] < r_lo_[b]; });
  sorted_hi_.resize(cells);
  sorted_lo_.resize(cells);
  for (std::size_t j = 0; j < cells; ++j) {
    sorted_hi_[j] = r_hi_[by_hi_[j]];
    sorted_lo_[j] = r_lo_[by_lo_[j]];
  }
}

double ball_integral(const GridField& field, double r, Execution exec) {
  if (r <= 0.0 || r > 1.0 + 1e-14) throw std::invalid_argument("ball radius must lie in (0, 1]");
  BallQuadrature quad(field.grid());
  return quad.integrate(r, [&](const Vec& x) { return field.value(x); }, exec);
}

std::vector<double> geometric_ladder(double r_max, double ratio, double r_min) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("ladder ratio must lie in (0, 1)");
  if (!(r_max > 0.0 && r_max <= 1.0) || !(r_min > 0.0))
    throw std::invalid_argument("ladder needs 0 < r_min and 0 < r_max <= 1");
  std::vector<double> radii;
  for (int k = 0;; ++k) {
    const double r = r_max * std::pow(ratio, k);
    if (r < r_min * (1.0 - 1e-12)) break;
    radii.push_back(r);
  }
  return radii;
}

}  // namespace thinobs
