#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace thinobs {

using Vec = std::array<double, 3>;
using Mat = std::array<std::array<double, 3>, 3>;

/// Selects the OpenMP kernel or the serial reference path of a kernel.
enum class Execution { serial, parallel };

/// Side of the thin plane {x_n = 0} used when a point lies on it.
enum class Side { upper, lower };

inline double dot(const Vec& a, const Vec& b, int dim) {
  double s = 0.0;
  for (int k = 0; k < dim; ++k) s += a[k] * b[k];
  return s;
}

inline double norm(const Vec& a, int dim) { return std::sqrt(dot(a, a, dim)); }

/// Uniform tensor grid on [-1,1]^n. The node count per axis is odd so the
/// thin plane {x_n = 0} is exactly the middle node layer of the last axis.
class Grid {
 public:
  Grid() = default;

  /// Throws std::invalid_argument for n outside {2,3}, even N, or N < 33.
  static Grid build(int dim, int nodes_per_axis);

  int dim() const noexcept { return dim_; }
  int nodes_per_axis() const noexcept { return n_; }
  double spacing() const noexcept { return h_; }
  std::size_t node_count() const noexcept { return count_; }
  std::size_t cell_count() const noexcept;
  int thin_axis() const noexcept { return dim_ - 1; }
  int thin_layer() const noexcept { return (n_ - 1) / 2; }
  std::size_t stride(int axis) const noexcept { return strides_[axis]; }

  std::size_t index(const std::array<int, 3>& ijk) const noexcept {
    std::size_t idx = 0;
    for (int k = 0; k < dim_; ++k) idx += static_cast<std::size_t>(ijk[k]) * strides_[k];
    return idx;
  }
  std::array<int, 3> multi_index(std::size_t idx) const noexcept {
    std::array<int, 3> ijk{0, 0, 0};
    for (int k = 0; k < dim_; ++k) {
      ijk[k] = static_cast<int>(idx % static_cast<std::size_t>(n_));
      idx /= static_cast<std::size_t>(n_);
    }
    return ijk;
  }
  double coordinate(int i) const noexcept { return -1.0 + i * h_; }
  Vec position(std::size_t idx) const noexcept;

  bool on_thin_plane(std::size_t idx) const noexcept {
    return multi_index(idx)[thin_axis()] == thin_layer();
  }
  bool on_box_boundary(std::size_t idx) const noexcept;
  bool in_ball(std::size_t idx, double r = 1.0) const noexcept {
    return norm(position(idx), dim_) <= r + 1e-12;
  }

  /// Number of nodes in the thin layer (N^{n-1}) and the maps between a
  /// thin-layer index and the full node index.
  std::size_t thin_node_count() const noexcept { return count_ / static_cast<std::size_t>(n_); }
  std::size_t node_from_thin(std::size_t t) const noexcept {
    return t + static_cast<std::size_t>(thin_layer()) * strides_[thin_axis()];
  }
  std::size_t thin_from_node(std::size_t idx) const noexcept {
    return idx - static_cast<std::size_t>(thin_layer()) * strides_[thin_axis()];
  }

  bool operator==(const Grid& o) const noexcept { return dim_ == o.dim_ && n_ == o.n_; }

 private:
  int dim_ = 0;
  int n_ = 0;
  double h_ = 0.0;
  std::size_t count_ = 0;
  std::array<std::size_t, 3> strides_{0, 0, 0};
};

/// Second-order one-sided normal derivatives of a field on the thin plane,
/// one value per thin-layer node.
struct ThinLayers {
  std::vector<double> dn_plus;   // d/dx_n approached from x_n > 0
  std::vector<double> dn_minus;  // d/dx_n approached from x_n < 0
};

/// Multilinear cell containing a point, chosen inside the closed half-space
/// of the point so interpolation never mixes values across the thin plane.
struct CellLocation {
  std::array<int, 3> base{0, 0, 0};
  std::array<double, 3> t{0.0, 0.0, 0.0};
};

CellLocation locate(const Grid& grid, const Vec& x, std::optional<Side> side = std::nullopt);

class GridField {
 public:
  GridField() = default;
  explicit GridField(Grid grid);
  GridField(Grid grid, std::vector<double> values);

  static GridField sample(const Grid& grid, const std::function<double(const Vec&)>& fn,
                          Execution exec = Execution::parallel);

  const Grid& grid() const noexcept { return grid_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  double& operator[](std::size_t i) noexcept { return values_[i]; }

  /// Recomputes the one-sided normal derivative layers from the values.
  void attach_one_sided_layers();
  void drop_layers() noexcept { layers_.reset(); }
  bool has_layers() const noexcept { return layers_.has_value(); }
  const ThinLayers& layers() const { return layers_.value(); }

  double value(const Vec& x) const;
  /// Gradient of the multilinear interpolant. On the thin plane the side
  /// defaults to the upper half-space.
  Vec gradient(const Vec& x, std::optional<Side> side = std::nullopt) const;
  /// Interpolates a one-sided layer along the thin plane at (x', 0).
  double thin_layer_value(const std::vector<double>& layer, const Vec& x) const;

  double max_abs() const noexcept;

 private:
  Grid grid_;
  std::vector<double> values_;
  std::optional<ThinLayers> layers_;
};

/// Multilinear interpolation; throws std::out_of_range outside the box.
double interpolate(const GridField& field, const Vec& x);

/// Quadrature rule on the sphere S_r (a circle for n = 2).
struct SphereRule {
  int dim = 0;
  double radius = 0.0;
  int resolution = 0;
  std::vector<Vec> nodes;
  std::vector<double> weights;

  template <class F>
  double integrate(F&& f) const {
    double s = 0.0;
    for (std::size_t q = 0; q < nodes.size(); ++q) s += weights[q] * f(nodes[q]);
    return s;
  }
  double total_weight() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }
  SphereRule scaled(double r) const;
};

int default_sphere_resolution(int dim);

/// n = 2: `resolution` uniform angles starting at theta = 0.
/// n = 3: `resolution` Gauss-Legendre latitudes times 2*resolution longitudes.
SphereRule unit_sphere_rule(int dim, int resolution = 0);

/// Rule on S_r; requires 2*spacing <= r <= 1.
SphereRule sphere_rule(const Grid& grid, double r, int resolution = 0);

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int count, std::vector<double>& nodes, std::vector<double>& weights);

/// Cell-based quadrature over balls B_r centred at the origin. Cells inside
/// B_r use the 2^n-point Gauss rule; cells cut by S_r are subsampled with
/// m^n midpoints. Per-cell sums are combined in a fixed order, so results do
/// not depend on the thread count.
class BallQuadrature {
 public:
  explicit BallQuadrature(const Grid& grid);

  const Grid& grid() const noexcept { return grid_; }

  template <class F>
  std::vector<double> integrate(std::span<const double> radii, F&& f,
                                Execution exec = Execution::parallel) const;

  template <class F>
  double integrate(double r, F&& f, Execution exec = Execution::parallel) const {
    const double radii[1] = {r};
    return integrate(std::span<const double>(radii, 1), std::forward<F>(f), exec)[0];
  }

  int subsamples() const noexcept { return grid_.dim() == 2 ? 8 : 4; }

 private:
  Vec cell_origin(std::size_t c) const noexcept;

  Grid grid_;
  std::size_t cells_per_axis_ = 0;
  std::vector<double> r_lo_, r_hi_;
  std::vector<std::size_t> by_hi_, by_lo_;
  std::vector<double> sorted_hi_, sorted_lo_;
};

/// Integral of the field's interpolant over B_r.
double ball_integral(const GridField& field, double r, Execution exec = Execution::parallel);

/// Geometric radius ladder r_k = r_max * ratio^k, kept while r_k >= r_min.
std::vector<double> geometric_ladder(double r_max, double ratio, double r_min);

// ---------------------------------------------------------------------------

inline Vec BallQuadrature::cell_origin(std::size_t c) const noexcept {
  Vec x{0.0, 0.0, 0.0};
  for (int k = 0; k < grid_.dim(); ++k) {
    x[k] = grid_.coordinate(static_cast<int>(c % cells_per_axis_));
    c /= cells_per_axis_;
  }
  return x;
}

template <class F>
std::vector<double> BallQuadrature::integrate(std::span<const double> radii, F&& f,
                                              Execution exec) const {
  const int dim = grid_.dim();
  const double h = grid_.spacing();
  const std::size_t cells = r_hi_.size();
  double r_top = 0.0;
  for (double r : radii) r_top = std::max(r_top, r);

  // Full-cell Gauss sums for every cell that could be fully inside some ball.
  const std::size_t full_count = static_cast<std::size_t>(
      std::upper_bound(sorted_hi_.begin(), sorted_hi_.end(), r_top) - sorted_hi_.begin());
  std::vector<double> cell_sum(full_count, 0.0);
  const double g0 = 0.5 - 0.5 / std::sqrt(3.0);
  const double g1 = 0.5 + 0.5 / std::sqrt(3.0);
  const double gw = std::pow(h, dim) / static_cast<double>(1 << dim);
  auto gauss_cell = [&](std::size_t j) {
    const Vec o = cell_origin(by_hi_[j]);
    double s = 0.0;
    for (int corner = 0; corner < (1 << dim); ++corner) {
      Vec x = o;
      for (int k = 0; k < dim; ++k) x[k] += h * (((corner >> k) & 1) ? g1 : g0);
      s += f(x);
    }
    cell_sum[j] = s * gw;
  };
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(full_count); ++j)
      gauss_cell(static_cast<std::size_t>(j));
  } else {
    for (std::size_t j = 0; j < full_count; ++j) gauss_cell(j);
  }
  std::vector<double> prefix(full_count + 1, 0.0);
  for (std::size_t j = 0; j < full_count; ++j) prefix[j + 1] = prefix[j] + cell_sum[j];

  const int m = subsamples();
  int sub_total = 1;
  for (int k = 0; k < dim; ++k) sub_total *= m;
  const double sw = std::pow(h / m, dim);
  const double reach = h * std::sqrt(static_cast<double>(dim));

  std::vector<double> out(radii.size(), 0.0);
  for (std::size_t q = 0; q < radii.size(); ++q) {
    const double r = radii[q];
    const std::size_t inside = static_cast<std::size_t>(
        std::upper_bound(sorted_hi_.begin(), sorted_hi_.end(), r) - sorted_hi_.begin());
    // Cut cells have r_lo in (r - reach, r) and r_hi > r.
    const std::size_t lo_begin = static_cast<std::size_t>(
        std::upper_bound(sorted_lo_.begin(), sorted_lo_.end(), r - reach) - sorted_lo_.begin());
    const std::size_t lo_end = static_cast<std::size_t>(
        std::lower_bound(sorted_lo_.begin(), sorted_lo_.end(), r) - sorted_lo_.begin());
    std::vector<double> cut(lo_end > lo_begin ? lo_end - lo_begin : 0, 0.0);
    auto cut_cell = [&](std::size_t j) {
      const std::size_t c = by_lo_[lo_begin + j];
      if (r_hi_[c] <= r) return;
      const Vec o = cell_origin(c);
      double s = 0.0;
      for (int sub = 0; sub < sub_total; ++sub) {
        Vec x = o;
        int rem = sub;
        for (int k = 0; k < dim; ++k) {
          x[k] += h * ((rem % m) + 0.5) / m;
          rem /= m;
        }
        if (norm(x, dim) <= r) s += f(x);
      }
      cut[j] = s * sw;
    };
    if (exec == Execution::parallel) {
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(cut.size()); ++j)
        cut_cell(static_cast<std::size_t>(j));
    } else {
      for (std::size_t j = 0; j < cut.size(); ++j) cut_cell(j);
    }
    double total = prefix[std::min(inside, full_count)];
    for (double v : cut) total += v;
    out[q] = total;
  }
  (void)cells;
  return out;
}

}  // namespace thinobs
