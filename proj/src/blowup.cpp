#include "thinobs/blowup.hpp"

#include <numbers>

namespace thinobs {

namespace {

CoefficientField transformed_field(const CoefficientField& field, const Vec& x0, const Mat& s,
                                   const Mat& s_inv) {
  const int dim = field.dim();
  double smax = 0.0, smin = std::numeric_limits<double>::infinity();
  for (int k = 0; k < dim; ++k) {
    double row = 0.0;
    for (int j = 0; j < dim; ++j) row += std::abs(s[k][j]);
    smax = std::max(smax, row);
    double irow = 0.0;
    for (int j = 0; j < dim; ++j) irow += std::abs(s_inv[k][j]);
    smin = std::min(smin, 1.0 / irow);
  }
  const double lambda = std::min({1.0, field.ellipticity() / (smax * smax),
                                  field.ellipticity() * smin * smin});
  const double q = dim * field.lipschitz() * smax / (smin * smin);
  if (field.is_identity()) return CoefficientField::identity(dim);
  return CoefficientField(
      dim,
      [field, x0, s, s_inv, dim](const Vec& x) {
        Vec y = x0;
        const Vec sx = matvec(s, x, dim);
        for (int k = 0; k < dim; ++k) y[k] += sx[k];
        return matmul(matmul(s_inv, field(y), dim), s_inv, dim);
      },
      lambda, q, field.name() + "@x0", field.diagonal());
}

// Weighted sample points of B_r with values and gradients of a field.
struct BallSample {
  std::vector<Vec> x;
  std::vector<double> w, val;
  std::vector<Vec> grad;
};

BallSample sample_ball(const GridField& v, double r) {
  const Grid& grid = v.grid();
  const int dim = grid.dim();
  const double h = grid.spacing();
  const int cells = grid.nodes_per_axis() - 1;
  const int full_pts = dim == 2 ? 2 : 1;
  const int cut_pts = dim == 2 ? 4 : 2;
  const double g0 = 0.5 - 0.5 / std::sqrt(3.0), g1 = 0.5 + 0.5 / std::sqrt(3.0);
  BallSample s;
  std::array<int, 3> c{0, 0, 0};
  const int total = dim == 2 ? cells * cells : cells * cells * cells;
  for (int lin = 0; lin < total; ++lin) {
    int rem = lin;
    for (int k = 0; k < dim; ++k) {
      c[k] = rem % cells;
      rem /= cells;
    }
    double lo2 = 0.0, hi2 = 0.0;
    Vec o{0.0, 0.0, 0.0};
    for (int k = 0; k < dim; ++k) {
      o[k] = grid.coordinate(c[k]);
      const double a = o[k], b = a + h;
      const double near = (a <= 0.0 && b >= 0.0) ? 0.0 : std::min(std::abs(a), std::abs(b));
      const double far = std::max(std::abs(a), std::abs(b));
      lo2 += near * near;
      hi2 += far * far;
    }
    if (lo2 >= r * r) continue;
    const bool full = hi2 <= r * r;
    const int m = full ? full_pts : cut_pts;
    int sub = 1;
    for (int k = 0; k < dim; ++k) sub *= m;
    const double wt = std::pow(h / m, dim);
    for (int q = 0; q < sub; ++q) {
      Vec x = o;
      int rq = q;
      for (int k = 0; k < dim; ++k) {
        const int j = rq % m;
        rq /= m;
        double t;
        if (full && m == 2)
          t = j ? g1 : g0;
        else
          t = (j + 0.5) / m;
        x[k] += h * t;
      }
      if (!full && norm(x, dim) > r) continue;
      s.x.push_back(x);
      s.w.push_back(wt);
    }
  }
  const std::size_t q = s.x.size();
  s.val.resize(q);
  s.grad.resize(q);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(q); ++j) {
    const std::size_t i = static_cast<std::size_t>(j);
    s.val[i] = v.value(s.x[i]);
    s.grad[i] = v.gradient(s.x[i]);
  }
  return s;
}

struct Products {
  double wh = 0.0, hh = 0.0;
};

// <v_r, h_angle> and <h_angle, h_angle> in W^{1,2}(B_1), computed on B_r.
Products products(const BallSample& s, int dim, double r, double angle) {
  const FamilyMember h{dim, 1.0, angle};
  const double rn = std::pow(r, dim);
  const double c0 = 1.0 / (rn * std::pow(r, 1.5));  // for int v_r h
  const double c1 = 1.0 / (rn * std::sqrt(r));      // for int grad v_r . grad h
  Products p;
  for (std::size_t j = 0; j < s.x.size(); ++j) {
    Vec y = s.x[j];
    for (int k = 0; k < dim; ++k) y[k] /= r;
    const double hv = h.value(y);
    const Vec hg = h.gradient(y);
    p.wh += s.w[j] * (c0 * s.val[j] * hv + c1 * dot(s.grad[j], hg, dim));
    p.hh += s.w[j] * (hv * hv + dot(hg, hg, dim)) / rn;
  }
  return p;
}

double residual_sq(double ww, const Products& p) {
  const double a = std::max(0.0, p.wh / p.hh);
  return std::max(0.0, ww - 2.0 * a * p.wh + a * a * p.hh);
}

}  // namespace

Recentered recenter(const GridField& v, const CoefficientField& field, const ScalarFn& source,
                    const Vec& x0, std::optional<double> dn_plus) {
  const Grid& grid = v.grid();
  const int dim = grid.dim();
  const int nax = grid.thin_axis();
  if (std::abs(x0[nax]) > 1e-12) throw std::invalid_argument("recentering point is off the thin plane");
  Recentered out;
  out.center = x0;
  const Mat s = matrix_sqrt(field, x0);
  const Mat s_inv = matrix_inverse(s, dim);
  out.sqrt_a = s;
  double smax = 0.0;
  for (int k = 0; k < dim; ++k) {
    double row = 0.0;
    for (int j = 0; j < dim; ++j) row += std::abs(s[k][j]);
    smax = std::max(smax, row);
  }
  double margin = 1.0;
  for (int k = 0; k < dim; ++k) margin = std::min(margin, 1.0 - std::abs(x0[k]));
  out.valid_radius = margin / smax;
  if (out.valid_radius < 8.0 * grid.spacing())
    throw std::invalid_argument("recentering point too close to the domain boundary");

  GridField src = v;
  if (!src.has_layers()) src.attach_one_sided_layers();
  out.b = s[nax][nax] * dn_plus.value_or(src.thin_layer_value(src.layers().dn_plus, x0));

  auto map = [&](const Vec& x) {
    Vec y = x0;
    const Vec sx = matvec(s, x, dim);
    for (int k = 0; k < dim; ++k) y[k] = std::clamp(y[k] + sx[k], -1.0, 1.0);
    // Keep the half-space of x so values never mix across the thin plane.
    if (x[nax] == 0.0) y[nax] = 0.0;
    return y;
  };
  const double b = out.b;
  // S is block diagonal on the thin plane, so x_n keeps its sign under the map.
  out.v = GridField::sample(grid, [&](const Vec& x) { return src.value(map(x)) - b * x[nax]; });
  out.v.attach_one_sided_layers();
  out.field = transformed_field(field, x0, s, s_inv);

  const CoefficientField tf = out.field;
  const double step = 0.5 * grid.spacing();
  const ScalarFn xn = [nax](const Vec& x) { return x[nax]; };
  const ScalarFn f = source;
  out.source = [f, tf, step, xn, b, x0, s, dim](const Vec& x) {
    Vec y = x0;
    const Vec sx = matvec(s, x, dim);
    for (int k = 0; k < dim; ++k) y[k] += sx[k];
    const double base = f ? f(y) : 0.0;
    if (b == 0.0 || tf.is_identity()) return base;
    return base - b * div_A_grad(tf, xn, x, step);
  };

  const Vec origin{0.0, 0.0, 0.0};
  out.value_at_origin = out.v.value(origin);
  Vec g{0.0, 0.0, 0.0};
  {
    // Tangential gradient along the plane plus the upper normal derivative.
    const double h = grid.spacing();
    for (int k = 0; k < dim - 1; ++k) {
      Vec p = origin, m = origin;
      p[k] += h;
      m[k] -= h;
      g[k] = (out.v.value(p) - out.v.value(m)) / (2.0 * h);
    }
    g[nax] = out.v.thin_layer_value(out.v.layers().dn_plus, origin);
  }
  out.gradient_at_origin = norm(g, dim);
  out.mu_at_origin = conformal_mu(out.field, origin);
  return out;
}

Scaled homogeneous_scaling(const GridField& v, const CoefficientField& field,
                           const ScalarFn& source, double r) {
  const Grid& grid = v.grid();
  if (r < 2.0 * grid.spacing()) throw std::invalid_argument("scaling radius underflow");
  if (r > 1.0) throw std::invalid_argument("scaling radius above 1");
  const int dim = grid.dim();
  const double inv = 1.0 / std::pow(r, 1.5);
  Scaled out;
  out.r = r;
  out.v = GridField::sample(grid, [&](const Vec& x) {
    Vec y = x;
    for (int k = 0; k < dim; ++k) y[k] *= r;
    return v.value(y) * inv;
  });
  out.v.attach_one_sided_layers();
  out.field = CoefficientField(
      dim,
      [field, r, dim](const Vec& x) {
        Vec y = x;
        for (int k = 0; k < dim; ++k) y[k] *= r;
        return field(y);
      },
      field.ellipticity(), field.lipschitz() * r, field.name() + "_r", field.diagonal());
  const ScalarFn f = source;
  out.source = [f, r, dim](const Vec& x) {
    if (!f) return 0.0;
    Vec y = x;
    for (int k = 0; k < dim; ++k) y[k] *= r;
    return std::sqrt(r) * f(y);
  };
  out.normalization = height(out.v, out.field, 1.0);
  return out;
}

Scaled almgren_scaling(const GridField& v, const CoefficientField& field, const ScalarFn& source,
                       double r) {
  const Grid& grid = v.grid();
  const int dim = grid.dim();
  if (r < 2.0 * grid.spacing()) throw std::invalid_argument("scaling radius underflow");
  const double hr = height(v, field, r);
  const double vmax = v.max_abs();
  if (hr <= 0.0 || hr <= 1e-28 * std::max(1.0, vmax * vmax))
    throw std::domain_error("vanishing height");
  const double d = std::sqrt(hr / std::pow(r, dim - 1));
  Scaled out = homogeneous_scaling(v, field, source, r);
  // homogeneous_scaling divided by r^{3/2}; switch to the Almgren normalizer.
  const double factor = std::pow(r, 1.5) / d;
  for (double& x : out.v.values()) x *= factor;
  out.v.attach_one_sided_layers();
  const ScalarFn fr = out.source;
  out.source = [fr, factor](const Vec& x) { return fr(x) * factor; };
  out.d = d;
  out.normalization = height(out.v, out.field, 1.0);
  return out;
}

BlowupFit fit_scaled(const GridField& v, double r) {
  const int dim = v.grid().dim();
  const BallSample s = sample_ball(v, r);
  const double rn = std::pow(r, dim);
  double ww = 0.0;
  for (std::size_t j = 0; j < s.x.size(); ++j)
    ww += s.w[j] * (s.val[j] * s.val[j] / std::pow(r, 3.0) + dot(s.grad[j], s.grad[j], dim) / r) /
          rn;

  BlowupFit fit;
  fit.radius = r;
  fit.norm_w = std::sqrt(ww);
  double best_angle = 0.0;
  Products best{};
  double best_res = std::numeric_limits<double>::infinity();
  auto consider = [&](double angle) {
    const Products p = products(s, dim, r, angle);
    const double res = residual_sq(ww, p);
    if (res < best_res) {
      best_res = res;
      best = p;
      best_angle = angle;
    }
    return res;
  };
  if (dim == 2) {
    consider(0.0);
    consider(std::numbers::pi);
  } else {
    constexpr int scan = 72;
    const double step = 2.0 * std::numbers::pi / scan;
    for (int k = 0; k < scan; ++k) consider(k * step);
    // Golden-section refinement around the best scanned angle.
    double lo = best_angle - step, hi = best_angle + step;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = consider(x1), f2 = consider(x2);
    for (int it = 0; it < 40; ++it) {
      if (f1 < f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - g * (hi - lo);
        f1 = consider(x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + g * (hi - lo);
        f2 = consider(x2);
      }
    }
    best_angle = std::remainder(best_angle, 2.0 * std::numbers::pi);
  }
  fit.angle = best_angle;
  fit.nu = thin_direction(dim, best_angle);
  fit.a = best.hh > 0.0 ? std::max(0.0, best.wh / best.hh) : 0.0;
  fit.norm_h = std::sqrt(best.hh);
  fit.residual = std::sqrt(best_res);
  return fit;
}

BlowupFit fit_to_family(const GridField& w) { return fit_scaled(w, 1.0); }

std::string to_string(PointLabel label) {
  switch (label) {
    case PointLabel::regular:
      return "regular";
    case PointLabel::non_regular:
      return "non-regular";
    default:
      return "undecided";
  }
}

Classification classify(const RadialProfile& p, double r_floor) {
  Classification c;
  c.band = std::min(0.1, ((3.0 + p.delta) / 2.0 - 1.5) / 3.0);
  std::vector<std::size_t> idx;
  for (std::size_t k = p.size(); k-- > 0;) {
    if (p.r[k] < r_floor * (1.0 - 1e-12)) continue;
    idx.push_back(k);
    if (idx.size() == 5) break;
  }
  c.points = static_cast<int>(idx.size());
  if (idx.size() < 3) return c;
  double mr = 0.0, my = 0.0;
  for (std::size_t k : idx) {
    mr += p.r[k];
    my += p.Ntilde[k];
  }
  mr /= idx.size();
  my /= idx.size();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k : idx) {
    sxy += (p.r[k] - mr) * (p.Ntilde[k] - my);
    sxx += (p.r[k] - mr) * (p.r[k] - mr);
  }
  c.estimate = my - (sxx > 0.0 ? sxy / sxx : 0.0) * mr;
  if (std::abs(c.estimate - 1.5) <= c.band)
    c.label = PointLabel::regular;
  else if (c.estimate >= (3.0 + p.delta) / 2.0 - c.band)
    c.label = PointLabel::non_regular;
  return c;
}

ScalingStack build_stack(const GridField& v, const CoefficientField& field,
                         const ScalarFn& source, const Vec& x0, MonitorParams params,
                         std::optional<double> dn_plus) {
  ScalingStack st;
  st.rec = recenter(v, field, source, x0, dn_plus);
  const double h = v.grid().spacing();
  params.r_max = std::min(params.r_max, st.rec.valid_radius - 2.0 * h);
  if (params.r_max < params.r_min_factor * h / params.ratio / params.ratio)
    throw std::invalid_argument("recentered field leaves too few ladder radii");
  const std::vector<double> ladder = params.ladder(v.grid());
  const double h_top = height(st.rec.v, st.rec.field, ladder.front(), params.sphere_resolution);
  const int dim = v.grid().dim();
  st.amplitude = std::sqrt(h_top / std::pow(ladder.front(), dim - 1));
  if (!(st.amplitude > 0.0)) throw std::domain_error("vanishing height");
  st.profile = compute_profile(st.rec.v, st.rec.field, st.rec.source, params, st.amplitude);
  st.d.resize(st.profile.size());
  for (std::size_t k = 0; k < st.profile.size(); ++k)
    st.d[k] = st.amplitude * std::sqrt(st.profile.H[k] / std::pow(st.profile.r[k], dim - 1));
  st.r_floor = 6.0 * h;
  st.classification = classify(st.profile, st.r_floor);
  return st;
}

double decay_distance(const GridField& v, double s, double t, int resolution) {
  const int dim = v.grid().dim();
  const SphereRule unit = unit_sphere_rule(dim, resolution);
  return unit.integrate([&](const Vec& x) {
    Vec xs = x, xt = x;
    for (int k = 0; k < dim; ++k) {
      xs[k] *= s;
      xt[k] *= t;
    }
    return std::abs(v.value(xt) / std::pow(t, 1.5) - v.value(xs) / std::pow(s, 1.5));
  });
}

DecayRecord decay_curve(const GridField& v, const std::vector<double>& radii, double s) {
  DecayRecord rec;
  double top = 0.0;
  for (double t : radii) {
    if (t < s) continue;
    rec.r.push_back(t);
    rec.distance.push_back(decay_distance(v, s, t));
    top = std::max(top, rec.distance.back());
  }
  std::vector<double> rr, dd;
  for (std::size_t k = 0; k < rec.r.size(); ++k)
    if (rec.r[k] > s * (1.0 + 1e-12)) {
      rr.push_back(rec.r[k]);
      dd.push_back(rec.distance[k]);
    }
  rec.exact = top <= 1e-12 * std::max(1.0, v.max_abs());
  if (!rec.exact) rec.gamma = power_fit(rr, dd).exponent;
  return rec;
}

BlowupLimit blowup_limit(const ScalingStack& st) {
  const GridField& v = st.rec.v;
  const int dim = v.grid().dim();
  std::vector<double> reliable;
  for (double r : st.profile.r)
    if (r >= st.r_floor * (1.0 - 1e-12)) reliable.push_back(r);
  if (reliable.size() < 3) throw std::invalid_argument("too few reliable radii for a blowup");
  std::sort(reliable.begin(), reliable.end());
  BlowupLimit out;
  out.fit = fit_scaled(v, reliable[0]);
  out.fit_next = fit_scaled(v, reliable[1]);
  out.a_min = 1e-3 * out.fit.scale();
  out.nondegenerate = out.fit.a > out.a_min;

  // Decay of the scalings toward the fitted limit across the ladder.
  const FamilyMember limit = out.fit.member(dim);
  const SphereRule unit = unit_sphere_rule(dim);
  DecayRecord& rec = out.decay;
  for (double t : reliable) {
    rec.r.push_back(t);
    rec.distance.push_back(unit.integrate([&](const Vec& x) {
      Vec xt = x;
      for (int k = 0; k < dim; ++k) xt[k] *= t;
      return std::abs(v.value(xt) / std::pow(t, 1.5) - limit.value(x));
    }));
  }
  const double top = *std::max_element(rec.distance.begin(), rec.distance.end());
  rec.exact = top <= 1e-9 * std::max(1.0, out.fit.a);
  if (!rec.exact) rec.gamma = power_fit(rec.r, rec.distance).exponent;
  return out;
}

}  // namespace thinobs
