#include "thinobs/solver.hpp"

#include <limits>
#include <sstream>

namespace thinobs {

void SolverParams::check() const {
  if (!(omega > 1.0 && omega < 2.0)) throw std::invalid_argument("omega must lie in (1, 2)");
  if (max_sweeps <= 0) throw std::invalid_argument("max_sweeps must be positive");
  if (!(energy_tol > 0.0) || !(update_tol > 0.0))
    throw std::invalid_argument("solver tolerances must be positive");
  if (tol_c < 0.0) throw std::invalid_argument("tol_c must be >= 0");
}

std::vector<std::uint8_t> open_ball_mask(const Grid& grid) {
  const int dim = grid.dim();
  const double h = grid.spacing();
  std::vector<std::uint8_t> mask(grid.node_count(), 0);
  for (std::size_t i = 0; i < grid.node_count(); ++i) {
    const Vec p = grid.position(i);
    double far2 = 0.0;
    for (int k = 0; k < dim; ++k) far2 += (std::abs(p[k]) + h) * (std::abs(p[k]) + h);
    mask[i] = far2 < 1.0 - 1e-12 ? 1 : 0;
  }
  return mask;
}

EnergyForm assemble_energy(const ProblemSpec& spec) {
  const Grid& grid = spec.grid;
  const int dim = grid.dim();
  const int n = grid.nodes_per_axis();
  if (spec.field.dim() != dim)
    throw std::invalid_argument("coefficient field dimension does not match the grid");
  require_valid(spec.field);
  if (!spec.obstacle || !spec.source || !spec.boundary)
    throw std::invalid_argument("problem spec needs obstacle, source and boundary data");

  EnergyForm form;
  form.grid_ = grid;
  const std::size_t count = grid.node_count();
  std::vector<std::array<double, 3>> diag_a(count);
  double offdiag = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const Mat a = spec.field(grid.position(i));
    for (int p = 0; p < dim; ++p) {
      diag_a[i][p] = a[p][p];
      for (int q = 0; q < dim; ++q)
        if (p != q) offdiag = std::max(offdiag, std::abs(a[p][q]));
    }
  }
  if (offdiag > 1e-12)
    throw std::invalid_argument("the face flux stencil requires a diagonal coefficient field");

  for (int k = 0; k < dim; ++k) {
    auto& f = form.faces_[k];
    f.assign(count, 0.0);
    const std::size_t s = grid.stride(k);
    for (std::size_t i = 0; i < count; ++i)
      if (grid.multi_index(i)[k] < n - 1) f[i] = 0.5 * (diag_a[i][k] + diag_a[i + s][k]);
  }
  form.diag_.assign(count, 0.0);
  for (std::size_t i = 0; i < count; ++i) {
    const auto ijk = grid.multi_index(i);
    for (int k = 0; k < dim; ++k) {
      form.diag_[i] += form.faces_[k][i];
      if (ijk[k] > 0) form.diag_[i] += form.faces_[k][i - grid.stride(k)];
    }
  }

  form.free_ = spec.free_mask;
  if (form.free_.empty()) {
    form.free_.assign(count, 1);
    for (std::size_t i = 0; i < count; ++i)
      if (grid.on_box_boundary(i)) form.free_[i] = 0;
  }
  if (form.free_.size() != count) throw std::invalid_argument("free mask size mismatch");
  for (std::size_t i = 0; i < count; ++i)
    if (form.free_[i] && grid.on_box_boundary(i))
      throw std::invalid_argument("free mask contains a box boundary node");
  for (std::size_t i = 0; i < count; ++i)
    if (form.free_[i]) form.free_list_.push_back(i);

  form.source_.resize(count);
  form.fixed_.resize(count);
  double gmax = 0.0, fmax = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const Vec x = grid.position(i);
    form.source_[i] = spec.source(x);
    fmax = std::max(fmax, std::abs(form.source_[i]));
    form.fixed_[i] = spec.boundary(x);
    if (!form.free_[i]) gmax = std::max(gmax, std::abs(form.fixed_[i]));
  }
  form.obstacle_.resize(grid.thin_node_count());
  for (std::size_t t = 0; t < grid.thin_node_count(); ++t)
    form.obstacle_[t] = spec.obstacle(grid.position(grid.node_from_thin(t)));
  form.scale_ = gmax + fmax > 0.0 ? gmax + fmax : 1.0;
  return form;
}

double EnergyForm::energy(std::span<const double> u) const {
  const int dim = grid_.dim();
  const double h = grid_.spacing();
  double e = 0.0;
  for (int k = 0; k < dim; ++k) {
    const std::size_t s = grid_.stride(k);
    for (std::size_t i = 0; i < u.size(); ++i)
      if (faces_[k][i] != 0.0) {
        const double d = u[i + s] - u[i];
        e += faces_[k][i] * d * d;
      }
  }
  e *= std::pow(h, dim - 2);
  double lin = 0.0;
  for (std::size_t i : free_list_) lin += source_[i] * u[i];
  return e + 2.0 * lin * std::pow(h, dim);
}

double EnergyForm::dirichlet(std::span<const double> u, double r) const {
  const int dim = grid_.dim();
  double e = 0.0;
  for (int k = 0; k < dim; ++k) {
    const std::size_t s = grid_.stride(k);
    for (std::size_t i = 0; i < u.size(); ++i) {
      if (faces_[k][i] == 0.0) continue;
      if (!grid_.in_ball(i, r) || !grid_.in_ball(i + s, r)) continue;
      const double d = u[i + s] - u[i];
      e += faces_[k][i] * d * d;
    }
  }
  return e * std::pow(grid_.spacing(), dim - 2);
}

std::vector<double> EnergyForm::stencil(std::size_t node) const {
  const int dim = grid_.dim();
  const auto ijk = grid_.multi_index(node);
  std::vector<double> w{diag_[node]};
  for (int k = 0; k < dim; ++k) {
    w.push_back(ijk[k] > 0 ? -faces_[k][node - grid_.stride(k)] : 0.0);
    w.push_back(-faces_[k][node]);
  }
  return w;
}

double EnergyForm::multiplier(std::span<const double> u, std::size_t node) const {
  const int dim = grid_.dim();
  const double h = grid_.spacing();
  double t = 0.0;
  for (int k = 0; k < dim; ++k) {
    const std::size_t s = grid_.stride(k);
    t += faces_[k][node] * u[node + s] + faces_[k][node - s] * u[node - s];
  }
  return (diag_[node] * u[node] - t) / h + source_[node] * h;
}

namespace {

constexpr std::size_t kBlocks = 64;

struct SweepStats {
  double delta_energy = 0.0;
  double max_update = 0.0;
};

// One pass over `nodes`. Partial sums are formed per fixed block and then
// combined in block order, so the result does not depend on the thread count.
SweepStats relax(const EnergyForm& form, const std::vector<std::size_t>& nodes,
                 const std::vector<double>& lower, std::vector<double>& u, double omega,
                 bool parallel) {
  const Grid& grid = form.grid();
  const int dim = grid.dim();
  const double h = grid.spacing();
  const double h2 = h * h;
  const double scale_e = std::pow(h, dim - 2);
  const double scale_f = 2.0 * std::pow(h, dim);
  std::array<std::size_t, 3> stride{grid.stride(0), grid.stride(1), dim == 3 ? grid.stride(2) : 0};
  const double* faces[3] = {form.faces(0).data(), form.faces(1).data(),
                            dim == 3 ? form.faces(2).data() : nullptr};
  const auto& src = form.source();

  std::array<double, kBlocks> de{}, mu{};
  const std::size_t total = nodes.size();
  auto block = [&](std::size_t b) {
    const std::size_t lo = total * b / kBlocks, hi = total * (b + 1) / kBlocks;
    double e = 0.0, m = 0.0;
    for (std::size_t j = lo; j < hi; ++j) {
      const std::size_t i = nodes[j];
      double s = 0.0, t = 0.0;
      for (int k = 0; k < dim; ++k) {
        const double fp = faces[k][i], fm = faces[k][i - stride[k]];
        s += fp + fm;
        t += fp * u[i + stride[k]] + fm * u[i - stride[k]];
      }
      const double uo = u[i];
      const double gs = (t - src[i] * h2) / s;
      const double un = std::max(lower[i], uo + omega * (gs - uo));
      u[i] = un;
      const double du = un - uo;
      e += scale_e * (s * (un * un - uo * uo) - 2.0 * t * du) + scale_f * src[i] * du;
      m = std::max(m, std::abs(du));
    }
    de[b] = e;
    mu[b] = m;
  };
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(kBlocks); ++b)
      block(static_cast<std::size_t>(b));
  } else {
    for (std::size_t b = 0; b < kBlocks; ++b) block(b);
  }
  SweepStats st;
  for (std::size_t b = 0; b < kBlocks; ++b) {
    st.delta_energy += de[b];
    st.max_update = std::max(st.max_update, mu[b]);
  }
  return st;
}

}  // namespace

SignoriniSolution solve(const ProblemSpec& spec, const SolverParams& params) {
  const EnergyForm form = assemble_energy(spec);
  return solve(spec, form, params);
}

SignoriniSolution solve(const ProblemSpec& spec, const EnergyForm& form,
                        const SolverParams& params) {
  params.check();
  const Grid& grid = form.grid();
  const std::size_t count = grid.node_count();
  const double scale = form.data_scale();
  const double tol_c = params.tol_c > 0.0 ? params.tol_c : 1e-6 * scale;
  const auto& mask = form.free_mask();

  std::vector<double> lower(count, -std::numeric_limits<double>::infinity());
  for (std::size_t t = 0; t < grid.thin_node_count(); ++t) {
    const std::size_t i = grid.node_from_thin(t);
    if (mask[i]) {
      lower[i] = form.obstacle()[t];
    } else if (form.fixed_values()[i] < form.obstacle()[t] - tol_c) {
      std::ostringstream msg;
      msg << "infeasible boundary data: g < phi at thin boundary node " << i << " ("
          << form.fixed_values()[i] << " < " << form.obstacle()[t] << ")";
      throw std::invalid_argument(msg.str());
    }
  }

  std::vector<double> u(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!mask[i] || params.initial == InitialGuess::boundary_extension)
      u[i] = form.fixed_values()[i];
    else
      u[i] = 0.0;
    if (mask[i]) u[i] = std::max(lower[i], u[i]);
  }

  std::vector<std::size_t> red, black;
  if (params.order == SweepOrder::red_black) {
    for (std::size_t i : form.free_nodes()) {
      const auto ijk = grid.multi_index(i);
      ((ijk[0] + ijk[1] + ijk[2]) % 2 == 0 ? red : black).push_back(i);
    }
  }

  SignoriniSolution sol;
  double energy = form.energy(u);
  std::vector<double> updates;
  sol.energy_history.push_back(energy);
  bool converged = false;
  int sweep = 0;
  for (; sweep < params.max_sweeps && !converged; ++sweep) {
    SweepStats st;
    if (params.order == SweepOrder::lexicographic) {
      st = relax(form, form.free_nodes(), lower, u, params.omega, false);
    } else {
      const SweepStats a = relax(form, red, lower, u, params.omega, true);
      const SweepStats b = relax(form, black, lower, u, params.omega, true);
      st.delta_energy = a.delta_energy + b.delta_energy;
      st.max_update = std::max(a.max_update, b.max_update);
    }
    if (st.delta_energy > 1e-12 * (std::abs(energy) + scale * scale))
      throw std::logic_error("projected relaxation increased the energy");
    energy += st.delta_energy;
    sol.energy_history.push_back(energy);
    updates.push_back(st.max_update);

    // Error estimate from the observed contraction over the last ten sweeps.
    double q = 0.0;
    const std::size_t m = updates.size();
    if (m > 10 && updates[m - 11] > 0.0)
      q = std::clamp(std::pow(updates[m - 1] / updates[m - 11], 0.1), 0.0, 0.9999);
    const double estimate = st.max_update / (1.0 - q);
    const bool energy_ok = -st.delta_energy <= params.energy_tol * std::max(std::abs(energy), 1.0);
    converged = m > 10 && energy_ok && estimate <= params.update_tol * scale;
    if (st.max_update == 0.0) converged = true;
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "projected relaxation did not converge in " << params.max_sweeps
        << " sweeps; last max update " << (updates.empty() ? 0.0 : updates.back());
    throw SolverError(msg.str(), updates);
  }

  sol.sweeps = sweep;
  sol.energy = form.energy(u);
  sol.multiplier.assign(grid.thin_node_count(), 0.0);
  ResidualRecord rec;
  rec.scale = scale;
  rec.tol_c = tol_c;
  for (std::size_t t = 0; t < grid.thin_node_count(); ++t) {
    const std::size_t i = grid.node_from_thin(t);
    if (!mask[i]) continue;
    const double lam = form.multiplier(u, i);
    sol.multiplier[t] = lam;
    if (!grid.in_ball(i)) continue;
    const double trace = u[i] - form.obstacle()[t];
    rec.negative_trace = std::max(rec.negative_trace, -trace);
    rec.negative_jump = std::max(rec.negative_jump, -lam);
    rec.product = std::max(rec.product, std::abs(trace * lam));
  }
  sol.residual = rec;
  sol.v = GridField(grid, std::move(u));
  sol.v.attach_one_sided_layers();
  sol.source = spec.source;
  double fmax = 0.0;
  for (double f : form.source()) fmax = std::max(fmax, std::abs(f));
  sol.source_bound = fmax;
  return sol;
}

SignoriniSolution normalize(const SignoriniSolution& u, const ProblemSpec& spec, const Vec& x0,
                            double tol, std::optional<double> dn_plus) {
  const Grid& grid = u.v.grid();
  const int dim = grid.dim();
  const int nax = grid.thin_axis();
  const double h = grid.spacing();
  if (std::abs(x0[nax]) > 1e-12) throw std::invalid_argument("normalization centre is off the thin plane");
  // x0 must be a thin node.
  std::array<int, 3> ijk{0, 0, 0};
  for (int k = 0; k < dim; ++k) {
    const double s = (x0[k] + 1.0) / h;
    ijk[k] = static_cast<int>(std::lround(s));
    if (std::abs(s - ijk[k]) > 1e-9 || ijk[k] < 2 || ijk[k] > grid.nodes_per_axis() - 3)
      throw std::invalid_argument("normalization centre must be an interior thin-plane node");
  }
  const std::size_t node = grid.index(ijk);
  const double phi0 = spec.obstacle(x0);
  if (tol <= 0.0) tol = std::max(u.residual.tol_c, 1e-9);
  if (std::abs(u.v[node] - phi0) > tol)
    throw std::invalid_argument("normalization centre is not in the coincidence set");

  GridField raw = u.v;
  if (!raw.has_layers()) raw.attach_one_sided_layers();
  const std::size_t t0 = grid.thin_from_node(node);
  const double dplus = dn_plus.value_or(raw.layers().dn_plus[t0]);
  const double dminus = raw.layers().dn_minus[t0];
  const double b = -dplus;

  SignoriniSolution out = u;
  out.b = b;
  out.center = x0;
  // d_{nu+}u + d_{nu-}u = -d_n^+ u + d_n^- u, scaled by a_nn(x0) = 1 after
  // normalization of the coefficients.
  out.normal_defect = std::abs(dminus - dplus) * spec.field(x0)[nax][nax];

  auto obstacle = spec.obstacle;
  std::vector<double> vals(grid.node_count());
  for (std::size_t i = 0; i < grid.node_count(); ++i) {
    Vec x = grid.position(i);
    const double xn = x[nax];
    x[nax] = 0.0;
    vals[i] = u.v[i] - obstacle(x) + b * xn;
  }
  out.v = GridField(grid, std::move(vals));
  out.v.attach_one_sided_layers();

  const CoefficientField field = spec.field;
  const ScalarFn f = spec.source;
  const double step = 0.5 * h;
  ScalarFn shift = [obstacle, b, nax](const Vec& x) {
    Vec p = x;
    const double xn = p[nax];
    p[nax] = 0.0;
    return obstacle(p) - b * xn;
  };
  out.source = [field, f, shift, step](const Vec& x) {
    return f(x) - div_A_grad(field, shift, x, step);
  };
  // Sup bound of the induced source on a sub-lattice of the unit ball.
  double bound = 0.0;
  const int skip = dim == 2 ? 2 : 4;
  for (std::size_t i = 0; i < grid.node_count(); ++i) {
    const auto m = grid.multi_index(i);
    bool take = true;
    for (int k = 0; k < dim; ++k) take = take && (m[k] % skip == 0);
    if (!take || !grid.in_ball(i, 1.0 - 2.0 * h)) continue;
    bound = std::max(bound, std::abs(out.source(grid.position(i))));
  }
  out.source_bound = bound;
  return out;
}

ResidualRecord residuals(const GridField& v, const CoefficientField& field, double tol_c,
                         double scale) {
  GridField w = v;
  if (!w.has_layers()) w.attach_one_sided_layers();
  const Grid& grid = w.grid();
  const int nax = grid.thin_axis();
  ResidualRecord rec;
  rec.tol_c = tol_c;
  rec.scale = scale;
  for (std::size_t t = 0; t < grid.thin_node_count(); ++t) {
    const std::size_t i = grid.node_from_thin(t);
    if (!grid.in_ball(i) || grid.on_box_boundary(i)) continue;
    const Vec x = grid.position(i);
    const double ann = field(x)[nax][nax];
    const double jump = ann * (w.layers().dn_minus[t] - w.layers().dn_plus[t]);
    rec.negative_trace = std::max(rec.negative_trace, -w[i]);
    rec.negative_jump = std::max(rec.negative_jump, -jump);
    rec.product = std::max(rec.product, std::abs(w[i] * jump));
  }
  return rec;
}

}  // namespace thinobs
