#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "thinobs/coefficients.hpp"
#include "thinobs/geometry.hpp"

namespace thinobs {

/// Domain, data and coefficients of a thin obstacle problem on the grid box.
/// The obstacle is evaluated at (x', 0); the boundary datum is used at every
/// node that is not free.
struct ProblemSpec {
  Grid grid;
  CoefficientField field;
  ScalarFn obstacle;
  ScalarFn source;
  ScalarFn boundary;
  /// One flag per node; empty means every node off the box boundary is free.
  std::vector<std::uint8_t> free_mask;
};

enum class InitialGuess { boundary_extension, zero };
enum class SweepOrder { lexicographic, red_black };

struct SolverParams {
  double omega = 1.7;
  int max_sweeps = 20000;
  double energy_tol = 1e-14;  // relative energy decrease per sweep
  double update_tol = 1e-10;  // estimated max-norm error, relative to scale
  double tol_c = 0.0;         // 0 selects 1e-6 * (max|g| + |f|_inf)
  InitialGuess initial = InitialGuess::boundary_extension;
  /// red_black runs the OpenMP kernel; lexicographic is the serial reference.
  SweepOrder order = SweepOrder::lexicographic;

  void check() const;
};

/// Maximum violations of the complementarity conditions on thin-plane nodes
/// inside the unit ball.
struct ResidualRecord {
  double negative_trace = 0.0;  // max(-v)
  double negative_jump = 0.0;   // max(-(flux jump))
  double product = 0.0;         // max |v * flux jump|
  double scale = 1.0;
  double tol_c = 0.0;

  bool passed() const {
    return negative_trace <= tol_c && negative_jump <= tol_c && product <= tol_c * scale;
  }
};

/// Discrete quadratic form
///   E(u) = sum_faces a_f (u_j - u_i)^2 h^{n-2} + 2 sum_free f_i u_i h^n
/// with a_f the arithmetic mean of the diagonal coefficient at the two ends.
class EnergyForm {
 public:
  const Grid& grid() const noexcept { return grid_; }
  /// Coefficient of the face between node i and i + stride(axis); zero when
  /// the face leaves the box.
  const std::vector<double>& faces(int axis) const { return faces_[axis]; }
  const std::vector<double>& source() const noexcept { return source_; }
  const std::vector<double>& obstacle() const noexcept { return obstacle_; }
  const std::vector<double>& fixed_values() const noexcept { return fixed_; }
  const std::vector<std::uint8_t>& free_mask() const noexcept { return free_; }
  const std::vector<std::size_t>& free_nodes() const noexcept { return free_list_; }
  double data_scale() const noexcept { return scale_; }

  double energy(std::span<const double> u) const;
  /// Face energy restricted to faces with both ends in B_r; no source term.
  double dirichlet(std::span<const double> u, double r = 1.0) const;
  /// Centre weight and the 2n neighbour weights (order: -e_0, +e_0, -e_1, ...).
  std::vector<double> stencil(std::size_t node) const;
  /// (S u_i - T)/h + f_i h: the discrete flux jump at a free thin node.
  double multiplier(std::span<const double> u, std::size_t node) const;

 private:
  friend EnergyForm assemble_energy(const ProblemSpec& spec);
  Grid grid_;
  std::array<std::vector<double>, 3> faces_;
  std::vector<double> diag_;
  std::vector<double> source_;
  std::vector<double> obstacle_;
  std::vector<double> fixed_;
  std::vector<std::uint8_t> free_;
  std::vector<std::size_t> free_list_;
  double scale_ = 1.0;
};

/// Validates the coefficient field and builds the form. Throws
/// std::invalid_argument for invalid or non-diagonal coefficients.
EnergyForm assemble_energy(const ProblemSpec& spec);

struct SignoriniSolution {
  GridField v;
  double b = 0.0;
  Vec center{0.0, 0.0, 0.0};
  ResidualRecord residual;
  int sweeps = 0;
  double energy = 0.0;
  std::vector<double> energy_history;
  /// Discrete flux jump per thin-layer node (zero at fixed nodes).
  std::vector<double> multiplier;
  /// Induced right-hand side of the normalized problem and its sup bound.
  ScalarFn source;
  double source_bound = 0.0;
  /// |d_{nu+}u + d_{nu-}u| at the normalization centre.
  double normal_defect = 0.0;
};

class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, std::vector<double> history)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const noexcept { return history_; }

 private:
  std::vector<double> history_;
};

/// Projected over-relaxed Gauss-Seidel. Returns the raw solution u (b = 0,
/// centre at the origin) with one-sided layers attached.
SignoriniSolution solve(const ProblemSpec& spec, const SolverParams& params = {});
SignoriniSolution solve(const ProblemSpec& spec, const EnergyForm& form,
                        const SolverParams& params);

/// v = u - phi + b x_n with b = d_{nu+}u(x0) = -d_n^+ u(x0). Throws
/// std::invalid_argument when x0 is not a thin node of the coincidence set.
/// `dn_plus` replaces the one-sided layer value of d_n^+ u at x0 when given.
SignoriniSolution normalize(const SignoriniSolution& u, const ProblemSpec& spec, const Vec& x0,
                            double tol = 0.0, std::optional<double> dn_plus = std::nullopt);

/// Complementarity residuals from the one-sided layers contracted with
/// a_nn(x', 0), over thin nodes in the unit ball.
ResidualRecord residuals(const GridField& v, const CoefficientField& field, double tol_c,
                         double scale = 1.0);

/// Free mask of the open unit ball: nodes whose incident cells all lie in B_1.
std::vector<std::uint8_t> open_ball_mask(const Grid& grid);

}  // namespace thinobs
