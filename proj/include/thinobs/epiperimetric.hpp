#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "thinobs/blowup.hpp"
#include "thinobs/solver.hpp"

namespace thinobs {

/// Function on the unit sphere, evaluated at unit vectors.
using Trace = ScalarFn;

/// Per-face weights of the discrete Dirichlet form on B_1: the fraction of
/// each face's dual box inside the ball, estimated by subsampling. Faces that
/// touch a node free under open_ball_mask always get weight 1.
struct BallFaceWeights {
  Grid grid;
  std::array<std::vector<double>, 3> weight;

  static BallFaceWeights build(const Grid& grid);
  double dirichlet(const GridField& v) const;
};

/// W(v) = int_{B_1} |grad v|^2 - (3/2) int_{S_1} v^2 with the face form above
/// and the sphere rule of the grid.
double boundary_adjusted_energy(const GridField& v);
double boundary_adjusted_energy(const GridField& v, const BallFaceWeights& weights);

/// W(w) of the 3/2-homogeneous extension of `trace` from the sphere alone:
/// (1/(n+1)) int_{S_1} (|d_tau g|^2 - (3/2)(n - 1/2) g^2).
double homogeneous_energy(const Trace& trace, int dim, int resolution = 0);

/// w(x) = |x|^{3/2} trace(x/|x|) at every node, w(0) = 0.
GridField homogeneous_extension(const Grid& grid, const Trace& trace);

/// Thin obstacle minimizer in B_1 for the Laplacian with zero obstacle and
/// Dirichlet data given by the homogeneous extension outside the open ball.
/// Throws std::invalid_argument "infeasible trace" when the trace is negative
/// on the thin equator.
SignoriniSolution minimizer_zeta(const Grid& grid, const Trace& trace,
                                 const SolverParams& params = {});

/// 10^{-3} (3/2) int_{S_1} h^2.
double epi_tolerance(int dim);

struct EpiReport {
  double distance = 0.0;        // ||w - a h_nu||_{W^{1,2}(B_1)} for the best fit
  double distance_to_h = 0.0;   // ||w - h||_{W^{1,2}(B_1)}
  BlowupFit fit;
  double W_w = 0.0;
  double W_zeta = 0.0;
  double W_w_sphere = 0.0;      // homogeneous_energy of the trace
  double tol_W = 0.0;
  std::optional<double> kappa;  // 1 - W(zeta)/W(w), only when W(w) > tol_W
  bool in_hypothesis = true;    // distance_to_h <= theta
  int sweeps = 0;
  ResidualRecord residual;
};

struct EpiParams {
  int count = 20;
  std::uint64_t seed = 7;
  double theta = 0.1;
  double distance_min = 0.06;  // random traces are rescaled into [distance_min, theta]
  int max_attempts = 400;
  SolverParams solver{1.9};
};

/// Throws std::invalid_argument "infeasible trace" like minimizer_zeta.
EpiReport epi_check(const Grid& grid, const Trace& trace, const EpiParams& params = {});

/// h (1 + p) + e q with p a cosine series in the polar angle of (x_1, |x_n|)
/// (modulated along x_2 in three dimensions) and q >= 0 vanishing to second
/// order at the positive thin equator.
struct RandomTrace {
  std::vector<double> c;  // cosine amplitudes for k = 2..6
  double modulation = 0.0;
  double e = 0.0;
  double t = 1.0;  // overall scale of the perturbation
  int dim = 2;

  double perturbation(const Vec& x) const;  // unscaled, on S_1
  Trace trace() const;
};

RandomTrace draw_trace(int dim, std::mt19937_64& rng);

/// ||w - h||_{W^{1,2}(B_1)} for 3/2-homogeneous w with trace h + s(x): from
/// sphere integrals, (1/(n+1)) int (|d_tau s|^2 + 9/4 s^2) + (1/(n+2)) int s^2.
double homogeneous_distance(const Trace& s, int dim, int resolution = 0);

struct EpiSample {
  int attempt = 0;
  RandomTrace trace;
  EpiReport report;
};

struct EpiBatch {
  std::vector<EpiSample> accepted;  // W(w) > tol_W
  int attempts = 0;
  int below_tolerance = 0;
  double min_kappa = 0.0;
  bool all_positive = false;
};

EpiBatch epi_batch(const Grid& grid, const EpiParams& params);

/// C-infinity bump exp(-1 / (1 - |x - c|^2 / rho^2)).
struct Bump {
  Vec center{0.0, 0.0, 0.0};
  double radius = 0.1;
  int dim = 2;

  double value(const Vec& x) const;
  Vec gradient(const Vec& x) const;
};

/// (int 2<grad h, grad phi> - (3/2) int_{S_1} 2 h phi, -4 int_{B'_1} phi d_n^+ h).
/// The bump must lie inside B_1; the first entry is then a volume integral,
/// split along x_1 = 0 and x_n = 0 where grad h is singular or kinked.
std::pair<double, double> first_variation(const Bump& phi);

}  // namespace thinobs
