#include "thinobs/scenarios.hpp"

#include <numbers>

namespace thinobs {

namespace {

ScalarFn zero_fn() {
  return [](const Vec&) { return 0.0; };
}

CoefficientField perturbed_field(int dim, double eps) {
  if (eps < 0.0 || eps * std::sqrt(static_cast<double>(dim)) >= 1.0)
    throw std::invalid_argument("epsilon must satisfy 0 <= epsilon * sqrt(n) < 1");
  auto eval = [dim, eps](const Vec& x) {
    Mat a{};
    for (int k = 0; k < dim - 1; ++k) a[k][k] = 1.0 + eps * x[k];
    a[dim - 1][dim - 1] = 1.0 + eps * norm(x, dim);
    return a;
  };
  return CoefficientField(dim, eval, 1.0 - eps * std::sqrt(static_cast<double>(dim)), eps,
                          "lipschitz-perturbed", true);
}

}  // namespace

std::vector<std::string> scenario_names() {
  return {"laplace-exact", "laplace-exact-3d", "lipschitz-perturbed", "nonzero-obstacle",
          "synthetic-frequency2"};
}

double frequency_two(const Vec& x, int dim) { return x[0] * x[0] - x[dim - 1] * x[dim - 1]; }

Scenario make_scenario(const ScenarioParams& p) {
  const auto names = scenario_names();
  if (std::find(names.begin(), names.end(), p.name) == names.end())
    throw std::invalid_argument("unknown scenario '" + p.name + "'");
  const int dim = p.name == "laplace-exact-3d" ? 3 : p.dim;
  if (dim != 2 && dim != 3) throw std::invalid_argument("dimension must be 2 or 3");
  const Grid grid = Grid::build(dim, p.nodes);

  Scenario s{p.name,
             ProblemSpec{grid, CoefficientField::identity(dim), zero_fn(), zero_fn(), zero_fn(), {}},
             true,
             {},
             std::nullopt,
             std::nullopt};

  const double angle = dim == 3 ? p.rotation_deg * std::numbers::pi / 180.0 : 0.0;
  const FamilyMember member{dim, 1.0, angle};
  auto h = [member](const Vec& x) { return member.value(x); };

  if (p.name == "laplace-exact" || p.name == "laplace-exact-3d") {
    s.spec.boundary = h;
    s.closed_form = h;
    s.truth = member;
    s.frequency = 1.5;
  } else if (p.name == "lipschitz-perturbed") {
    s.spec.field = perturbed_field(dim, p.epsilon);
    s.spec.boundary = h;
  } else if (p.name == "nonzero-obstacle") {
    const double kappa = p.kappa;
    auto phi = [kappa, dim](const Vec& x) {
      double r2 = 0.0;
      for (int k = 0; k < dim - 1; ++k) r2 += x[k] * x[k];
      return kappa * (1.0 - r2);
    };
    s.spec.obstacle = phi;
    s.spec.boundary = [h, phi](const Vec& x) { return h(x) + phi(x); };
  } else {
    s.solved = false;
    s.closed_form = [dim](const Vec& x) { return frequency_two(x, dim); };
    s.spec.boundary = s.closed_form;
    s.frequency = 2.0;
  }
  return s;
}

}  // namespace thinobs
