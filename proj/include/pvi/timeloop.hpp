#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "pvi/error.hpp"
#include "pvi/hmm.hpp"
#include "pvi/vi_solver.hpp"

namespace pvi {

using SpaceTimeField = std::function<double(const Vec2&, double)>;

/// Time nodes 0 = t0 < t1 < ... < tN = T.
class TimeGrid {
 public:
  explicit TimeGrid(std::vector<double> nodes) : nodes_(std::move(nodes)) {
    if (nodes_.size() < 2) throw UsageError("time grid needs at least one step");
    if (nodes_.front() != 0.0) throw UsageError("time grid must start at t = 0");
    for (std::size_t n = 1; n < nodes_.size(); ++n)
      if (!(nodes_[n] > nodes_[n - 1]) || !std::isfinite(nodes_[n]))
        throw UsageError("time grid must be strictly increasing");
  }

  static TimeGrid uniform(double final_time, std::size_t steps) {
    if (!(final_time > 0.0)) throw UsageError("final time must be positive");
    if (steps < 1) throw UsageError("time grid needs at least one step");
    std::vector<double> t(steps + 1);
    for (std::size_t n = 0; n <= steps; ++n) t[n] = final_time * static_cast<double>(n) / static_cast<double>(steps);
    t.back() = final_time;
    return TimeGrid(std::move(t));
  }

  /// Uniform grid with the largest step <= dt that divides T.
  static TimeGrid with_max_step(double final_time, double dt) {
    if (!(dt > 0.0)) throw UsageError("time step must be positive");
    const double ratio = final_time / dt;
    auto steps = static_cast<std::size_t>(std::ceil(ratio - 1e-9 * ratio));
    return uniform(final_time, std::max<std::size_t>(1, steps));
  }

  std::size_t num_steps() const { return nodes_.size() - 1; }
  double node(std::size_t n) const { return nodes_[n]; }
  /// delta t^(n+1/2) = t^(n+1) - t^(n).
  double step(std::size_t n) const { return nodes_[n + 1] - nodes_[n]; }
  double max_step() const {
    double m = 0.0;
    for (std::size_t n = 0; n < num_steps(); ++n) m = std::max(m, step(n));
    return m;
  }
  double final_time() const { return nodes_.back(); }
  const std::vector<double>& nodes() const { return nodes_; }

 private:
  std::vector<double> nodes_;
};

/// Continuous problem data on Omega x [0, T].
struct ProblemSpec {
  TensorField diffusion = [](const Vec2&) { return Mat2::Identity(); };
  SpaceTimeField source = [](const Vec2&, double) { return 0.0; };
  ScalarField obstacle = [](const Vec2&) { return 0.0; };
  ScalarField initial = [](const Vec2&) { return 0.0; };
  SpaceTimeField dirichlet = [](const Vec2&, double) { return 0.0; };
  double final_time = 1.0;
};

/// f^(n+1) on a cell: f(x_K, (t_a + t_b) / 2).
inline double time_average_source(const SpaceTimeField& f, double t_a, double t_b, const Vec2& x) {
  if (!(t_a < t_b)) throw UsageError("time_average_source requires t_a < t_b");
  return f(x, 0.5 * (t_a + t_b));
}

struct TransientOptions {
  SolverOptions solver;
  Quadrature initial_quadrature = Quadrature::centroid;
};

struct TransientSolution {
  TimeGrid grid{std::vector<double>{0.0, 1.0}};
  std::vector<DofVector> states;                // u^(0) ... u^(N)
  std::vector<SolveStats> stats;                // per step 1..N
  std::vector<ActiveSetPartition> partitions;   // converged partition per step 1..N
  ObstacleVector obstacle;
};

/// Called after each time node is available (n = 0 for the initial state, stats null).
using StepHook = std::function<void(std::size_t n, double t, const DofVector& u, const ActiveSetPartition& partition,
                                    const SolveStats* stats)>;

inline void apply_dirichlet(const GradientDiscretisation& gd, const SpaceTimeField& g, double t, DofVector& u) {
  for (std::size_t e = 0; e < gd.num_edges(); ++e)
    if (gd.is_boundary_edge(e)) u.edge(e) = g(gd.mesh().edge(e).midpoint, t);
}

/// Implicit Euler in time, one active-set solve per step, warm-started from the previous step.
inline TransientSolution run_transient(const GradientDiscretisation& gd, const AssembledForms& forms, const ProblemSpec& spec,
                                       const TimeGrid& grid, const TransientOptions& options = {},
                                       const StepHook& hook = {}) {
  if (!(spec.final_time > 0.0)) throw UsageError("final time must be positive");
  if (std::abs(grid.final_time() - spec.final_time) > 1e-12 * spec.final_time)
    throw UsageError("time grid ends at " + std::to_string(grid.final_time()) + " but the problem final time is " +
                     std::to_string(spec.final_time));
  const PolytopalMesh& mesh = gd.mesh();
  TransientSolution sol;
  sol.grid = grid;
  sol.obstacle = interpolate_obstacle(gd, spec.obstacle);
  DofVector u = interpolate_initial(gd, spec.initial, sol.obstacle, options.initial_quadrature);
  apply_dirichlet(gd, spec.dirichlet, 0.0, u);
  sol.states.push_back(u);
  ActiveSetPartition partition = ActiveSetPartition::all_pde(gd.num_cells());
  if (hook) hook(0, 0.0, u, partition, nullptr);

  const ActiveSetSolver solver(gd, forms, options.solver);
  for (std::size_t n = 0; n < grid.num_steps(); ++n) {
    const double dt = grid.step(n), t_next = grid.node(n + 1);
    LviProblem p;
    p.alpha = 1.0 / dt;
    p.obstacle = sol.obstacle;
    p.cell_rhs.resize(static_cast<Eigen::Index>(gd.num_cells()));
    for (std::size_t k = 0; k < gd.num_cells(); ++k) {
      const Cell& c = mesh.cell(k);
      const double f = time_average_source(spec.source, grid.node(n), t_next, c.center);
      p.cell_rhs[static_cast<Eigen::Index>(k)] = c.area * f + p.alpha * c.area * u.cell(k);
    }
    p.boundary_values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(gd.num_edges()));
    for (std::size_t e = 0; e < gd.num_edges(); ++e)
      if (gd.is_boundary_edge(e)) p.boundary_values[static_cast<Eigen::Index>(e)] = spec.dirichlet(mesh.edge(e).midpoint, t_next);

    LviResult r;
    try {
      r = solver.solve(p, partition);
    } catch (const SolverError& err) {
      throw SolverError("time step " + std::to_string(n + 1) + " (t = " + std::to_string(t_next) + "): " + err.what());
    }
    u = std::move(r.u);
    partition = std::move(r.partition);
    sol.states.push_back(u);
    sol.partitions.push_back(partition);
    sol.stats.push_back(std::move(r.stats));
    if (hook) hook(n + 1, t_next, u, partition, &sol.stats.back());
  }
  return sol;
}

inline TransientSolution run_transient(const GradientDiscretisation& gd, const ProblemSpec& spec, const TimeGrid& grid,
                                       const TransientOptions& options = {}, const StepHook& hook = {}) {
  const AssembledForms forms = assemble_forms(gd);
  return run_transient(gd, forms, spec, grid, options, hook);
}

}  // namespace pvi
