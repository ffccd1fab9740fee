#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "pvi/cases.hpp"
#include "pvi/diagnostics.hpp"
#include "pvi/hmm.hpp"
#include "pvi/mesh_generators.hpp"
#include "pvi/timeloop.hpp"

namespace pvi {

/// One row of a convergence table.
struct ConvergenceRow {
  std::size_t level = 0;
  std::size_t cells = 0;
  std::size_t steps = 0;
  double h = 0.0;
  double dt = 0.0;
  ErrorReport errors;
  std::size_t max_iterations = 0;            // largest active-set iteration count over the steps
  double max_complementarity_ratio = 0.0;    // max over steps of residual / tolerance
};

/// Solve `c` on one mesh with its time-step rule and measure the errors.
inline ConvergenceRow run_level(const AnalyticCase& c, std::shared_ptr<const PolytopalMesh> mesh, const TimeStepRule& rule,
                                const TransientOptions& options = {}, const ErrorNormOptions& norms = {}) {
  if (!c.has_exact()) throw UsageError("case '" + c.name + "' has no exact solution");
  const GradientDiscretisation gd = build_gd(mesh, c.spec.diffusion);
  ConvergenceRow row;
  row.h = mesh_size(*mesh);
  row.cells = mesh->num_cells();
  const TimeGrid grid = TimeGrid::with_max_step(c.spec.final_time, rule.step(row.h));
  row.steps = grid.num_steps();
  row.dt = grid.max_step();
  const TransientSolution sol = run_transient(gd, c.spec, grid, options);
  for (const auto& s : sol.stats) {
    row.max_iterations = std::max(row.max_iterations, s.iterations);
    row.max_complementarity_ratio = std::max(row.max_complementarity_ratio, s.complementarity_residual / s.tolerance);
  }
  row.errors = error_norms(gd, sol, *c.exact, *c.exact_gradient, norms);
  return row;
}

/// Convergence study over generated meshes of one family; levels must give decreasing h.
inline std::vector<ConvergenceRow> run_convergence(const AnalyticCase& c, MeshFamily family, const std::vector<std::size_t>& levels,
                                                   const TimeStepRule& rule, const TransientOptions& options = {},
                                                   const ErrorNormOptions& norms = {}) {
  if (levels.empty()) throw UsageError("refinement list is empty");
  std::vector<ConvergenceRow> rows;
  for (std::size_t n : levels) {
    auto mesh = std::make_shared<const PolytopalMesh>(generate_mesh(family, n, c.domain));
    rows.push_back(run_level(c, mesh, rule, options, norms));
    rows.back().level = n;
  }
  return rows;
}

}  // namespace pvi
