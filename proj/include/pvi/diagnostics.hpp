#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>

#include "pvi/error.hpp"
#include "pvi/hmm.hpp"
#include "pvi/quadrature.hpp"
#include "pvi/timeloop.hpp"

namespace pvi {

using SpaceTimeGradient = std::function<Vec2(const Vec2&, double)>;

/// Discrete errors of a transient run against an exact solution.
struct ErrorReport {
  std::vector<double> l2_per_node;      // ||Pi_D u^(n) - u(t^(n))||, n = 0..N
  double l2_max = 0.0;                  // L-infinity(L2)
  double grad_space_time = 0.0;         // (sum_n dt ||grad_D u^(n+1) - grad u(t^(n+1))||^2)^(1/2)
  double final_l2 = 0.0;
  double final_grad = 0.0;
  double exact_final_l2 = 0.0;          // ||u(T)||
  double exact_final_grad = 0.0;        // ||grad u(T)||
  double exact_space_time_grad = 0.0;   // (sum_n dt ||grad u(t^(n+1))||^2)^(1/2)
  bool has_relative = false;
  double relative_l2_max = 0.0;         // l2_max / ||u(T)||
  double relative_grad_space_time = 0.0;
  double relative_final_l2 = 0.0;       // Table-style columns
  double relative_final_grad = 0.0;
};

struct ErrorNormOptions {
  Quadrature quadrature = Quadrature::centroid;
  bool relative = true;
};

namespace detail {

inline double cell_l2_error_sq(const PolytopalMesh& mesh, std::size_t k, double value, const ScalarField& exact,
                               Quadrature rule) {
  return integrate_cell(mesh, k, [&](const Vec2& x) { const double d = value - exact(x); return d * d; }, rule);
}

inline double grad_error_sq(const GradientDiscretisation& gd, const SubcellField& g, const VectorField& exact,
                            Quadrature rule) {
  double s = 0.0;
  for (std::size_t k = 0; k < gd.num_cells(); ++k)
    for (std::size_t i = 0; i < g[k].size(); ++i)
      s += integrate_triangle(subcell(gd.mesh(), k, i),
                              [&](const Vec2& x) { return (g[k][i] - exact(x)).squaredNorm(); }, rule);
  return s;
}

inline double l2_norm_sq(const PolytopalMesh& mesh, const ScalarField& f, Quadrature rule) {
  double s = 0.0;
  for (std::size_t k = 0; k < mesh.num_cells(); ++k)
    s += integrate_cell(mesh, k, [&](const Vec2& x) { const double v = f(x); return v * v; }, rule);
  return s;
}

inline double grad_norm_sq(const GradientDiscretisation& gd, const VectorField& f, Quadrature rule) {
  double s = 0.0;
  for (std::size_t k = 0; k < gd.num_cells(); ++k)
    for (std::size_t i = 0; i < gd.mesh().cell(k).num_edges(); ++i)
      s += integrate_triangle(subcell(gd.mesh(), k, i), [&](const Vec2& x) { return f(x).squaredNorm(); }, rule);
  return s;
}

// Sparse LDL^T of a symmetric matrix restricted to the free DOFs.
struct FreeSystem {
  std::vector<std::size_t> free;
  SparseMatrix matrix;
  Eigen::SimplicialLDLT<SparseMatrix> ldlt;

  FreeSystem(const GradientDiscretisation& gd, const SparseMatrix& full) : free(gd.free_dofs()) {
    std::vector<Eigen::Index> index(gd.num_dofs(), -1);
    for (std::size_t i = 0; i < free.size(); ++i) index[free[i]] = static_cast<Eigen::Index>(i);
    std::vector<Eigen::Triplet<double>> t;
    for (Eigen::Index j = 0; j < full.outerSize(); ++j)
      for (SparseMatrix::InnerIterator it(full, j); it; ++it) {
        const Eigen::Index a = index[static_cast<std::size_t>(it.row())], b = index[static_cast<std::size_t>(j)];
        if (a >= 0 && b >= 0) t.emplace_back(a, b, it.value());
      }
    const auto n = static_cast<Eigen::Index>(free.size());
    matrix.resize(n, n);
    matrix.setFromTriplets(t.begin(), t.end());
    ldlt.compute(matrix);
    if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any())
      throw SolverError("stiffness matrix is not positive definite on the free unknowns");
  }
};

}  // namespace detail

/// Errors of `sol` against the exact solution; relative values are divided by the
/// same-quadrature norms of the exact solution at the final time.
inline ErrorReport error_norms(const GradientDiscretisation& gd, const TransientSolution& sol, const SpaceTimeField& exact,
                               const SpaceTimeGradient& exact_gradient, const ErrorNormOptions& opt = {}) {
  const PolytopalMesh& mesh = gd.mesh();
  const TimeGrid& grid = sol.grid;
  if (sol.states.size() != grid.num_steps() + 1) throw UsageError("solution does not match its time grid");
  ErrorReport r;
  for (std::size_t n = 0; n < sol.states.size(); ++n) {
    const double t = grid.node(n);
    const ScalarField ex = [&](const Vec2& x) { return exact(x, t); };
    double s = 0.0;
    for (std::size_t k = 0; k < mesh.num_cells(); ++k) s += detail::cell_l2_error_sq(mesh, k, sol.states[n].cell(k), ex, opt.quadrature);
    r.l2_per_node.push_back(std::sqrt(s));
    r.l2_max = std::max(r.l2_max, r.l2_per_node.back());
  }
  double gst = 0.0, est = 0.0;
  for (std::size_t n = 0; n < grid.num_steps(); ++n) {
    const double t = grid.node(n + 1), dt = grid.step(n);
    const VectorField eg = [&](const Vec2& x) { return exact_gradient(x, t); };
    const double e2 = detail::grad_error_sq(gd, reconstruct_gradient(gd, sol.states[n + 1]), eg, opt.quadrature);
    const double n2 = detail::grad_norm_sq(gd, eg, opt.quadrature);
    gst += dt * e2;
    est += dt * n2;
    if (n + 1 == grid.num_steps()) r.final_grad = std::sqrt(e2), r.exact_final_grad = std::sqrt(n2);
  }
  r.grad_space_time = std::sqrt(gst);
  r.exact_space_time_grad = std::sqrt(est);
  r.final_l2 = r.l2_per_node.back();
  const double T = grid.final_time();
  r.exact_final_l2 = std::sqrt(detail::l2_norm_sq(mesh, [&](const Vec2& x) { return exact(x, T); }, opt.quadrature));
  if (opt.relative) {
    if (!(r.exact_final_l2 > 0.0) || !(r.exact_final_grad > 0.0) || !(r.exact_space_time_grad > 0.0))
      throw UsageError("relative errors requested but the exact solution has zero norm");
    r.has_relative = true;
    r.relative_l2_max = r.l2_max / r.exact_final_l2;
    r.relative_final_l2 = r.final_l2 / r.exact_final_l2;
    r.relative_final_grad = r.final_grad / r.exact_final_grad;
    r.relative_grad_space_time = r.grad_space_time / r.exact_space_time_grad;
  }
  return r;
}

/// Experimental orders of convergence: rate_i = ln(e_i / e_{i+1}) / ln(h_i / h_{i+1}).
inline std::vector<double> eoc(const std::vector<double>& errors, const std::vector<double>& hs) {
  if (errors.size() != hs.size() || errors.size() < 2) throw UsageError("eoc needs two equally long sequences of length >= 2");
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!(errors[i] > 0.0) || !(hs[i] > 0.0)) throw UsageError("eoc needs positive errors and mesh sizes");
    if (i > 0 && !(hs[i] < hs[i - 1])) throw UsageError("eoc needs strictly decreasing mesh sizes");
  }
  std::vector<double> rates;
  for (std::size_t i = 0; i + 1 < errors.size(); ++i)
    rates.push_back(std::log(errors[i] / errors[i + 1]) / std::log(hs[i] / hs[i + 1]));
  return rates;
}

struct PowerIterationOptions {
  double tolerance = 1e-8;
  std::size_t max_iterations = 10'000;
};

/// Discrete Poincare constant C_D = max ||Pi_D v|| / ||grad_D v|| over free v, i.e. the square
/// root of the largest eigenvalue of A0^{-1} M (power iteration).
inline double estimate_CD(const GradientDiscretisation& gd, const AssembledForms& forms, const PowerIterationOptions& opt = {}) {
  const detail::FreeSystem sys(gd, forms.plain_stiffness);
  const auto n = static_cast<Eigen::Index>(sys.free.size());
  if (n == 0) throw UsageError("no free unknowns");
  const auto nc = static_cast<Eigen::Index>(gd.num_cells());  // free cells come first
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(n);
  mass.head(nc) = forms.cell_mass;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  x.head(nc).setOnes();
  double lambda = 0.0;
  for (std::size_t it = 0; it < opt.max_iterations; ++it) {
    x = sys.ldlt.solve(mass.cwiseProduct(x));
    x /= x.norm();
    const double next = x.dot(mass.cwiseProduct(x)) / x.dot(sys.matrix * x);
    if (it > 0 && std::abs(next - lambda) <= opt.tolerance * next) return std::sqrt(next);
    lambda = next;
  }
  throw SolverError("power iteration for C_D did not converge");
}

/// Limit-conformity measure W_D(omega) = sup |int grad_D v . omega + Pi_D v div omega| / ||grad_D v||,
/// evaluated as sqrt(l^T A0^{-1} l) on the free unknowns.
inline double estimate_WD(const GradientDiscretisation& gd, const AssembledForms& forms, const VectorField& omega,
                          const ScalarField& div_omega, Quadrature rule = Quadrature::fan3) {
  const PolytopalMesh& mesh = gd.mesh();
  Eigen::VectorXd ell = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(gd.num_dofs()));
  for (std::size_t k = 0; k < mesh.num_cells(); ++k) {
    const LocalCellOperator& op = gd.local(k);
    const Cell& c = mesh.cell(k);
    Eigen::VectorXd local = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(c.num_edges()));  // w.r.t. delta
    for (std::size_t i = 0; i < c.num_edges(); ++i) {
      const Vec2 w = integrate_triangle(subcell(mesh, k, i), [&](const Vec2& x) -> Vec2 { return omega(x); }, rule);
      local += op.subcell_gradient[i].transpose() * w;
    }
    ell[static_cast<Eigen::Index>(gd.cell_dof(k))] += integrate_cell(mesh, k, div_omega, rule) - local.sum();
    for (std::size_t i = 0; i < c.num_edges(); ++i) ell[static_cast<Eigen::Index>(gd.edge_dof(c.edges[i]))] += local[static_cast<Eigen::Index>(i)];
  }
  const detail::FreeSystem sys(gd, forms.plain_stiffness);
  Eigen::VectorXd lf(static_cast<Eigen::Index>(sys.free.size()));
  for (std::size_t i = 0; i < sys.free.size(); ++i) lf[static_cast<Eigen::Index>(i)] = ell[static_cast<Eigen::Index>(sys.free[i])];
  return std::sqrt(std::max(0.0, lf.dot(sys.ldlt.solve(lf))));
}

/// The two parts of ||Pi_D P_D phi - phi|| + ||grad_D P_D phi - grad phi||.
struct ConsistencyBound {
  double function_part = 0.0;
  double gradient_part = 0.0;
  double total() const { return function_part + gradient_part; }
};

/// Upper bound of S_D(phi) through the obstacle-compatible interpolant P_D.
inline ConsistencyBound bound_SD(const GradientDiscretisation& gd, const ScalarField& phi, const VectorField& grad_phi,
                                 const ObstacleVector& psi, Quadrature rule = Quadrature::fan3) {
  const DofVector v = interpolate_exact(gd, phi, psi);
  ConsistencyBound b;
  double s = 0.0;
  for (std::size_t k = 0; k < gd.num_cells(); ++k) s += detail::cell_l2_error_sq(gd.mesh(), k, v.cell(k), phi, rule);
  b.function_part = std::sqrt(s);
  b.gradient_part = std::sqrt(detail::grad_error_sq(gd, reconstruct_gradient(gd, v), grad_phi, rule));
  return b;
}

/// I_D^0 = ||u_ini - Pi_D J_D u_ini||.
inline double initial_interp_error(const GradientDiscretisation& gd, const ScalarField& u_ini, const ObstacleVector& psi,
                                   Quadrature interpolation_rule = Quadrature::centroid, Quadrature norm_rule = Quadrature::fan3) {
  const DofVector v = interpolate_initial(gd, u_ini, psi, interpolation_rule);
  double s = 0.0;
  for (std::size_t k = 0; k < gd.num_cells(); ++k) s += detail::cell_l2_error_sq(gd.mesh(), k, v.cell(k), u_ini, norm_rule);
  return std::sqrt(s);
}

/// e_D^P per step: ||ubar^(n+1) - Pi_D P_D u(t^(n+1))||, with ubar^(n+1) the time average of
/// the exact solution over (t^(n), t^(n+1)) (Simpson rule in time).
inline std::vector<double> exact_interpolation_errors(const GradientDiscretisation& gd, const TimeGrid& grid,
                                                      const SpaceTimeField& exact, const ObstacleVector& psi,
                                                      Quadrature rule = Quadrature::fan3) {
  std::vector<double> out;
  for (std::size_t n = 0; n < grid.num_steps(); ++n) {
    const double ta = grid.node(n), tb = grid.node(n + 1), tm = 0.5 * (ta + tb);
    const DofVector v = interpolate_exact(gd, [&](const Vec2& x) { return exact(x, tb); }, psi);
    const ScalarField avg = [&](const Vec2& x) { return (exact(x, ta) + 4.0 * exact(x, tm) + exact(x, tb)) / 6.0; };
    double s = 0.0;
    for (std::size_t k = 0; k < gd.num_cells(); ++k) s += detail::cell_l2_error_sq(gd.mesh(), k, v.cell(k), avg, rule);
    out.push_back(std::sqrt(s));
  }
  return out;
}

/// GD quality measures for one discretisation.
struct GdQualityReport {
  double h = 0.0;
  double c_d = 0.0;
  std::vector<double> w_d;   // one per limit-conformity probe
  std::vector<double> s_d;   // one S_D upper bound per consistency probe
  double i_d0 = 0.0;
};

struct WdProbe {
  std::string name;
  VectorField field;
  ScalarField divergence;
};

struct SdProbe {
  std::string name;
  ScalarField function;
  VectorField gradient;
};

inline GdQualityReport quality_report(const GradientDiscretisation& gd, const AssembledForms& forms,
                                      const std::vector<WdProbe>& wd_probes, const std::vector<SdProbe>& sd_probes,
                                      const ScalarField& u_ini, const ObstacleVector& psi) {
  GdQualityReport r;
  r.h = mesh_size(gd.mesh());
  r.c_d = estimate_CD(gd, forms);
  for (const auto& p : wd_probes) r.w_d.push_back(estimate_WD(gd, forms, p.field, p.divergence));
  for (const auto& p : sd_probes) r.s_d.push_back(bound_SD(gd, p.function, p.gradient, psi).total());
  r.i_d0 = initial_interp_error(gd, u_ini, psi);
  return r;
}

}  // namespace pvi
