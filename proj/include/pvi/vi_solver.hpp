#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include "pvi/error.hpp"
#include "pvi/hmm.hpp"

namespace pvi {

/// Partition of the cells into A (PDE row enforced) and B (u_K = psi_K enforced).
/// Stored as a contact indicator, so A and B are disjoint and cover all cells.
struct ActiveSetPartition {
  std::vector<bool> contact;

  /// A = all cells, B = empty.
  static ActiveSetPartition all_pde(std::size_t num_cells) { return {std::vector<bool>(num_cells, false)}; }

  std::size_t size() const { return contact.size(); }
  bool in_contact(std::size_t k) const { return contact[k]; }
  std::size_t num_contact() const { return static_cast<std::size_t>(std::count(contact.begin(), contact.end(), true)); }

  std::vector<std::size_t> pde_cells() const { return select(false); }
  std::vector<std::size_t> contact_cells() const { return select(true); }

  bool operator==(const ActiveSetPartition&) const = default;

  std::string describe(std::size_t max_listed = 20) const {
    const auto b = contact_cells();
    std::string s = "B = {";
    for (std::size_t i = 0; i < b.size() && i < max_listed; ++i) s += (i ? ", " : "") + std::to_string(b[i]);
    if (b.size() > max_listed) s += ", ... (" + std::to_string(b.size()) + " cells)";
    return s + "}";
  }

 private:
  std::vector<std::size_t> select(bool value) const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < contact.size(); ++k)
      if (contact[k] == value) out.push_back(k);
    return out;
  }
};

/// One implicit step posed as an elliptic linear VI:
/// alpha |K| u_K + sum_sigma |sigma| F_{K,sigma}(u) >= cell_rhs_K, u_K >= psi_K, complementarity,
/// plus conservation on interior edges and u_sigma = boundary_values_sigma on the boundary.
struct LviProblem {
  double alpha = 1.0;               // 1 / delta t
  Eigen::VectorXd cell_rhs;         // |K| f_K + alpha |K| u_K^(n)
  ObstacleVector obstacle;
  Eigen::VectorXd boundary_values;  // one entry per edge; interior entries ignored
};

struct SolverOptions {
  /// tau_c = complementarity_tol * max(1, |rhs|_inf).
  double complementarity_tol = 1e-10;
  /// Relative residual required from the linear solver.
  double linear_tol = 1e-12;
  /// Sparse LDL^T up to this many free unknowns, preconditioned CG above.
  std::size_t direct_limit = 200'000;
  std::size_t cg_max_iterations = 20'000;
};

struct SolveStats {
  std::size_t iterations = 0;               // linear solves, including the one that confirms the fixed point

  std::vector<std::size_t> set_changes;     // cells that changed set after each iteration
  std::vector<double> linear_residuals;     // relative residual of each inner solve
  double complementarity_residual = 0.0;    // max_K |min(u_K - psi_K, residual_K)|
  double conservation_defect = 0.0;         // max |F_{K,sigma} + F_{L,sigma}|
  double tolerance = 0.0;                   // tau_c used

  /// Partition updates before the fixed point, i.e. the loop index at exit. The monotonicity
  /// bound caps this at #cells; a contact solve on a single cell needs 2 solves but 1 update.
  std::size_t set_updates() const { return iterations == 0 ? 0 : iterations - 1; }
};

struct LviResult {
  DofVector u;
  ActiveSetPartition partition;
  SolveStats stats;
};

struct ComplementarityReport {
  Eigen::VectorXd residual;   // residual_K
  Eigen::VectorXd gap;        // u_K - psi_K
  Eigen::VectorXd min_value;  // min(gap, residual)
  double max_abs = 0.0;
  double scale = 1.0;
  double tolerance = 0.0;
  std::vector<std::size_t> flagged;  // cells with |min| > tolerance
};

inline void check_problem(const GradientDiscretisation& gd, const LviProblem& p) {
  const auto nc = static_cast<Eigen::Index>(gd.num_cells());
  if (!(p.alpha > 0.0) || !std::isfinite(p.alpha)) throw UsageError("LVI problem requires alpha > 0");
  if (p.cell_rhs.size() != nc || p.obstacle.values.size() != nc)
    throw UsageError("LVI problem right-hand side / obstacle size does not match the number of cells");
  if (p.boundary_values.size() != static_cast<Eigen::Index>(gd.num_edges()))
    throw UsageError("LVI problem boundary values must have one entry per edge");
  if (!p.cell_rhs.allFinite()) throw UsageError("LVI problem right-hand side is not finite");
}

inline double rhs_scale(const LviProblem& p) {
  return std::max(1.0, p.cell_rhs.size() ? p.cell_rhs.cwiseAbs().maxCoeff() : 0.0);
}

/// residual_K = alpha |K| u_K + sum_sigma |sigma| F_{K,sigma}(u) - cell_rhs_K.
inline Eigen::VectorXd cell_residual(const GradientDiscretisation& gd, const AssembledForms& forms,
                                     const LviProblem& p, const DofVector& u) {
  const auto nc = static_cast<Eigen::Index>(gd.num_cells());
  const Eigen::VectorXd Au = forms.stiffness * u.values();
  return p.alpha * forms.cell_mass.cwiseProduct(u.cells()) + Au.head(nc) - p.cell_rhs;
}

inline ComplementarityReport complementarity_residual(const GradientDiscretisation& gd, const AssembledForms& forms,
                                                      const LviProblem& p, const DofVector& u,
                                                      double complementarity_tol = SolverOptions{}.complementarity_tol) {
  check_problem(gd, p);
  ComplementarityReport r;
  r.residual = cell_residual(gd, forms, p, u);
  r.gap = u.cells() - p.obstacle.values;
  r.min_value = r.gap.cwiseMin(r.residual);
  r.scale = rhs_scale(p);
  r.tolerance = complementarity_tol * r.scale;
  for (Eigen::Index k = 0; k < r.min_value.size(); ++k) {
    const double a = std::abs(r.min_value[k]);
    r.max_abs = std::max(r.max_abs, a);
    if (a > r.tolerance) r.flagged.push_back(static_cast<std::size_t>(k));
  }
  return r;
}

/// One set-update pass:
///  - a cell of A moves to B when u_K - psi_K <= tau_c (it reached or crossed the obstacle);
///  - a cell of B moves to A when its residual is < -tau_c (the contact force would pull)
///    or when u_K < psi_K - tau_c (its contact value is not honoured).
/// Exact ties land in B.
inline ActiveSetPartition update_partition(const GradientDiscretisation& gd, const AssembledForms& forms,
                                           const LviProblem& p, const DofVector& u, const ActiveSetPartition& current,
                                           double complementarity_tol = SolverOptions{}.complementarity_tol) {
  if (current.size() != gd.num_cells()) throw UsageError("partition size does not match the number of cells");
  const double tau = complementarity_tol * rhs_scale(p);
  const Eigen::VectorXd r = cell_residual(gd, forms, p, u);
  ActiveSetPartition next = current;
  for (std::size_t k = 0; k < gd.num_cells(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    const double gap = u.cell(k) - p.obstacle[k];
    if (!current.contact[k])
      next.contact[k] = gap <= tau;
    else
      next.contact[k] = !(r[i] < -tau || gap < -tau);
  }
  return next;
}

/// Monotonicity (active-set) iterations for one LVI, reusing S = alpha M + A across calls
/// with the same alpha.
class ActiveSetSolver {
 public:
  ActiveSetSolver(const GradientDiscretisation& gd, const AssembledForms& forms, SolverOptions options = {})
      : gd_(gd), forms_(forms), options_(options) {}

  const SolverOptions& options() const { return options_; }

  /// Solve with partition fixed: u_K = psi_K on B, PDE rows on A, conservation on interior edges.
  DofVector solve_partition(const LviProblem& p, const ActiveSetPartition& part, double* rel_residual = nullptr) const {
    const SparseMatrix& S = system(p.alpha);
    const std::size_t nc = gd_.num_cells(), n = gd_.num_dofs();
    std::vector<Eigen::Index> index(n, -1);
    DofVector u = gd_.zero_vector();
    Eigen::Index nfree = 0;
    for (std::size_t k = 0; k < nc; ++k) {
      if (part.contact[k])
        u.cell(k) = p.obstacle[k];
      else
        index[k] = nfree++;
    }
    for (std::size_t e = 0; e < gd_.num_edges(); ++e) {
      if (gd_.is_boundary_edge(e))
        u.edge(e) = p.boundary_values[static_cast<Eigen::Index>(e)];
      else
        index[nc + e] = nfree++;
    }
    if (rel_residual) *rel_residual = 0.0;
    if (nfree == 0) return u;

    Eigen::VectorXd b = Eigen::VectorXd::Zero(nfree);
    for (std::size_t k = 0; k < nc; ++k)
      if (index[k] >= 0) b[index[k]] = p.cell_rhs[static_cast<Eigen::Index>(k)];
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(S.nonZeros()));
    for (Eigen::Index j = 0; j < S.outerSize(); ++j) {
      const Eigen::Index jj = index[static_cast<std::size_t>(j)];
      const double xj = u.values()[j];
      for (SparseMatrix::InnerIterator it(S, j); it; ++it) {
        const Eigen::Index ii = index[static_cast<std::size_t>(it.row())];
        if (ii < 0) continue;
        if (jj >= 0)
          trip.emplace_back(ii, jj, it.value());
        else
          b[ii] -= it.value() * xj;
      }
    }
    SparseMatrix Sf(nfree, nfree);
    Sf.setFromTriplets(trip.begin(), trip.end());

    Eigen::VectorXd x;
    if (static_cast<std::size_t>(nfree) <= options_.direct_limit) {
      Eigen::SimplicialLDLT<SparseMatrix> ldlt(Sf);
      if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any())
        throw SolverError("singular or indefinite reduced system for partition " + part.describe());
      x = ldlt.solve(b);
    } else {
      Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::IncompleteCholesky<double>> cg;
      cg.setTolerance(options_.linear_tol);
      cg.setMaxIterations(static_cast<Eigen::Index>(options_.cg_max_iterations));
      cg.compute(Sf);
      if (cg.info() != Eigen::Success) throw SolverError("preconditioner setup failed for partition " + part.describe());
      x = cg.solve(b);
      if (cg.info() != Eigen::Success)
        throw SolverError("conjugate gradients did not converge for partition " + part.describe());
    }
    const double bn = b.norm();
    const double res = (Sf * x - b).norm() / (bn > 0.0 ? bn : 1.0);
    if (!x.allFinite() || res > std::max(1e3 * options_.linear_tol, 1e-9))
      throw SolverError("linear solve failed (relative residual " + std::to_string(res) + ") for partition " + part.describe());
    if (rel_residual) *rel_residual = res;
    for (std::size_t i = 0; i < n; ++i)
      if (index[i] >= 0) u.values()[static_cast<Eigen::Index>(i)] = x[index[i]];
    return u;
  }

  LviResult solve(const LviProblem& p, const ActiveSetPartition& warm) const {
    check_problem(gd_, p);
    if (warm.size() != gd_.num_cells()) throw UsageError("warm-start partition size does not match the number of cells");
    const std::size_t cap = gd_.num_cells() + 1;
    LviResult out;
    out.stats.tolerance = options_.complementarity_tol * rhs_scale(p);
    ActiveSetPartition part = warm;
    std::set<std::vector<bool>> visited{part.contact};
    ActiveSetPartition previous = part;
    for (std::size_t it = 1; it <= cap; ++it) {
      double res = 0.0;
      DofVector u = solve_partition(p, part, &res);
      ActiveSetPartition next = update_partition(gd_, forms_, p, u, part, options_.complementarity_tol);
      std::size_t changes = 0;
      for (std::size_t k = 0; k < part.size(); ++k) changes += part.contact[k] != next.contact[k];
      out.stats.iterations = it;
      out.stats.set_changes.push_back(changes);
      out.stats.linear_residuals.push_back(res);
      if (changes == 0) {
        out.stats.complementarity_residual =
            complementarity_residual(gd_, forms_, p, u, options_.complementarity_tol).max_abs;
        out.stats.conservation_defect = conservation_defect(gd_, u);
        out.u = std::move(u);
        out.partition = std::move(part);
        return out;
      }
      if (!visited.insert(next.contact).second)
        throw SolverError("active-set iterations cycle after " + std::to_string(it) + " iterations; last partitions " +
                          part.describe() + " and " + next.describe());
      previous = std::move(part);
      part = std::move(next);
    }
    throw SolverError("active-set iterations exceeded the safeguard of " + std::to_string(cap) +
                      " iterations; last partitions " + previous.describe() + " and " + part.describe());
  }

 private:
  const SparseMatrix& system(double alpha) const {
    if (!cached_alpha_ || *cached_alpha_ != alpha) {
      const auto nc = static_cast<Eigen::Index>(gd_.num_cells());
      SparseMatrix D(forms_.stiffness.rows(), forms_.stiffness.cols());
      std::vector<Eigen::Triplet<double>> diag;
      for (Eigen::Index k = 0; k < nc; ++k) diag.emplace_back(k, k, alpha * forms_.cell_mass[k]);
      D.setFromTriplets(diag.begin(), diag.end());
      system_ = forms_.stiffness + D;
      cached_alpha_ = alpha;
    }
    return system_;
  }

  const GradientDiscretisation& gd_;
  const AssembledForms& forms_;
  SolverOptions options_;
  mutable std::optional<double> cached_alpha_;
  mutable SparseMatrix system_;
};

inline LviResult solve_lvi(const GradientDiscretisation& gd, const AssembledForms& forms, const LviProblem& p,
                           const ActiveSetPartition& warm, const SolverOptions& options = {}) {
  return ActiveSetSolver(gd, forms, options).solve(p, warm);
}

}  // namespace pvi
