#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "pvi/error.hpp"
#include "pvi/mesh.hpp"
#include "pvi/quadrature.hpp"

namespace pvi {

using Mat2 = Eigen::Matrix2d;
using SparseMatrix = Eigen::SparseMatrix<double>;
using ScalarField = std::function<double(const Vec2&)>;
using VectorField = std::function<Vec2(const Vec2&)>;
using TensorField = std::function<Mat2(const Vec2&)>;

/// Discrete unknown v = ((v_K)_K, (v_sigma)_sigma): cell values first, then edge values.
/// Boundary-edge entries hold their prescribed (Dirichlet) value.
class DofVector {
 public:
  DofVector() = default;
  DofVector(std::size_t num_cells, std::size_t num_edges)
      : num_cells_(num_cells), values_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_cells + num_edges))) {}
  DofVector(std::size_t num_cells, Eigen::VectorXd values) : num_cells_(num_cells), values_(std::move(values)) {}

  double& cell(std::size_t k) { return values_[static_cast<Eigen::Index>(k)]; }
  double cell(std::size_t k) const { return values_[static_cast<Eigen::Index>(k)]; }
  double& edge(std::size_t e) { return values_[static_cast<Eigen::Index>(num_cells_ + e)]; }
  double edge(std::size_t e) const { return values_[static_cast<Eigen::Index>(num_cells_ + e)]; }

  auto cells() const { return values_.head(static_cast<Eigen::Index>(num_cells_)); }
  auto cells() { return values_.head(static_cast<Eigen::Index>(num_cells_)); }
  auto edges() const { return values_.tail(values_.size() - static_cast<Eigen::Index>(num_cells_)); }
  auto edges() { return values_.tail(values_.size() - static_cast<Eigen::Index>(num_cells_)); }

  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }
  std::size_t num_cells() const { return num_cells_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

 private:
  std::size_t num_cells_ = 0;
  Eigen::VectorXd values_;
};

/// Approximate obstacle psi_K, one value per cell.
struct ObstacleVector {
  Eigen::VectorXd values;

  double operator[](std::size_t k) const { return values[static_cast<Eigen::Index>(k)]; }
  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
};

/// Per-cell HMM operators. Everything acts on the local differences
/// delta_sigma = v_sigma - v_K, on which the reconstructed gradient depends.
struct LocalCellOperator {
  std::size_t cell = 0;
  /// Consistent gradient: grad_K v = consistent_gradient * (v_sigma)_sigma (= same matrix times delta).
  Eigen::Matrix<double, 2, Eigen::Dynamic> consistent_gradient;
  /// Rows x_sigma - x_K.
  Eigen::Matrix<double, Eigen::Dynamic, 2> offsets;
  /// R_K(v) = stabilization * delta.
  Eigen::MatrixXd stabilization;
  /// |D_{K,sigma}| = |sigma| d_{K,sigma} / 2.
  Eigen::VectorXd subcell_volumes;
  /// Gradient on D_{K,sigma} is subcell_gradient[sigma] * delta.
  std::vector<Eigen::Matrix<double, 2, Eigen::Dynamic>> subcell_gradient;
  /// W_K with int_K Lambda grad_D u . grad_D v = delta(v)^T W_K delta(u); `plain` uses Lambda = Id.
  Eigen::MatrixXd weighted_stiffness;
  Eigen::MatrixXd plain_stiffness;

  std::size_t num_edges() const { return static_cast<std::size_t>(subcell_volumes.size()); }
};

/// Eigenvalue window accepted for the diffusion tensor.
struct SpdBounds {
  double lambda_min = 0.0;  // exclusive when 0
  double lambda_max = std::numeric_limits<double>::infinity();
};

/// The HMM gradient discretisation on a polytopal mesh.
class GradientDiscretisation {
 public:
  GradientDiscretisation(std::shared_ptr<const PolytopalMesh> mesh, std::vector<Mat2> diffusion,
                         const SpdBounds& bounds = {})
      : mesh_(std::move(mesh)), diffusion_(std::move(diffusion)) {
    if (!mesh_) throw UsageError("null mesh");
    if (diffusion_.size() != mesh_->num_cells())
      throw UsageError("diffusion tensor count does not match the number of cells");
    for (std::size_t k = 0; k < diffusion_.size(); ++k) check_spd(k, bounds);
    local_.reserve(mesh_->num_cells());
    for (std::size_t k = 0; k < mesh_->num_cells(); ++k) local_.push_back(build_local(k));
    boundary_.resize(mesh_->num_edges());
    for (std::size_t e = 0; e < mesh_->num_edges(); ++e) boundary_[e] = mesh_->edge(e).boundary();
  }

  const PolytopalMesh& mesh() const { return *mesh_; }
  std::shared_ptr<const PolytopalMesh> mesh_ptr() const { return mesh_; }
  const LocalCellOperator& local(std::size_t k) const { return local_[k]; }
  const Mat2& diffusion(std::size_t k) const { return diffusion_[k]; }

  std::size_t num_cells() const { return mesh_->num_cells(); }
  std::size_t num_edges() const { return mesh_->num_edges(); }
  std::size_t num_dofs() const { return num_cells() + num_edges(); }
  std::size_t cell_dof(std::size_t k) const { return k; }
  std::size_t edge_dof(std::size_t e) const { return num_cells() + e; }
  bool is_boundary_edge(std::size_t e) const { return boundary_[e]; }

  /// Cell DOFs followed by interior-edge DOFs.
  std::vector<std::size_t> free_dofs() const {
    std::vector<std::size_t> f;
    f.reserve(num_dofs());
    for (std::size_t k = 0; k < num_cells(); ++k) f.push_back(cell_dof(k));
    for (std::size_t e = 0; e < num_edges(); ++e)
      if (!boundary_[e]) f.push_back(edge_dof(e));
    return f;
  }

  DofVector zero_vector() const { return DofVector(num_cells(), num_edges()); }

  /// delta_sigma = v_sigma - v_K over the local edges of cell k.
  Eigen::VectorXd local_differences(const DofVector& v, std::size_t k) const {
    const Cell& c = mesh_->cell(k);
    Eigen::VectorXd d(static_cast<Eigen::Index>(c.num_edges()));
    for (std::size_t i = 0; i < c.num_edges(); ++i) d[static_cast<Eigen::Index>(i)] = v.edge(c.edges[i]) - v.cell(k);
    return d;
  }

 private:
  void check_spd(std::size_t k, const SpdBounds& bounds) const {
    const Mat2& L = diffusion_[k];
    const double scale = std::max(1.0, L.norm());
    if (!L.allFinite() || std::abs(L(0, 1) - L(1, 0)) > 1e-12 * scale)
      throw UsageError("diffusion tensor on cell " + std::to_string(k) + " is not symmetric");
    const Eigen::SelfAdjointEigenSolver<Mat2> es(L);
    const double lo = es.eigenvalues()[0], hi = es.eigenvalues()[1];
    if (!(lo > 0.0) || lo < bounds.lambda_min || hi > bounds.lambda_max)
      throw UsageError("diffusion tensor on cell " + std::to_string(k) + " is not SPD within the configured bounds (eigenvalues " +
                       std::to_string(lo) + ", " + std::to_string(hi) + ")");
  }

  LocalCellOperator build_local(std::size_t k) const {
    const Cell& c = mesh_->cell(k);
    const auto m = static_cast<Eigen::Index>(c.num_edges());
    const double beta = std::numbers::sqrt2;  // sqrt(d) with d = 2
    LocalCellOperator op;
    op.cell = k;
    op.consistent_gradient.resize(2, m);
    op.offsets.resize(m, 2);
    op.subcell_volumes.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const Edge& e = mesh_->edge(c.edges[ui]);
      op.consistent_gradient.col(i) = e.length * c.normals[ui] / c.area;
      op.offsets.row(i) = (e.midpoint - c.center).transpose();
      op.subcell_volumes[i] = 0.5 * e.length * c.distances[ui];
    }
    op.stabilization = Eigen::MatrixXd::Identity(m, m) - op.offsets * op.consistent_gradient;
    op.subcell_gradient.resize(static_cast<std::size_t>(m));
    op.weighted_stiffness = Eigen::MatrixXd::Zero(m, m);
    op.plain_stiffness = Eigen::MatrixXd::Zero(m, m);
    const Mat2& L = diffusion_[k];
    for (Eigen::Index i = 0; i < m; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      Eigen::Matrix<double, 2, Eigen::Dynamic> B =
          op.consistent_gradient + (beta / c.distances[ui]) * c.normals[ui] * op.stabilization.row(i);
      op.weighted_stiffness.noalias() += op.subcell_volumes[i] * B.transpose() * L * B;
      op.plain_stiffness.noalias() += op.subcell_volumes[i] * B.transpose() * B;
      op.subcell_gradient[ui] = std::move(B);
    }
    // Symmetrise away round-off so assembled matrices are symmetric to the last bit.
    op.weighted_stiffness = 0.5 * (op.weighted_stiffness + op.weighted_stiffness.transpose()).eval();
    op.plain_stiffness = 0.5 * (op.plain_stiffness + op.plain_stiffness.transpose()).eval();
    return op;
  }

  std::shared_ptr<const PolytopalMesh> mesh_;
  std::vector<Mat2> diffusion_;
  std::vector<LocalCellOperator> local_;
  std::vector<bool> boundary_;
};

/// Build the discretisation with Lambda evaluated at each cell point.
inline GradientDiscretisation build_gd(std::shared_ptr<const PolytopalMesh> mesh, const TensorField& diffusion,
                                       const SpdBounds& bounds = {}) {
  if (!mesh) throw UsageError("null mesh");
  std::vector<Mat2> L;
  L.reserve(mesh->num_cells());
  for (const Cell& c : mesh->cells()) L.push_back(diffusion(c.center));
  return GradientDiscretisation(std::move(mesh), std::move(L), bounds);
}

inline GradientDiscretisation build_gd(std::shared_ptr<const PolytopalMesh> mesh) {
  return build_gd(std::move(mesh), [](const Vec2&) { return Mat2::Identity(); });
}

/// Pi_D v: the piecewise-constant cell field v_K.
inline Eigen::VectorXd reconstruct_function(const GradientDiscretisation& gd, const DofVector& v) {
  if (v.size() != gd.num_dofs()) throw UsageError("DofVector size does not match the discretisation");
  return v.cells();
}

/// L2 norm of Pi_D v (exact for the piecewise-constant reconstruction).
inline double function_l2_norm(const GradientDiscretisation& gd, const DofVector& v) {
  double s = 0.0;
  for (std::size_t k = 0; k < gd.num_cells(); ++k) s += gd.mesh().cell(k).area * v.cell(k) * v.cell(k);
  return std::sqrt(s);
}

/// Per-cell, per-local-edge constant values of grad_D v.
using SubcellField = std::vector<std::vector<Vec2>>;

inline SubcellField reconstruct_gradient(const GradientDiscretisation& gd, const DofVector& v) {
  if (v.size() != gd.num_dofs()) throw UsageError("DofVector size does not match the discretisation");
  SubcellField g(gd.num_cells());
  for (std::size_t k = 0; k < gd.num_cells(); ++k) {
    const LocalCellOperator& op = gd.local(k);
    const Eigen::VectorXd d = gd.local_differences(v, k);
    g[k].resize(op.num_edges());
    for (std::size_t i = 0; i < op.num_edges(); ++i) g[k][i] = op.subcell_gradient[i] * d;
  }
  return g;
}

/// Stabilisation residuals R_K(v)_sigma over the local edges of cell k.
inline Eigen::VectorXd stabilization(const GradientDiscretisation& gd, const DofVector& v, std::size_t k) {
  return gd.local(k).stabilization * gd.local_differences(v, k);
}

struct AssembledForms {
  /// int Lambda grad_D e_i . grad_D e_j over all DOFs (cells, then edges).
  SparseMatrix stiffness;
  /// Same with Lambda = Id.
  SparseMatrix plain_stiffness;
  /// M_KK = |K|.
  Eigen::VectorXd cell_mass;
};

namespace detail {

inline void scatter_local(std::vector<Eigen::Triplet<double>>& trip, const Cell& c, std::size_t k,
                          std::size_t num_cells, const Eigen::MatrixXd& W) {
  // Local DOFs (v_K, v_sigma...) with delta = P v, P = [-1 | I]; local matrix P^T W P.
  const auto m = W.rows();
  const Eigen::VectorXd rowsum = W.rowwise().sum();
  const double total = rowsum.sum();
  auto gdof = [&](Eigen::Index i) { return static_cast<Eigen::Index>(num_cells + c.edges[static_cast<std::size_t>(i)]); };
  const auto kdof = static_cast<Eigen::Index>(k);
  trip.emplace_back(kdof, kdof, total);
  for (Eigen::Index i = 0; i < m; ++i) {
    trip.emplace_back(kdof, gdof(i), -rowsum[i]);
    trip.emplace_back(gdof(i), kdof, -rowsum[i]);
    for (Eigen::Index j = 0; j < m; ++j) trip.emplace_back(gdof(i), gdof(j), W(i, j));
  }
}

inline double relative_asymmetry(const SparseMatrix& A) {
  const SparseMatrix At = A.transpose();
  const double n = A.norm();
  return n > 0.0 ? (A - At).norm() / n : 0.0;
}

}  // namespace detail

inline AssembledForms assemble_forms(const GradientDiscretisation& gd) {
  const PolytopalMesh& mesh = gd.mesh();
  const auto n = static_cast<Eigen::Index>(gd.num_dofs());
  std::vector<Eigen::Triplet<double>> tw, tp;
  for (std::size_t k = 0; k < mesh.num_cells(); ++k) {
    const LocalCellOperator& op = gd.local(k);
    detail::scatter_local(tw, mesh.cell(k), k, mesh.num_cells(), op.weighted_stiffness);
    detail::scatter_local(tp, mesh.cell(k), k, mesh.num_cells(), op.plain_stiffness);
  }
  AssembledForms f;
  f.stiffness.resize(n, n);
  f.plain_stiffness.resize(n, n);
  f.stiffness.setFromTriplets(tw.begin(), tw.end());
  f.plain_stiffness.setFromTriplets(tp.begin(), tp.end());
  f.cell_mass.resize(static_cast<Eigen::Index>(mesh.num_cells()));
  for (std::size_t k = 0; k < mesh.num_cells(); ++k) f.cell_mass[static_cast<Eigen::Index>(k)] = mesh.cell(k).area;
  if (detail::relative_asymmetry(f.stiffness) > 1e-12 || detail::relative_asymmetry(f.plain_stiffness) > 1e-12)
    throw SolverError("assembled stiffness matrix is not symmetric (internal error)");
  return f;
}

/// Fluxes F_{K,sigma}(v) over the local edges of cell k, defined by
/// sum_sigma |sigma| F_{K,sigma}(u) (w_K - w_sigma) = int_K Lambda grad_D u . grad_D w.
inline Eigen::VectorXd fluxes(const GradientDiscretisation& gd, const DofVector& v, std::size_t k) {
  const Cell& c = gd.mesh().cell(k);
  Eigen::VectorXd F = -(gd.local(k).weighted_stiffness * gd.local_differences(v, k));
  for (std::size_t i = 0; i < c.num_edges(); ++i) F[static_cast<Eigen::Index>(i)] /= gd.mesh().edge(c.edges[i]).length;
  return F;
}

/// Largest |F_{K,sigma} + F_{L,sigma}| over interior edges.
inline double conservation_defect(const GradientDiscretisation& gd, const DofVector& v) {
  const PolytopalMesh& mesh = gd.mesh();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.num_edges()));
  for (std::size_t k = 0; k < mesh.num_cells(); ++k) {
    const Eigen::VectorXd F = fluxes(gd, v, k);
    for (std::size_t i = 0; i < mesh.cell(k).num_edges(); ++i) sum[static_cast<Eigen::Index>(mesh.cell(k).edges[i])] += F[static_cast<Eigen::Index>(i)];
  }
  double worst = 0.0;
  for (std::size_t e = 0; e < mesh.num_edges(); ++e)
    if (!mesh.edge(e).boundary()) worst = std::max(worst, std::abs(sum[static_cast<Eigen::Index>(e)]));
  return worst;
}

/// psi_K = psi(x_K).
inline ObstacleVector interpolate_obstacle(const GradientDiscretisation& gd, const ScalarField& psi) {
  ObstacleVector o{Eigen::VectorXd(static_cast<Eigen::Index>(gd.num_cells()))};
  for (std::size_t k = 0; k < gd.num_cells(); ++k) o.values[static_cast<Eigen::Index>(k)] = psi(gd.mesh().cell(k).center);
  return o;
}

/// J_D applied to given cell averages: edges 0, cells clipped to v_K >= psi_K.
inline DofVector interpolate_initial(const GradientDiscretisation& gd, const Eigen::VectorXd& cell_averages,
                                     const ObstacleVector& psi) {
  if (static_cast<std::size_t>(cell_averages.size()) != gd.num_cells() || psi.size() != gd.num_cells())
    throw UsageError("cell data size does not match the number of cells");
  DofVector v = gd.zero_vector();
  for (std::size_t k = 0; k < gd.num_cells(); ++k) v.cell(k) = std::max(cell_averages[static_cast<Eigen::Index>(k)], psi[k]);
  return v;
}

/// J_D u_ini: cell averages by quadrature, edges 0, then clipped into K_D.
inline DofVector interpolate_initial(const GradientDiscretisation& gd, const ScalarField& u_ini, const ObstacleVector& psi,
                                     Quadrature rule = Quadrature::centroid) {
  Eigen::VectorXd avg(static_cast<Eigen::Index>(gd.num_cells()));
  for (std::size_t k = 0; k < gd.num_cells(); ++k)
    avg[static_cast<Eigen::Index>(k)] = integrate_cell(gd.mesh(), k, u_ini, rule) / gd.mesh().cell(k).area;
  return interpolate_initial(gd, avg, psi);
}

/// Obstacle-compatible interpolant P_D: v_sigma = phi(x_sigma), v_K = max(phi(x_K), psi_K).
/// For diagnostics only.
inline DofVector interpolate_exact(const GradientDiscretisation& gd, const ScalarField& phi, const ObstacleVector& psi) {
  DofVector v = gd.zero_vector();
  const PolytopalMesh& mesh = gd.mesh();
  for (std::size_t k = 0; k < mesh.num_cells(); ++k) v.cell(k) = std::max(phi(mesh.cell(k).center), psi[k]);
  for (std::size_t e = 0; e < mesh.num_edges(); ++e) v.edge(e) = phi(mesh.edge(e).midpoint);
  return v;
}

}  // namespace pvi
