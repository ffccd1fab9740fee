#pragma once

#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "oracles.hpp"
#include "pvi/hmm.hpp"
#include "pvi/mesh_generators.hpp"
#include "pvi/vi_solver.hpp"

namespace fixtures {

using namespace pvi;

struct NamedMesh {
  std::string name;
  std::shared_ptr<const PolytopalMesh> mesh;
};

/// Every mesh with at most 8 cells used by the solver property tests.
inline std::vector<NamedMesh> small_meshes() {
  const BoundingBox sq{-1.0, 1.0, -1.0, 1.0};
  std::vector<NamedMesh> out;
  out.push_back({"unit-square", std::make_shared<const PolytopalMesh>(
                                    PolytopalMesh::from_polygons({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {{0, 1, 2, 3}}))});
  out.push_back({"two-rectangles", std::make_shared<const PolytopalMesh>(PolytopalMesh::from_polygons(
                                       {{0, 0}, {1, 0}, {2, 0}, {2, 1}, {1, 1}, {0, 1}}, {{0, 1, 4, 5}, {1, 2, 3, 4}}))});
  out.push_back({"pentagon-triangle", std::make_shared<const PolytopalMesh>(PolytopalMesh::from_polygons(
                                          {{0, 0}, {2, 0}, {2, 1}, {1, 2}, {0, 1}, {2, 2}}, {{0, 1, 2, 3, 4}, {2, 5, 3}}))});
  for (MeshFamily f : {MeshFamily::cartesian, MeshFamily::triangular, MeshFamily::hexagonal, MeshFamily::kershaw}) {
    auto m = std::make_shared<const PolytopalMesh>(generate_mesh(f, 1, sq));
    if (m->num_cells() <= 8) out.push_back({to_string(f) + "-1", m});
  }
  return out;
}

/// A random obstacle problem: random alpha, source, previous state, obstacle and boundary data.
inline LviProblem random_problem(const GradientDiscretisation& gd, std::mt19937& rng, bool homogeneous_boundary) {
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::uniform_real_distribution<double> logalpha(-1.0, 3.0);
  LviProblem p;
  p.alpha = std::pow(10.0, logalpha(rng));
  const auto nc = static_cast<Eigen::Index>(gd.num_cells());
  p.cell_rhs.resize(nc);
  p.obstacle.values.resize(nc);
  for (Eigen::Index k = 0; k < nc; ++k) {
    const double area = gd.mesh().cell(static_cast<std::size_t>(k)).area;
    const double f = 5.0 * U(rng), un = U(rng);
    p.cell_rhs[k] = area * f + p.alpha * area * un;
    p.obstacle.values[k] = 0.5 * U(rng);
  }
  p.boundary_values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(gd.num_edges()));
  if (!homogeneous_boundary)
    for (std::size_t e = 0; e < gd.num_edges(); ++e)
      if (gd.is_boundary_edge(e)) p.boundary_values[static_cast<Eigen::Index>(e)] = 0.5 * U(rng);
  return p;
}

/// The problem condensed onto the cell unknowns, for the dense oracles.
inline oracle::Lcp to_lcp(const GradientDiscretisation& gd, const AssembledForms& forms, const LviProblem& p) {
  Eigen::MatrixXd S(forms.stiffness);
  for (std::size_t k = 0; k < gd.num_cells(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    S(i, i) += p.alpha * forms.cell_mass[i];
  }
  std::vector<Eigen::Index> cells, interior, boundary;
  for (std::size_t k = 0; k < gd.num_cells(); ++k) cells.push_back(static_cast<Eigen::Index>(gd.cell_dof(k)));
  Eigen::VectorXd g(static_cast<Eigen::Index>(gd.mesh().num_boundary_edges()));
  for (std::size_t e = 0; e < gd.num_edges(); ++e) {
    const auto d = static_cast<Eigen::Index>(gd.edge_dof(e));
    if (gd.is_boundary_edge(e)) {
      g[static_cast<Eigen::Index>(boundary.size())] = p.boundary_values[static_cast<Eigen::Index>(e)];
      boundary.push_back(d);
    } else {
      interior.push_back(d);
    }
  }
  return oracle::condense(S, cells, interior, boundary, p.cell_rhs, g, p.obstacle.values);
}

}  // namespace fixtures
