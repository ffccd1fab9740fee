#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "pvi/vi_solver.hpp"

using namespace pvi;

namespace {

std::shared_ptr<const PolytopalMesh> mesh_of(MeshFamily f, std::size_t n) {
  return std::make_shared<const PolytopalMesh>(generate_mesh(f, n, BoundingBox{-1, 1, -1, 1}));
}

LviProblem uniform_problem(const GradientDiscretisation& gd, double alpha, double f, double psi) {
  LviProblem p;
  p.alpha = alpha;
  p.cell_rhs.resize(static_cast<Eigen::Index>(gd.num_cells()));
  for (std::size_t k = 0; k < gd.num_cells(); ++k) p.cell_rhs[static_cast<Eigen::Index>(k)] = f * gd.mesh().cell(k).area;
  p.obstacle.values = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(gd.num_cells()), psi);
  p.boundary_values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(gd.num_edges()));
  return p;
}

}  // namespace

TEST(ViSolver, InactiveObstacleTakesOneIteration) {
  const auto gd = build_gd(mesh_of(MeshFamily::triangular, 3));
  const auto forms = assemble_forms(gd);
  const LviProblem p = uniform_problem(gd, 2.0, 1.0, -1e9);
  const auto r = solve_lvi(gd, forms, p, ActiveSetPartition::all_pde(gd.num_cells()));
  EXPECT_EQ(r.stats.iterations, 1u);
  EXPECT_EQ(r.partition.num_contact(), 0u);
  // Same as the unconstrained solve.
  const DofVector free = ActiveSetSolver(gd, forms).solve_partition(p, ActiveSetPartition::all_pde(gd.num_cells()));
  EXPECT_LT((free.values() - r.u.values()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(r.stats.conservation_defect, 1e-10);
}

// One unit-square cell, dt = 1, u^(n) = 0, f = -4, psi = 0: the unconstrained value is
// -4 / (1 + s) with s = 8 the local stiffness, so the contact partition wins with u_K = 0.
TEST(ViSolver, SingleCellEndsInContact) {
  const auto mesh = fixtures::small_meshes().front().mesh;
  const auto gd = build_gd(mesh);
  const auto forms = assemble_forms(gd);
  const LviProblem p = uniform_problem(gd, 1.0, -4.0, 0.0);
  const DofVector free = ActiveSetSolver(gd, forms).solve_partition(p, ActiveSetPartition::all_pde(1));
  EXPECT_NEAR(free.cell(0), -4.0 / 9.0, 1e-14);
  const auto r = solve_lvi(gd, forms, p, ActiveSetPartition::all_pde(1));
  EXPECT_TRUE(r.partition.in_contact(0));
  EXPECT_DOUBLE_EQ(r.u.cell(0), 0.0);
  EXPECT_EQ(r.stats.iterations, 2u);
  EXPECT_EQ(r.stats.set_updates(), 1u);
  const auto rep = complementarity_residual(gd, forms, p, r.u);
  EXPECT_NEAR(rep.residual[0], 4.0, 1e-14);
  EXPECT_LE(rep.max_abs, rep.tolerance);
}

TEST(ViSolver, MatchesEnumerationAndProjectedGaussSeidel) {
  std::mt19937 rng(20240611);
  for (const auto& nm : fixtures::small_meshes()) {
    const auto gd = build_gd(nm.mesh);
    const auto forms = assemble_forms(gd);
    for (int draw = 0; draw < 20; ++draw) {
      const LviProblem p = fixtures::random_problem(gd, rng, draw % 2 == 0);
      const auto lcp = fixtures::to_lcp(gd, forms, p);
      const auto expected = oracle::enumerate_partitions(lcp);
      ASSERT_TRUE(expected) << nm.name;
      const Eigen::VectorXd pgs = oracle::projected_gauss_seidel(lcp);
      const auto r = solve_lvi(gd, forms, p, ActiveSetPartition::all_pde(gd.num_cells()));
      const double scale = std::max(1.0, expected->cwiseAbs().maxCoeff());
      EXPECT_LT((r.u.cells() - *expected).cwiseAbs().maxCoeff(), 1e-9 * scale) << nm.name << " draw " << draw;
      EXPECT_LT((r.u.cells() - pgs).cwiseAbs().maxCoeff(), 1e-9 * scale) << nm.name << " draw " << draw;
      EXPECT_LE(r.stats.iterations, gd.num_cells() + 1);
      EXPECT_LE(r.stats.set_updates(), gd.num_cells());
    }
  }
}

TEST(ViSolver, SolutionSatisfiesDiscreteComplementarity) {
  std::mt19937 rng(11);
  const auto gd = build_gd(mesh_of(MeshFamily::hexagonal, 3));
  const auto forms = assemble_forms(gd);
  for (int draw = 0; draw < 5; ++draw) {
    const LviProblem p = fixtures::random_problem(gd, rng, false);
    const auto r = solve_lvi(gd, forms, p, ActiveSetPartition::all_pde(gd.num_cells()));
    const auto rep = complementarity_residual(gd, forms, p, r.u);
    EXPECT_LE(rep.max_abs, rep.tolerance);
    EXPECT_GE((rep.gap.array()).minCoeff(), -rep.tolerance);
    EXPECT_GE((rep.residual.array()).minCoeff(), -rep.tolerance);
    EXPECT_LT(r.stats.conservation_defect, 1e-9);
    // The returned partition is a fixed point of the update.
    EXPECT_EQ(update_partition(gd, forms, p, r.u, r.partition), r.partition);
    // Boundary edges carry the Dirichlet data.
    for (std::size_t e = 0; e < gd.num_edges(); ++e)
      if (gd.is_boundary_edge(e)) {
        EXPECT_EQ(r.u.edge(e), p.boundary_values[static_cast<Eigen::Index>(e)]);
      }
  }
}

TEST(ViSolver, WarmStartFromConvergedPartitionNeedsOneIteration) {
  std::mt19937 rng(5);
  const auto gd = build_gd(mesh_of(MeshFamily::cartesian, 4));
  const auto forms = assemble_forms(gd);
  const LviProblem p = fixtures::random_problem(gd, rng, true);
  const auto cold = solve_lvi(gd, forms, p, ActiveSetPartition::all_pde(gd.num_cells()));
  const auto warm = solve_lvi(gd, forms, p, cold.partition);
  EXPECT_EQ(warm.stats.iterations, 1u);
  EXPECT_LE(warm.stats.iterations, cold.stats.iterations);
  EXPECT_LT((warm.u.values() - cold.u.values()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ViSolver, UpdateRuleAndTieBreak) {
  const auto gd = build_gd(fixtures::small_meshes()[1].mesh);  // two cells
  const auto forms = assemble_forms(gd);
  LviProblem p = uniform_problem(gd, 1.0, 0.0, 0.0);
  DofVector u = gd.zero_vector();
  // Both cells sit exactly on the obstacle with zero residual: ties go to contact.
  ActiveSetPartition a = ActiveSetPartition::all_pde(2);
  EXPECT_EQ(update_partition(gd, forms, p, u, a).num_contact(), 2u);
  ActiveSetPartition b;
  b.contact = {true, true};
  EXPECT_EQ(update_partition(gd, forms, p, u, b).num_contact(), 2u);
  // A contact cell below the obstacle is released.
  u.cell(0) = -0.1;
  EXPECT_FALSE(update_partition(gd, forms, p, u, b).in_contact(0));
  // A contact cell whose residual pulls (negative) is released.
  u = gd.zero_vector();
  p.cell_rhs[1] = 1.0;
  EXPECT_FALSE(update_partition(gd, forms, p, u, b).in_contact(1));
  EXPECT_TRUE(update_partition(gd, forms, p, u, b).in_contact(0));
}

TEST(ViSolver, ComplementarityReportFlagsPerturbedCell) {
  const auto gd = build_gd(mesh_of(MeshFamily::cartesian, 2));
  const auto forms = assemble_forms(gd);
  const LviProblem p = uniform_problem(gd, 1.0, -4.0, 0.0);
  const auto r = solve_lvi(gd, forms, p, ActiveSetPartition::all_pde(gd.num_cells()));
  ASSERT_GT(r.partition.num_contact(), 0u);
  const std::size_t k = r.partition.contact_cells().front();
  DofVector u = r.u;
  u.cell(k) += 1e-3;
  const auto rep = complementarity_residual(gd, forms, p, u);
  ASSERT_EQ(rep.flagged.size(), 1u);
  EXPECT_EQ(rep.flagged[0], k);
}

TEST(ViSolver, ContactEverywhereHasZeroReport) {
  const auto gd = build_gd(mesh_of(MeshFamily::cartesian, 2));
  const auto forms = assemble_forms(gd);
  const LviProblem p = uniform_problem(gd, 1.0, -4.0, 0.0);
  const auto rep = complementarity_residual(gd, forms, p, gd.zero_vector());
  EXPECT_EQ(rep.max_abs, 0.0);
  EXPECT_TRUE(rep.flagged.empty());
}

TEST(ViSolver, IterativeBackendAgreesWithDirect) {
  std::mt19937 rng(9);
  const auto gd = build_gd(mesh_of(MeshFamily::triangular, 4));
  const auto forms = assemble_forms(gd);
  const LviProblem p = fixtures::random_problem(gd, rng, false);
  SolverOptions cg;
  cg.direct_limit = 0;
  const auto a = solve_lvi(gd, forms, p, ActiveSetPartition::all_pde(gd.num_cells()));
  const auto b = solve_lvi(gd, forms, p, ActiveSetPartition::all_pde(gd.num_cells()), cg);
  EXPECT_EQ(a.partition, b.partition);
  EXPECT_LT((a.u.values() - b.u.values()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(ViSolver, RejectsInvalidProblems) {
  const auto gd = build_gd(mesh_of(MeshFamily::cartesian, 1));
  const auto forms = assemble_forms(gd);
  LviProblem p = uniform_problem(gd, 1.0, 0.0, 0.0);
  p.alpha = 0.0;
  EXPECT_THROW(solve_lvi(gd, forms, p, ActiveSetPartition::all_pde(4)), UsageError);
  p = uniform_problem(gd, 1.0, 0.0, 0.0);
  p.cell_rhs[0] = NAN;
  EXPECT_THROW(solve_lvi(gd, forms, p, ActiveSetPartition::all_pde(4)), UsageError);
  p = uniform_problem(gd, 1.0, 0.0, 0.0);
  EXPECT_THROW(solve_lvi(gd, forms, p, ActiveSetPartition::all_pde(3)), UsageError);
  p.boundary_values.resize(2);
  EXPECT_THROW(solve_lvi(gd, forms, p, ActiveSetPartition::all_pde(4)), UsageError);
}
