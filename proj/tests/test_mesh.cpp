#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "pvi/mesh.hpp"
#include "pvi/mesh_generators.hpp"

using namespace pvi;

namespace {

const BoundingBox kSquare{-1.0, 1.0, -1.0, 1.0};
const MeshFamily kFamilies[] = {MeshFamily::cartesian, MeshFamily::triangular, MeshFamily::hexagonal, MeshFamily::kershaw};

PolytopalMesh unit_square(std::optional<std::vector<Vec2>> points = std::nullopt) {
  return PolytopalMesh::from_polygons({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {{0, 1, 2, 3}}, std::move(points));
}

// Invariants of the mesh data type, checked directly from the stored geometry.
void expect_invariants(const PolytopalMesh& m, double domain_area) {
  double area = 0.0;
  for (std::size_t k = 0; k < m.num_cells(); ++k) {
    const Cell& c = m.cell(k);
    EXPECT_GT(c.area, 0.0);
    area += c.area;
    Vec2 closure = Vec2::Zero();
    double perimeter = 0.0;
    for (std::size_t i = 0; i < c.num_edges(); ++i) {
      const Edge& e = m.edge(c.edges[i]);
      EXPECT_GT(e.length, 0.0);
      EXPECT_NEAR(c.normals[i].norm(), 1.0, 1e-14);
      EXPECT_GT(c.distances[i], 0.0) << "cell " << k;
      // d_{K,sigma} is the distance from x_K to the edge line.
      EXPECT_NEAR(c.distances[i], c.normals[i].dot(e.midpoint - c.center), 1e-12);
      closure += e.length * c.normals[i];
      perimeter += e.length;
    }
    EXPECT_LE(closure.norm(), 1e-12 * perimeter);
  }
  EXPECT_NEAR(area, domain_area, 1e-12 * domain_area);
  for (const Edge& e : m.edges()) {
    ASSERT_TRUE(e.num_sides == 1 || e.num_sides == 2);
    const Vec2 mid = 0.5 * (m.vertices()[e.vertices[0]] + m.vertices()[e.vertices[1]]);
    EXPECT_LT((e.midpoint - mid).norm(), 1e-15);
    if (e.num_sides == 2) {
      EXPECT_LT((e.sides[0].normal + e.sides[1].normal).norm(), 1e-14);
    }
  }
}

}  // namespace

TEST(Mesh, CartesianLevelOneHasFourUnitCells) {
  const auto m = generate_mesh(MeshFamily::cartesian, 1, kSquare);
  EXPECT_EQ(m.num_cells(), 4u);
  EXPECT_EQ(m.num_edges(), 12u);
  EXPECT_EQ(m.num_boundary_edges(), 8u);
  for (const Cell& c : m.cells()) {
    EXPECT_DOUBLE_EQ(c.area, 1.0);
    Vec2 s = Vec2::Zero();
    for (std::size_t i = 0; i < c.num_edges(); ++i) s += m.edge(c.edges[i]).length * c.normals[i];
    EXPECT_LT(s.norm(), 1e-15);
  }
}

TEST(Mesh, KershawLevelTwoIsValid) {
  const auto m = generate_mesh(MeshFamily::kershaw, 2, kSquare);
  expect_invariants(m, 4.0);
  EXPECT_TRUE(m.metadata().count("kershaw_amplitude"));
  // The interior vertices really are displaced.
  double shift = 0.0;
  for (const Vec2& v : m.vertices()) shift = std::max(shift, std::abs(v.y() * 4.0 - std::round(v.y() * 4.0)));
  EXPECT_GT(shift, 0.1);
}

TEST(Mesh, AllFamiliesSatisfyInvariantsAndEuler) {
  for (MeshFamily f : kFamilies)
    for (std::size_t n : {1u, 2u, 3u, 5u}) {
      SCOPED_TRACE(to_string(f) + " n=" + std::to_string(n));
      const auto m = generate_mesh(f, n, kSquare);
      expect_invariants(m, 4.0);
      EXPECT_EQ(static_cast<long>(m.num_vertices()) - static_cast<long>(m.num_edges()) + static_cast<long>(m.num_cells()), 1);
      for (const Cell& c : m.cells()) EXPECT_LT((c.center - c.centroid).norm(), 1e-14);
      EXPECT_EQ(m.domain_bbox().xmin, -1.0);
      EXPECT_EQ(m.domain_bbox().ymax, 1.0);
    }
}

TEST(Mesh, MeshSizeDecreasesWithRefinement) {
  EXPECT_DOUBLE_EQ(mesh_size(unit_square()), std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(mesh_size(generate_mesh(MeshFamily::cartesian, 1, kSquare)), std::sqrt(2.0));
  for (MeshFamily f : kFamilies) {
    double prev = INFINITY;
    for (std::size_t n = 1; n <= 6; ++n) {
      const double h = mesh_size(generate_mesh(f, n, kSquare));
      EXPECT_LT(h, prev) << to_string(f) << " n=" << n;
      prev = h;
    }
  }
}

TEST(Mesh, HexagonalFamilyKeepsClippedBoundaryPolygons) {
  const auto m = generate_mesh(MeshFamily::hexagonal, 3, kSquare);
  std::set<std::size_t> sizes;
  for (const Cell& c : m.cells()) sizes.insert(c.num_edges());
  EXPECT_TRUE(sizes.count(6));
  EXPECT_TRUE(sizes.count(4) || sizes.count(5));
  // Interior hexagons are regular: all six edges of equal length.
  for (const Cell& c : m.cells()) {
    if (c.num_edges() != 6) continue;
    for (std::size_t i = 1; i < 6; ++i) EXPECT_NEAR(m.edge(c.edges[i]).length, m.edge(c.edges[0]).length, 0.05 * m.edge(c.edges[0]).length);
  }
}

TEST(Mesh, GeneratorHonoursBoundingBox) {
  const BoundingBox b{2.0, 5.0, -1.0, 0.5};
  for (MeshFamily f : kFamilies) {
    const auto m = generate_mesh(f, 2, b);
    expect_invariants(m, b.area());
    EXPECT_DOUBLE_EQ(m.domain_bbox().xmin, 2.0);
    EXPECT_DOUBLE_EQ(m.domain_bbox().xmax, 5.0);
  }
}

TEST(Mesh, GeneratorRejectsBadInput) {
  EXPECT_THROW(generate_mesh(MeshFamily::cartesian, 0, kSquare), UsageError);
  EXPECT_THROW(generate_mesh(MeshFamily::cartesian, 1, BoundingBox{0, 0, 0, 1}), UsageError);
  EXPECT_THROW(parse_mesh_family("voronoi"), UsageError);
  MeshGenOptions small;
  small.max_cells = 100;
  EXPECT_THROW(generate_mesh(MeshFamily::triangular, 10, kSquare, small), UsageError);
  EXPECT_NO_THROW(generate_mesh(MeshFamily::triangular, 3, kSquare, small));
  for (MeshFamily f : kFamilies) EXPECT_EQ(parse_mesh_family(to_string(f)), f);
}

TEST(Mesh, UnitSquareWithExplicitCellPoint) {
  const auto m = unit_square(std::vector<Vec2>{{0.5, 0.5}});
  ASSERT_EQ(m.num_cells(), 1u);
  EXPECT_EQ(m.num_edges(), 4u);
  for (double d : m.cell(0).distances) EXPECT_DOUBLE_EQ(d, 0.5);
}

TEST(Mesh, ClockwiseCellIsReoriented) {
  const auto m = PolytopalMesh::from_polygons({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {{0, 3, 2, 1}});
  EXPECT_DOUBLE_EQ(m.cell(0).area, 1.0);
  EXPECT_GT(m.cell(0).distances[0], 0.0);
}

TEST(Mesh, CellPointOutsideIsRejectedWithCellId) {
  try {
    PolytopalMesh::from_polygons({{0, 0}, {1, 0}, {2, 0}, {2, 1}, {1, 1}, {0, 1}}, {{0, 1, 4, 5}, {1, 2, 3, 4}}, std::vector<Vec2>{{0.5, 0.5}, {3.0, 0.5}});
    FAIL() << "expected MeshError";
  } catch (const MeshError& e) {
    EXPECT_EQ(e.entity(), "cell");
    EXPECT_EQ(e.id(), 1u);
  }
}

TEST(Mesh, NonStarShapedCellPointIsRejected) {
  // L-shaped cell with a point that sees one edge from behind.
  const std::vector<Vec2> v{{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}};
  EXPECT_NO_THROW(PolytopalMesh::from_polygons(v, {{0, 1, 2, 3, 4, 5}}, std::vector<Vec2>{{0.5, 0.5}}));
  EXPECT_THROW(PolytopalMesh::from_polygons(v, {{0, 1, 2, 3, 4, 5}}, std::vector<Vec2>{{1.5, 0.5}}), MeshError);
}

TEST(Mesh, TopologyErrors) {
  const std::vector<Vec2> v{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  EXPECT_THROW(PolytopalMesh::from_polygons(v, {}), MeshError);
  EXPECT_THROW(PolytopalMesh::from_polygons(v, {{0, 1}}), MeshError);
  EXPECT_THROW(PolytopalMesh::from_polygons(v, {{0, 1, 7}}), MeshError);
  // Two copies of the same triangle overlap.
  EXPECT_THROW(PolytopalMesh::from_polygons(v, {{0, 1, 2}, {0, 1, 2}}), MeshError);
  // Degenerate (collinear) triangle.
  EXPECT_THROW(PolytopalMesh::from_polygons({{0, 0}, {1, 0}, {2, 0}}, {{0, 1, 2}}), MeshError);
  // Self-intersecting quadrilateral.
  EXPECT_THROW(PolytopalMesh::from_polygons(v, {{0, 2, 1, 3}}), MeshError);
  // Non-finite coordinates.
  EXPECT_THROW(PolytopalMesh::from_polygons({{0, 0}, {1, 0}, {NAN, 1}}, {{0, 1, 2}}), MeshError);
}

TEST(Mesh, DomainWithHoleIsAccepted) {
  // Eight squares around a missing centre square.
  std::vector<Vec2> v;
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 4; ++i) v.emplace_back(i, j);
  auto id = [](int i, int j) { return static_cast<std::size_t>(4 * j + i); };
  std::vector<std::vector<std::size_t>> cells;
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i)
      if (!(i == 1 && j == 1)) cells.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)});
  // Green's formula over all boundary edges (inner ring included) equals the cell area sum,
  // so a domain with a hole is still consistent.
  EXPECT_NO_THROW(PolytopalMesh::from_polygons(v, cells));
}
