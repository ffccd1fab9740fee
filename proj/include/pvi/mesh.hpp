#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pvi/error.hpp"

namespace pvi {

using Vec2 = Eigen::Vector2d;

struct BoundingBox {
  double xmin = 0.0;
  double xmax = 1.0;
  double ymin = 0.0;
  double ymax = 1.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double area() const { return width() * height(); }
  bool degenerate() const {
    return !(std::isfinite(xmin) && std::isfinite(xmax) && std::isfinite(ymin) &&
             std::isfinite(ymax) && width() > 0.0 && height() > 0.0);
  }
};

/// A polygonal cell K. Local edge i joins vertices[i] and vertices[i+1].
struct Cell {
  std::vector<std::size_t> vertices;  // counterclockwise
  std::vector<std::size_t> edges;
  std::vector<Vec2> normals;       // outward unit normals n_{K,sigma}
  std::vector<double> distances;   // d_{K,sigma}, orthogonal distance from center to edge line
  Vec2 center = Vec2::Zero();      // cell point x_K
  Vec2 centroid = Vec2::Zero();
  double area = 0.0;
  double diameter = 0.0;

  std::size_t num_edges() const { return edges.size(); }
};

/// One of the (at most two) cells sharing an edge.
struct EdgeSide {
  std::size_t cell = 0;
  std::size_t local = 0;  // position of the edge in cell.edges
  Vec2 normal = Vec2::Zero();
  double distance = 0.0;
};

struct Edge {
  std::array<std::size_t, 2> vertices{};
  Vec2 midpoint = Vec2::Zero();
  double length = 0.0;
  std::array<EdgeSide, 2> sides{};
  std::size_t num_sides = 0;

  bool boundary() const { return num_sides == 1; }
};

namespace geometry {

inline double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

inline double signed_area(const std::vector<Vec2>& poly) {
  double s = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) s += cross(poly[i], poly[(i + 1) % poly.size()]);
  return 0.5 * s;
}

/// Area centroid of a simple polygon with nonzero area.
inline Vec2 centroid(const std::vector<Vec2>& poly) {
  // Shift to the first vertex to limit cancellation on small cells far from the origin.
  const Vec2 o = poly.front();
  double a = 0.0;
  Vec2 c = Vec2::Zero();
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Vec2 p = poly[i] - o;
    const Vec2 q = poly[(i + 1) % poly.size()] - o;
    const double w = cross(p, q);
    a += w;
    c += w * (p + q);
  }
  return o + c / (3.0 * a);
}

inline double diameter(const std::vector<Vec2>& poly) {
  double d = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i)
    for (std::size_t j = i + 1; j < poly.size(); ++j) d = std::max(d, (poly[i] - poly[j]).norm());
  return d;
}

inline int orientation(const Vec2& a, const Vec2& b, const Vec2& c, double eps) {
  const double v = cross(b - a, c - a);
  return v > eps ? 1 : (v < -eps ? -1 : 0);
}

inline bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p, double eps) {
  return std::min(a.x(), b.x()) - eps <= p.x() && p.x() <= std::max(a.x(), b.x()) + eps &&
         std::min(a.y(), b.y()) - eps <= p.y() && p.y() <= std::max(a.y(), b.y()) + eps;
}

inline bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d, double eps) {
  const int o1 = orientation(a, b, c, eps), o2 = orientation(a, b, d, eps);
  const int o3 = orientation(c, d, a, eps), o4 = orientation(c, d, b, eps);
  if (o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0) return true;
  if (o1 == 0 && on_segment(a, b, c, eps)) return true;
  if (o2 == 0 && on_segment(a, b, d, eps)) return true;
  if (o3 == 0 && on_segment(c, d, a, eps)) return true;
  if (o4 == 0 && on_segment(c, d, b, eps)) return true;
  return false;
}

/// True if no two non-adjacent edges of the closed polygon touch.
inline bool is_simple(const std::vector<Vec2>& poly, double eps) {
  const std::size_t m = poly.size();
  if (m < 3) return false;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      if (j == i + 1 || (i == 0 && j == m - 1)) continue;
      if (segments_intersect(poly[i], poly[(i + 1) % m], poly[j], poly[(j + 1) % m], eps)) return false;
    }
  }
  return true;
}

inline bool strictly_inside(const std::vector<Vec2>& poly, const Vec2& p) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y()) &&
        p.x() < (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x())
      inside = !inside;
  }
  return inside;
}

}  // namespace geometry

/// Immutable 2D polytopal mesh (cells, edges, cell points) with derived geometry.
///
/// Built only through `from_polygons`, which normalises orientation, recomputes all
/// geometry from the vertex coordinates and runs the full validation pass.
class PolytopalMesh {
 public:
  using Metadata = std::map<std::string, std::string>;

  /// Build a mesh from vertex coordinates and per-cell vertex loops (either
  /// orientation). Cell points default to centroids. Throws MeshError.
  static PolytopalMesh from_polygons(std::vector<Vec2> vertices,
                                     std::vector<std::vector<std::size_t>> cells,
                                     std::optional<std::vector<Vec2>> cell_points = std::nullopt,
                                     Metadata metadata = {}) {
    PolytopalMesh m;
    m.vertices_ = std::move(vertices);
    m.metadata_ = std::move(metadata);
    if (cells.empty()) throw MeshError("mesh has no cells");
    if (cell_points && cell_points->size() != cells.size())
      throw MeshError("cell point count " + std::to_string(cell_points->size()) +
                      " does not match cell count " + std::to_string(cells.size()));
    for (const Vec2& v : m.vertices_)
      if (!std::isfinite(v.x()) || !std::isfinite(v.y())) throw MeshError("non-finite vertex coordinate");

    m.cells_.resize(cells.size());
    for (std::size_t k = 0; k < cells.size(); ++k) {
      auto& loop = cells[k];
      if (loop.size() < 3) throw MeshError("fewer than 3 vertices", "cell", k);
      for (std::size_t v : loop)
        if (v >= m.vertices_.size()) throw MeshError("vertex index out of range", "cell", k);
      if (geometry::signed_area(m.polygon_of(loop)) < 0.0) std::reverse(loop.begin(), loop.end());
      m.cells_[k].vertices = std::move(loop);
    }
    m.build_edges();
    m.compute_geometry(cell_points);
    m.validate();
    return m;
  }

  const std::vector<Cell>& cells() const { return cells_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<Vec2>& vertices() const { return vertices_; }
  const Cell& cell(std::size_t k) const { return cells_[k]; }
  const Edge& edge(std::size_t e) const { return edges_[e]; }
  std::size_t num_cells() const { return cells_.size(); }
  std::size_t num_edges() const { return edges_.size(); }
  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_boundary_edges() const {
    return static_cast<std::size_t>(std::count_if(edges_.begin(), edges_.end(), [](const Edge& e) { return e.boundary(); }));
  }
  const BoundingBox& domain_bbox() const { return bbox_; }
  const Metadata& metadata() const { return metadata_; }
  double total_area() const { return total_area_; }

  std::vector<Vec2> polygon(std::size_t k) const { return polygon_of(cells_[k].vertices); }

 private:
  PolytopalMesh() = default;

  std::vector<Vec2> polygon_of(const std::vector<std::size_t>& loop) const {
    std::vector<Vec2> p;
    p.reserve(loop.size());
    for (std::size_t v : loop) p.push_back(vertices_[v]);
    return p;
  }

  void build_edges() {
    struct Key {
      std::size_t a, b;
      bool operator==(const Key& o) const { return a == o.a && b == o.b; }
    };
    struct KeyHash {
      std::size_t operator()(const Key& k) const { return k.a * 0x9E3779B97F4A7C15ULL ^ (k.b + 0x7F4A7C15ULL); }
    };
    std::unordered_map<Key, std::size_t, KeyHash> index;
    for (std::size_t k = 0; k < cells_.size(); ++k) {
      Cell& c = cells_[k];
      const std::size_t m = c.vertices.size();
      c.edges.resize(m);
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t v0 = c.vertices[i], v1 = c.vertices[(i + 1) % m];
        if (v0 == v1) throw MeshError("repeated consecutive vertex", "cell", k);
        const Key key{std::min(v0, v1), std::max(v0, v1)};
        auto [it, inserted] = index.try_emplace(key, edges_.size());
        if (inserted) {
          Edge e;
          e.vertices = {v0, v1};
          edges_.push_back(e);
        }
        Edge& e = edges_[it->second];
        if (e.num_sides == 2) throw MeshError("shared by more than two cells", "edge", it->second);
        if (e.num_sides == 1) {
          // A conforming neighbour traverses the edge in the opposite direction.
          if (e.vertices[0] == v0) throw MeshError("overlapping cells traverse the edge in the same direction", "edge", it->second);
          if (e.sides[0].cell == k) throw MeshError("edge used twice by the same cell", "cell", k);
        }
        e.sides[e.num_sides++] = EdgeSide{k, i, Vec2::Zero(), 0.0};
        c.edges[i] = it->second;
      }
    }
  }

  void compute_geometry(const std::optional<std::vector<Vec2>>& cell_points) {
    bbox_ = BoundingBox{vertices_.empty() ? 0.0 : vertices_[0].x(), vertices_.empty() ? 0.0 : vertices_[0].x(),
                        vertices_.empty() ? 0.0 : vertices_[0].y(), vertices_.empty() ? 0.0 : vertices_[0].y()};
    for (const Vec2& v : vertices_) {
      bbox_.xmin = std::min(bbox_.xmin, v.x());
      bbox_.xmax = std::max(bbox_.xmax, v.x());
      bbox_.ymin = std::min(bbox_.ymin, v.y());
      bbox_.ymax = std::max(bbox_.ymax, v.y());
    }
    for (Edge& e : edges_) {
      const Vec2& a = vertices_[e.vertices[0]];
      const Vec2& b = vertices_[e.vertices[1]];
      e.midpoint = 0.5 * (a + b);
      e.length = (b - a).norm();
    }
    total_area_ = 0.0;
    for (std::size_t k = 0; k < cells_.size(); ++k) {
      Cell& c = cells_[k];
      const auto poly = polygon(k);
      c.area = geometry::signed_area(poly);
      c.diameter = geometry::diameter(poly);
      if (!(c.area > 0.0)) throw MeshError("non-positive area", "cell", k);
      c.centroid = geometry::centroid(poly);
      c.center = cell_points ? (*cell_points)[k] : c.centroid;
      total_area_ += c.area;
      const std::size_t m = poly.size();
      c.normals.resize(m);
      c.distances.resize(m);
      for (std::size_t i = 0; i < m; ++i) {
        const Vec2 t = poly[(i + 1) % m] - poly[i];
        const double len = t.norm();
        if (!(len > 0.0)) throw MeshError("zero-length edge", "edge", c.edges[i]);
        c.normals[i] = Vec2(t.y(), -t.x()) / len;
        c.distances[i] = c.normals[i].dot(poly[i] - c.center);
        Edge& e = edges_[c.edges[i]];
        EdgeSide& side = e.sides[0].cell == k ? e.sides[0] : e.sides[1];
        side.normal = c.normals[i];
        side.distance = c.distances[i];
      }
    }
  }

  void validate() const {
    for (std::size_t k = 0; k < cells_.size(); ++k) {
      const Cell& c = cells_[k];
      const auto poly = polygon(k);
      const double eps = 1e-12 * c.diameter;
      if (!geometry::is_simple(poly, eps)) throw MeshError("polygon is not simple", "cell", k);
      if (!geometry::strictly_inside(poly, c.center)) throw MeshError("cell point lies outside the cell", "cell", k);
      Vec2 closure = Vec2::Zero();
      double perimeter = 0.0;
      for (std::size_t i = 0; i < c.num_edges(); ++i) {
        const double len = edges_[c.edges[i]].length;
        if (!(c.distances[i] > eps))
          throw MeshError("cell is not star-shaped with respect to its cell point (d_{K,sigma} <= 0 on local edge " +
                              std::to_string(i) + ")",
                          "cell", k);
        closure += len * c.normals[i];
        perimeter += len;
      }
      if (closure.norm() > 1e-12 * perimeter) throw MeshError("closed-polygon identity violated", "cell", k);
    }
    // Green's theorem over the boundary edges, oriented by their owner, gives the domain area.
    double enclosed = 0.0;
    for (const Edge& e : edges_) {
      if (!e.boundary()) continue;
      const Cell& c = cells_[e.sides[0].cell];
      const std::size_t i = e.sides[0].local;
      const Vec2& a = vertices_[c.vertices[i]];
      const Vec2& b = vertices_[c.vertices[(i + 1) % c.vertices.size()]];
      enclosed += 0.5 * geometry::cross(a, b);
    }
    if (std::abs(enclosed - total_area_) > 1e-12 * std::abs(enclosed))
      throw MeshError("sum of cell areas (" + std::to_string(total_area_) + ") differs from the area enclosed by the boundary (" +
                      std::to_string(enclosed) + ")");
  }

  std::vector<Vec2> vertices_;
  std::vector<Cell> cells_;
  std::vector<Edge> edges_;
  BoundingBox bbox_;
  Metadata metadata_;
  double total_area_ = 0.0;
};

/// h = max cell diameter.
inline double mesh_size(const PolytopalMesh& mesh) {
  double h = 0.0;
  for (const Cell& c : mesh.cells()) h = std::max(h, c.diameter);
  return h;
}

}  // namespace pvi
