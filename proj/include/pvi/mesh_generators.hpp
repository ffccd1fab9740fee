#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "pvi/error.hpp"
#include "pvi/mesh.hpp"

namespace pvi {

enum class MeshFamily { cartesian, triangular, hexagonal, kershaw };

inline std::string to_string(MeshFamily f) {
  switch (f) {
    case MeshFamily::cartesian: return "cartesian";
    case MeshFamily::triangular: return "triangular";
    case MeshFamily::hexagonal: return "hexagonal";
    case MeshFamily::kershaw: return "kershaw";
  }
  return "unknown";
}

inline MeshFamily parse_mesh_family(const std::string& name) {
  if (name == "cartesian") return MeshFamily::cartesian;
  if (name == "triangular") return MeshFamily::triangular;
  if (name == "hexagonal") return MeshFamily::hexagonal;
  if (name == "kershaw") return MeshFamily::kershaw;
  throw UsageError("unsupported mesh family '" + name + "' (expected cartesian, triangular, hexagonal or kershaw)");
}

struct MeshGenOptions {
  /// Refuse to build meshes with more cells than this.
  std::size_t max_cells = 4'000'000;
  /// Vertical shear amplitude of the Kershaw family as a fraction of its cap 1/pi.
  double kershaw_distortion = 0.8;
};

namespace detail {

// Lattice vertex storage keyed by exact integer coordinates.
class LatticeVertices {
 public:
  std::size_t id(long long i, long long j, const Vec2& p) {
    auto [it, inserted] = index_.try_emplace({i, j}, points_.size());
    if (inserted) points_.push_back(p);
    return it->second;
  }
  std::vector<Vec2> take() { return std::move(points_); }

 private:
  std::map<std::pair<long long, long long>, std::size_t> index_;
  std::vector<Vec2> points_;
};

inline void check_budget(std::size_t cells, const MeshGenOptions& opt) {
  if (cells > opt.max_cells)
    throw UsageError("requested mesh would have " + std::to_string(cells) + " cells, above the budget of " +
                     std::to_string(opt.max_cells));
}

// Structured (2n)x(2n) grid; `map` sends lattice (i, j) to physical coordinates.
template <class Map>
PolytopalMesh structured_quads(std::size_t cells_per_side, Map&& map, PolytopalMesh::Metadata meta) {
  const std::size_t s = cells_per_side;
  LatticeVertices lv;
  std::vector<std::vector<std::size_t>> cells;
  cells.reserve(s * s);
  for (std::size_t j = 0; j < s; ++j)
    for (std::size_t i = 0; i < s; ++i) {
      auto v = [&](std::size_t a, std::size_t b) {
        return lv.id(static_cast<long long>(a), static_cast<long long>(b), map(a, b));
      };
      cells.push_back({v(i, j), v(i + 1, j), v(i + 1, j + 1), v(i, j + 1)});
    }
  return PolytopalMesh::from_polygons(lv.take(), std::move(cells), std::nullopt, std::move(meta));
}

// Sutherland-Hodgman clip of a polygon against the half-plane coord(axis) >= bound
// (sign = +1) or <= bound (sign = -1).
inline std::vector<Vec2> clip(const std::vector<Vec2>& poly, int axis, double bound, double sign) {
  std::vector<Vec2> out;
  const std::size_t m = poly.size();
  auto inside = [&](const Vec2& p) { return sign * (p[axis] - bound) >= 0.0; };
  for (std::size_t i = 0; i < m; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % m];
    const bool ia = inside(a), ib = inside(b);
    if (ia) out.push_back(a);
    if (ia != ib) {
      const double t = (bound - a[axis]) / (b[axis] - a[axis]);
      Vec2 p = a + t * (b - a);
      p[axis] = bound;
      out.push_back(p);
    }
  }
  std::vector<Vec2> dedup;
  for (const Vec2& p : out)
    if (dedup.empty() || (p - dedup.back()).norm() > 0.0) dedup.push_back(p);
  while (dedup.size() > 1 && (dedup.front() - dedup.back()).norm() == 0.0) dedup.pop_back();
  return dedup;
}

}  // namespace detail

/// Generate a mesh of `bbox` from one of the built-in families.
///
/// Refinement index n >= 1 controls the resolution: cartesian, triangular and
/// kershaw meshes use a (2n)x(2n) grid of squares (triangular splits each square
/// along its "/" diagonal); hexagonal uses 2n+1 columns of flat-top hexagons
/// clipped to the box. Cell points are centroids.
inline PolytopalMesh generate_mesh(MeshFamily family, std::size_t n, const BoundingBox& bbox,
                                   const MeshGenOptions& opt = {}) {
  if (n < 1) throw UsageError("refinement index must be >= 1");
  if (bbox.degenerate()) throw UsageError("bounding box is degenerate");
  const std::size_t s = 2 * n;
  const double dx = bbox.width() / static_cast<double>(s);
  const double dy = bbox.height() / static_cast<double>(s);
  auto grid = [&](std::size_t i, std::size_t j) {
    // Exact endpoints avoid round-off on the box boundary.
    const double x = i == s ? bbox.xmax : bbox.xmin + static_cast<double>(i) * dx;
    const double y = j == s ? bbox.ymax : bbox.ymin + static_cast<double>(j) * dy;
    return Vec2(x, y);
  };
  PolytopalMesh::Metadata meta{{"family", to_string(family)}, {"refinement", std::to_string(n)}};

  switch (family) {
    case MeshFamily::cartesian: {
      detail::check_budget(s * s, opt);
      return detail::structured_quads(s, grid, std::move(meta));
    }
    case MeshFamily::triangular: {
      detail::check_budget(2 * s * s, opt);
      detail::LatticeVertices lv;
      std::vector<std::vector<std::size_t>> cells;
      cells.reserve(2 * s * s);
      for (std::size_t j = 0; j < s; ++j)
        for (std::size_t i = 0; i < s; ++i) {
          auto v = [&](std::size_t a, std::size_t b) {
            return lv.id(static_cast<long long>(a), static_cast<long long>(b), grid(a, b));
          };
          cells.push_back({v(i, j), v(i + 1, j), v(i + 1, j + 1)});
          cells.push_back({v(i, j), v(i + 1, j + 1), v(i, j + 1)});
        }
      return PolytopalMesh::from_polygons(lv.take(), std::move(cells), std::nullopt, std::move(meta));
    }
    case MeshFamily::kershaw: {
      detail::check_budget(s * s, opt);
      if (!(opt.kershaw_distortion > 0.0 && opt.kershaw_distortion < 1.0))
        throw UsageError("kershaw distortion must lie in (0, 1)");
      // eta -> eta + a sin(pi eta) sin(2 pi xi) is monotone in eta iff a < 1/pi, so
      // every column of cells stays a stack of convex trapezoids with vertical sides.
      const double a = opt.kershaw_distortion / std::numbers::pi;
      meta["kershaw_amplitude"] = std::to_string(a);
      meta["kershaw_min_jacobian"] = std::to_string(1.0 - a * std::numbers::pi);
      auto sheared = [&](std::size_t i, std::size_t j) {
        const double xi = static_cast<double>(i) / static_cast<double>(s);
        const double eta = static_cast<double>(j) / static_cast<double>(s);
        Vec2 p = grid(i, j);
        if (j != 0 && j != s)
          p.y() = bbox.ymin + bbox.height() * (eta + a * std::sin(std::numbers::pi * eta) *
                                                        std::sin(2.0 * std::numbers::pi * xi));
        return p;
      };
      return detail::structured_quads(s, sheared, std::move(meta));
    }
    case MeshFamily::hexagonal: {
      // Lattice units: x in half-radius steps, y in half-height steps.
      // Column c has its centre at X = 3c; even columns have centres at Y = 2r, odd at 2r+1.
      const std::size_t cols = 2 * n;  // centres at columns 0..cols
      const std::size_t rows = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::lround(1.5 * static_cast<double>(cols) / std::sqrt(3.0))));
      detail::check_budget((cols + 1) * (rows + 1), opt);
      const double ux = bbox.width() / (3.0 * static_cast<double>(cols));
      const double uy = bbox.height() / (2.0 * static_cast<double>(rows));
      const double xmax_l = 3.0 * static_cast<double>(cols);
      const double ymax_l = 2.0 * static_cast<double>(rows);
      detail::LatticeVertices lv;
      std::vector<std::vector<std::size_t>> cells;
      for (std::size_t c = 0; c <= cols; ++c) {
        const bool odd = c % 2 == 1;
        const std::size_t nr = odd ? rows : rows + 1;
        for (std::size_t r = 0; r < nr; ++r) {
          const double cx = 3.0 * static_cast<double>(c);
          const double cy = 2.0 * static_cast<double>(r) + (odd ? 1.0 : 0.0);
          std::vector<Vec2> hex{{cx + 2, cy}, {cx + 1, cy + 1}, {cx - 1, cy + 1},
                                {cx - 2, cy}, {cx - 1, cy - 1}, {cx + 1, cy - 1}};
          hex = detail::clip(hex, 0, 0.0, 1.0);
          hex = detail::clip(hex, 0, xmax_l, -1.0);
          hex = detail::clip(hex, 1, 0.0, 1.0);
          hex = detail::clip(hex, 1, ymax_l, -1.0);
          if (hex.size() < 3 || geometry::signed_area(hex) <= 0.0) continue;
          std::vector<std::size_t> loop;
          for (const Vec2& p : hex) {
            const long long li = std::llround(p.x()), lj = std::llround(p.y());
            const double x = li == static_cast<long long>(xmax_l) ? bbox.xmax : bbox.xmin + static_cast<double>(li) * ux;
            const double y = lj == static_cast<long long>(ymax_l) ? bbox.ymax : bbox.ymin + static_cast<double>(lj) * uy;
            loop.push_back(lv.id(li, lj, Vec2(x, y)));
          }
          cells.push_back(std::move(loop));
        }
      }
      return PolytopalMesh::from_polygons(lv.take(), std::move(cells), std::nullopt, std::move(meta));
    }
  }
  throw UsageError("unsupported mesh family");
}

}  // namespace pvi
