#pragma once

#include <array>
#include <cstddef>
#include <string>

#include "pvi/error.hpp"
#include "pvi/mesh.hpp"

namespace pvi {

/// Cell quadrature used for L2-type integrals of continuous functions.
///  - centroid: one point per cell (cell centroid) or per subcell (triangle centroid);
///  - fan3: the cell is split into the triangles (x_K, a_i, a_{i+1}) -- which are the
///    subcells D_{K,sigma} -- each integrated with the 3-point degree-2 rule.
enum class Quadrature { centroid, fan3 };

inline std::string to_string(Quadrature q) { return q == Quadrature::centroid ? "centroid" : "fan3"; }

inline Quadrature parse_quadrature(const std::string& s) {
  if (s == "centroid") return Quadrature::centroid;
  if (s == "fan3") return Quadrature::fan3;
  throw UsageError("unknown quadrature '" + s + "' (expected centroid or fan3)");
}

struct Triangle {
  std::array<Vec2, 3> p;
  double area() const { return 0.5 * geometry::cross(p[1] - p[0], p[2] - p[0]); }
  Vec2 centroid() const { return (p[0] + p[1] + p[2]) / 3.0; }
};

/// The subcell D_{K,sigma} for local edge i: convex hull of x_K and the edge.
inline Triangle subcell(const PolytopalMesh& mesh, std::size_t k, std::size_t i) {
  const Cell& c = mesh.cell(k);
  const std::size_t m = c.vertices.size();
  return Triangle{{c.center, mesh.vertices()[c.vertices[i]], mesh.vertices()[c.vertices[(i + 1) % m]]}};
}

/// Integrate f over a triangle with `rule`; f may return a scalar or an Eigen vector.
template <class F>
auto integrate_triangle(const Triangle& t, F&& f, Quadrature rule) {
  const double a = t.area();
  if (!(a > 0.0)) throw MeshError("degenerate quadrature triangle");
  if (rule == Quadrature::centroid) {
    using R = decltype(f(t.centroid()));
    return R(a * f(t.centroid()));
  }
  const Vec2 q0 = (4.0 * t.p[0] + t.p[1] + t.p[2]) / 6.0;
  const Vec2 q1 = (t.p[0] + 4.0 * t.p[1] + t.p[2]) / 6.0;
  const Vec2 q2 = (t.p[0] + t.p[1] + 4.0 * t.p[2]) / 6.0;
  using R = decltype(f(q0));
  return R((a / 3.0) * (f(q0) + f(q1) + f(q2)));
}

/// Integrate a scalar f over cell k.
template <class F>
double integrate_cell(const PolytopalMesh& mesh, std::size_t k, F&& f, Quadrature rule) {
  const Cell& c = mesh.cell(k);
  if (rule == Quadrature::centroid) return c.area * f(c.centroid);
  double s = 0.0;
  for (std::size_t i = 0; i < c.num_edges(); ++i) s += integrate_triangle(subcell(mesh, k, i), f, rule);
  return s;
}

}  // namespace pvi
