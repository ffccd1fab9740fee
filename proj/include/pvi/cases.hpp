#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "pvi/diagnostics.hpp"
#include "pvi/error.hpp"
#include "pvi/mesh_generators.hpp"
#include "pvi/timeloop.hpp"

namespace pvi {

/// delta t = coefficient * h^power; power 0 gives the fixed step `coefficient`.
struct TimeStepRule {
  double coefficient = 1.0;
  double power = 2.0;

  double step(double h) const {
    if (!(coefficient > 0.0) || !(power >= 0.0)) throw UsageError("time-step rule needs coefficient > 0 and power >= 0");
    return coefficient * std::pow(h, power);
  }
};

struct AnalyticCase {
  std::string name;
  std::string description;
  ProblemSpec spec;
  BoundingBox domain{-1.0, 1.0, -1.0, 1.0};
  std::optional<SpaceTimeField> exact;
  std::optional<SpaceTimeGradient> exact_gradient;
  TimeStepRule time_step;
  std::vector<MeshFamily> families;

  bool has_exact() const { return exact.has_value() && exact_gradient.has_value(); }
};

enum class SourceVariant { printed_f, derived_f };

namespace test1 {

// Moving-contact manufactured solution: contact disc of radius s(t) centred at q(t).
inline double s(double t) { return 1.0 / 3.0 + 0.3 * std::sin(16.0 * std::numbers::pi * t); }
inline double ds(double t) { return 0.3 * 16.0 * std::numbers::pi * std::cos(16.0 * std::numbers::pi * t); }
inline Vec2 q(double t) {
  return Vec2(std::cos(4.0 * std::numbers::pi * t), std::sin(4.0 * std::numbers::pi * t)) / 3.0;
}
inline Vec2 dq(double t) {
  const double w = 4.0 * std::numbers::pi / 3.0;
  return w * Vec2(-std::sin(4.0 * std::numbers::pi * t), std::cos(4.0 * std::numbers::pi * t));
}
inline double r2(const Vec2& x, double t) { return (x - q(t)).squaredNorm(); }
inline bool noncontact(const Vec2& x, double t) { return r2(x, t) > s(t) * s(t); }

inline double exact(const Vec2& x, double t) {
  if (!noncontact(x, t)) return 0.0;
  const double w = r2(x, t) - s(t) * s(t);
  return 0.5 * w * w;
}

inline Vec2 exact_gradient(const Vec2& x, double t) {
  if (!noncontact(x, t)) return Vec2::Zero();
  return 2.0 * (r2(x, t) - s(t) * s(t)) * (x - q(t));
}

// f on the contact set, shared by both variants.
inline double contact_source(const Vec2& x, double t) {
  const double ss = s(t) * s(t);
  return -4.0 * ss * (1.0 - r2(x, t) + ss);
}

/// The source as displayed with the test: 4(s^2 - 2r^2 - (r^2 - s^2)(p + s s') / 2) on the non-contact set.
inline double printed_source(const Vec2& x, double t) {
  if (!noncontact(x, t)) return contact_source(x, t);
  const double p = (x - q(t)).dot(dq(t));
  const double rr = r2(x, t), ss = s(t) * s(t);
  return 4.0 * (ss - 2.0 * rr - 0.5 * (rr - ss) * (p + s(t) * ds(t)));
}

/// d_t u - Laplace u assembled from the chain rule for u = w^2 / 2, w = |x - q|^2 - s^2:
/// d_t u = w d_t w and Laplace u = |grad w|^2 + w Laplace w with Laplace w = 4.
inline double derived_source(const Vec2& x, double t) {
  if (!noncontact(x, t)) return contact_source(x, t);
  const Vec2 d = x - q(t);
  const double w = d.squaredNorm() - s(t) * s(t);
  const double dt_w = -2.0 * d.dot(dq(t)) - 2.0 * s(t) * ds(t);
  const Vec2 grad_w = 2.0 * d;
  return w * dt_w - (grad_w.squaredNorm() + 4.0 * w);
}

}  // namespace test1

/// Moving circular contact region, psi = 0, nonzero Dirichlet data taken from the exact solution.
inline AnalyticCase test1_case(SourceVariant variant = SourceVariant::derived_f) {
  AnalyticCase c;
  c.name = variant == SourceVariant::derived_f ? "test1" : "test1-printed";
  c.description = "moving contact disc with exact solution (source " +
                  std::string(variant == SourceVariant::derived_f ? "derived from the exact solution" : "as printed") + ")";
  c.spec.final_time = 0.25;
  c.spec.obstacle = [](const Vec2&) { return 0.0; };
  c.spec.initial = [](const Vec2& x) { return test1::exact(x, 0.0); };
  c.spec.dirichlet = test1::exact;
  c.spec.source = variant == SourceVariant::derived_f ? SpaceTimeField(test1::derived_source) : SpaceTimeField(test1::printed_source);
  c.exact = SpaceTimeField(test1::exact);
  c.exact_gradient = SpaceTimeGradient(test1::exact_gradient);
  c.time_step = {1.0, 2.0};
  c.families = {MeshFamily::triangular, MeshFamily::hexagonal};
  return c;
}

namespace test2 {
inline double obstacle(const Vec2& x) {
  const double r = x.norm();
  return std::max({0.0, -0.1 + 0.6 * std::exp(-10.0 * r * r), 0.5 - r});
}
}  // namespace test2

/// Bump obstacle with constant downward forcing; no exact solution. Starts from u_ini = psi.
inline AnalyticCase test2_case() {
  AnalyticCase c;
  c.name = "test2";
  c.description = "bump obstacle, f = -4, u_ini = psi";
  c.spec.final_time = 0.1;
  c.spec.obstacle = test2::obstacle;
  c.spec.initial = test2::obstacle;
  c.spec.source = [](const Vec2&, double) { return -4.0; };
  c.spec.dirichlet = [](const Vec2&, double) { return 0.0; };
  c.time_step = {0.01, 0.0};
  c.families = {MeshFamily::hexagonal, MeshFamily::triangular, MeshFamily::cartesian};
  return c;
}

/// Unconstrained baseline: u = sin(pi x) sin(pi y) e^{-t}, psi far below.
inline AnalyticCase smooth_baseline_case() {
  constexpr double pi = std::numbers::pi;
  AnalyticCase c;
  c.name = "smooth";
  c.description = "unconstrained manufactured solution sin(pi x) sin(pi y) exp(-t)";
  c.spec.final_time = 0.1;
  const SpaceTimeField u = [](const Vec2& x, double t) { return std::sin(pi * x.x()) * std::sin(pi * x.y()) * std::exp(-t); };
  c.spec.obstacle = [](const Vec2&) { return -1e9; };
  c.spec.initial = [u](const Vec2& x) { return u(x, 0.0); };
  c.spec.source = [u](const Vec2& x, double t) { return (2.0 * pi * pi - 1.0) * u(x, t); };
  c.spec.dirichlet = [](const Vec2&, double) { return 0.0; };
  c.exact = u;
  c.exact_gradient = SpaceTimeGradient([](const Vec2& x, double t) -> Vec2 {
    return Vec2(pi * std::cos(pi * x.x()) * std::sin(pi * x.y()), pi * std::sin(pi * x.x()) * std::cos(pi * x.y())) * std::exp(-t);
  });
  c.time_step = {1.0, 2.0};
  c.families = {MeshFamily::cartesian, MeshFamily::triangular};
  return c;
}

inline std::vector<std::string> builtin_case_names() { return {"test1", "test1-printed", "test2", "smooth"}; }

inline AnalyticCase find_case(const std::string& name) {
  if (name == "test1") return test1_case(SourceVariant::derived_f);
  if (name == "test1-printed") return test1_case(SourceVariant::printed_f);
  if (name == "test2") return test2_case();
  if (name == "smooth") return smooth_baseline_case();
  throw UsageError("unknown case '" + name + "' (built-in cases: test1, test1-printed, test2, smooth)");
}

struct SourceDiscrepancy {
  double max_abs = 0.0;
  double max_relative = 0.0;  // max_abs / max |derived_f| over the same points
  std::size_t samples = 0;
};

/// Compare the printed and derived sources of the moving-contact case on an nx x nx x nt grid
/// over Omega x [0, T], restricted to the non-contact set.
inline SourceDiscrepancy test1_source_discrepancy(std::size_t nx = 51, std::size_t nt = 11) {
  if (nx < 2 || nt < 2) throw UsageError("discrepancy grid needs at least 2 points per direction");
  SourceDiscrepancy d;
  double scale = 0.0;
  for (std::size_t it = 0; it < nt; ++it) {
    const double t = 0.25 * static_cast<double>(it) / static_cast<double>(nt - 1);
    for (std::size_t i = 0; i < nx; ++i)
      for (std::size_t j = 0; j < nx; ++j) {
        const Vec2 x(-1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(nx - 1),
                     -1.0 + 2.0 * static_cast<double>(j) / static_cast<double>(nx - 1));
        if (!test1::noncontact(x, t)) continue;
        const double a = test1::printed_source(x, t), b = test1::derived_source(x, t);
        d.max_abs = std::max(d.max_abs, std::abs(a - b));
        scale = std::max(scale, std::abs(b));
        ++d.samples;
      }
  }
  d.max_relative = scale > 0.0 ? d.max_abs / scale : 0.0;
  return d;
}

/// min over an nx x nx x nt sample grid of u - psi; negative means the exact solution violates the obstacle.
inline double exact_obstacle_margin(const AnalyticCase& c, std::size_t nx = 101, std::size_t nt = 11) {
  if (!c.exact) throw UsageError("case '" + c.name + "' has no exact solution");
  double worst = std::numeric_limits<double>::infinity();
  const BoundingBox& b = c.domain;
  for (std::size_t it = 0; it < nt; ++it) {
    const double t = c.spec.final_time * static_cast<double>(it) / static_cast<double>(std::max<std::size_t>(1, nt - 1));
    for (std::size_t i = 0; i < nx; ++i)
      for (std::size_t j = 0; j < nx; ++j) {
        const Vec2 x(b.xmin + b.width() * static_cast<double>(i) / static_cast<double>(nx - 1),
                     b.ymin + b.height() * static_cast<double>(j) / static_cast<double>(nx - 1));
        worst = std::min(worst, (*c.exact)(x, t) - c.spec.obstacle(x));
      }
  }
  return worst;
}

}  // namespace pvi
