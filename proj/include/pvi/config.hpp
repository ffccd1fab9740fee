#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pvi/cases.hpp"
#include "pvi/error.hpp"
#include "pvi/expression.hpp"
#include "pvi/mesh_generators.hpp"
#include "pvi/mesh_io.hpp"
#include "pvi/vi_solver.hpp"

namespace pvi {

/// Everything a CLI command needs; empty optionals mean "not given".
struct RunConfig {
  std::optional<std::string> case_name;
  std::optional<std::string> case_file;
  std::vector<std::string> mesh_files;
  std::optional<MeshFamily> family;
  std::vector<std::size_t> levels;
  BoundingBox bbox{-1.0, 1.0, -1.0, 1.0};
  double kershaw_distortion = 0.8;
  std::optional<double> fixed_dt;
  std::optional<double> dt_coefficient;
  std::optional<double> dt_power;
  std::optional<std::string> output_dir;
  std::vector<std::string> formats{"vtk", "csv"};
  std::size_t output_every = 1;
  SolverOptions solver;

  /// Explicit rule from the config if any, otherwise `fallback`.
  TimeStepRule time_step(const TimeStepRule& fallback) const {
    if (fixed_dt) return {*fixed_dt, 0.0};
    TimeStepRule r = fallback;
    if (dt_coefficient) r.coefficient = *dt_coefficient;
    if (dt_power) r.power = *dt_power;
    return r;
  }

  void validate() const {
    if (fixed_dt && !(*fixed_dt > 0.0)) throw ParseError("must be positive", 0, "time_step.dt");
    if (dt_coefficient && !(*dt_coefficient > 0.0)) throw ParseError("must be positive", 0, "time_step.coefficient");
    if (dt_power && !(*dt_power >= 0.0)) throw ParseError("must be non-negative", 0, "time_step.power");
    if (!(solver.complementarity_tol > 0.0)) throw ParseError("must be positive", 0, "solver.complementarity_tol");
    if (!(solver.linear_tol > 0.0)) throw ParseError("must be positive", 0, "solver.linear_tol");
    if (output_every < 1) throw ParseError("must be at least 1", 0, "output_every");
    if (!(bbox.xmax > bbox.xmin) || !(bbox.ymax > bbox.ymin)) throw ParseError("needs xmin < xmax and ymin < ymax", 0, "bbox");
    for (const auto& f : formats)
      if (f != "vtk" && f != "csv") throw ParseError("unknown output format '" + f + "' (vtk, csv)", 0, "formats");
  }
};

/// "3", "1..4", "2,4,8" or a mix such as "1..3,6".
inline std::vector<std::size_t> parse_levels(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  auto number = [&](const std::string& s) -> std::size_t {
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size() || v == 0 || s.front() == '-') throw UsageError("invalid refinement level '" + s + "' in '" + text + "'");
    return static_cast<std::size_t>(v);
  };
  while (std::getline(ss, item, ',')) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      out.push_back(number(item));
    } else {
      const std::size_t a = number(item.substr(0, dots)), b = number(item.substr(dots + 2));
      if (b < a) throw UsageError("empty refinement range '" + item + "'");
      for (std::size_t n = a; n <= b; ++n) out.push_back(n);
    }
  }
  if (out.empty()) throw UsageError("refinement list is empty");
  return out;
}

/// "xmin,xmax,ymin,ymax".
inline BoundingBox parse_bbox(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("invalid bounding box '" + text + "' (expected xmin,xmax,ymin,ymax)");
    }
  }
  if (v.size() != 4) throw UsageError("invalid bounding box '" + text + "' (expected xmin,xmax,ymin,ymax)");
  return {v[0], v[1], v[2], v[3]};
}

namespace detail {

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), line_of_offset(text, e.byte == 0 ? 0 : e.byte - 1), "");
  }
}

template <class T>
T json_get(const nlohmann::json& j, const std::string& field) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParseError("wrong type (" + std::string(j.type_name()) + ")", 0, field);
  }
}

inline std::string dirname_of(const std::string& path) {
  const auto slash = path.find_last_of('/');
  return slash == std::string::npos ? std::string() : path.substr(0, slash + 1);
}

inline std::string resolve(const std::string& base, const std::string& path) {
  return path.empty() || path.front() == '/' || base.empty() ? path : base + path;
}

}  // namespace detail

/// Overlay config keys onto `cfg`. Relative file paths resolve against `base_dir`. Unknown keys are errors.
inline void apply_config_json(const nlohmann::json& j, RunConfig& cfg, const std::string& base_dir = "") {
  using detail::json_get;
  if (!j.is_object()) throw ParseError("top-level value must be an object", 0, "");
  for (const auto& [key, v] : j.items()) {
    if (key == "case") {
      cfg.case_name = json_get<std::string>(v, key);
    } else if (key == "case_file") {
      cfg.case_file = detail::resolve(base_dir, json_get<std::string>(v, key));
    } else if (key == "mesh") {
      cfg.mesh_files.clear();
      if (v.is_string()) {
        cfg.mesh_files.push_back(detail::resolve(base_dir, v.get<std::string>()));
      } else {
        for (const auto& m : json_get<std::vector<std::string>>(v, key)) cfg.mesh_files.push_back(detail::resolve(base_dir, m));
      }
    } else if (key == "family") {
      try {
        cfg.family = parse_mesh_family(json_get<std::string>(v, key));
      } catch (const UsageError& e) {
        throw ParseError(e.what(), 0, key);
      }
    } else if (key == "levels") {
      try {
        cfg.levels = v.is_string() ? parse_levels(v.get<std::string>()) : json_get<std::vector<std::size_t>>(v, key);
      } catch (const UsageError& e) {
        throw ParseError(e.what(), 0, key);
      }
      if (cfg.levels.empty()) throw ParseError("refinement list is empty", 0, key);
    } else if (key == "bbox") {
      const auto b = json_get<std::vector<double>>(v, key);
      if (b.size() != 4) throw ParseError("expected [xmin, xmax, ymin, ymax]", 0, key);
      cfg.bbox = {b[0], b[1], b[2], b[3]};
    } else if (key == "kershaw_distortion") {
      cfg.kershaw_distortion = json_get<double>(v, key);
    } else if (key == "time_step") {
      if (!v.is_object()) throw ParseError("expected an object", 0, key);
      for (const auto& [k2, v2] : v.items()) {
        const std::string f = "time_step." + k2;
        if (k2 == "dt") cfg.fixed_dt = json_get<double>(v2, f);
        else if (k2 == "coefficient") cfg.dt_coefficient = json_get<double>(v2, f);
        else if (k2 == "power") cfg.dt_power = json_get<double>(v2, f);
        else throw ParseError("unknown key", 0, f);
      }
    } else if (key == "output_dir") {
      cfg.output_dir = detail::resolve(base_dir, json_get<std::string>(v, key));
    } else if (key == "formats") {
      cfg.formats = json_get<std::vector<std::string>>(v, key);
    } else if (key == "output_every") {
      cfg.output_every = json_get<std::size_t>(v, key);
    } else if (key == "solver") {
      if (!v.is_object()) throw ParseError("expected an object", 0, key);
      for (const auto& [k2, v2] : v.items()) {
        const std::string f = "solver." + k2;
        if (k2 == "complementarity_tol") cfg.solver.complementarity_tol = json_get<double>(v2, f);
        else if (k2 == "linear_tol") cfg.solver.linear_tol = json_get<double>(v2, f);
        else if (k2 == "direct_limit") cfg.solver.direct_limit = json_get<std::size_t>(v2, f);
        else if (k2 == "cg_max_iterations") cfg.solver.cg_max_iterations = json_get<std::size_t>(v2, f);
        else throw ParseError("unknown key", 0, f);
      }
    } else {
      throw ParseError("unknown key", 0, key);
    }
  }
}

inline RunConfig load_run_config(const std::string& path) {
  RunConfig cfg;
  try {
    apply_config_json(detail::read_json_file(path), cfg, detail::dirname_of(path));
  } catch (const ParseError& e) {
    throw ParseError(e.reason() + " in config '" + path + "'", e.line(), e.field());
  }
  return cfg;
}

/// A user case from a JSON document. Expressions use the grammar of Expression; x, y (and t where noted):
///   name, description           strings (optional)
///   domain                      [xmin, xmax, ymin, ymax], default (-1,1)^2
///   final_time                  number, required
///   obstacle                    expression in x, y, required
///   source, dirichlet           expressions in x, y, t, default 0
///   initial                     expression in x, y, default 0
///   diffusion                   [[a11, a12], [a21, a22]] of numbers or expressions in x, y; default identity
///   exact, exact_grad           expression in x, y, t and a pair of them; give both or neither
///   time_step                   {"dt": v} or {"coefficient": c, "power": p}, default c = 1, p = 2
inline AnalyticCase parse_case_spec(const nlohmann::json& j) {
  using detail::json_get;
  if (!j.is_object()) throw ParseError("top-level value must be an object", 0, "");
  auto expr = [&](const std::string& field, const nlohmann::json& v) {
    if (v.is_number()) return Expression(v.dump());
    if (!v.is_string()) throw ParseError("expected an expression string", 0, field);
    try {
      return Expression(v.get<std::string>());
    } catch (const ParseError& e) {
      throw ParseError(e.reason(), 0, field);
    }
  };
  static const std::vector<std::string> known = {"name", "description", "domain", "final_time", "obstacle", "source", "dirichlet",
                                                 "initial", "diffusion", "exact", "exact_grad", "time_step"};
  for (const auto& [key, v] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ParseError("unknown key", 0, key);

  AnalyticCase c;
  c.name = j.contains("name") ? json_get<std::string>(j["name"], "name") : "user";
  c.description = j.contains("description") ? json_get<std::string>(j["description"], "description") : "user-defined case";
  if (j.contains("domain")) {
    const auto b = json_get<std::vector<double>>(j["domain"], "domain");
    if (b.size() != 4 || !(b[1] > b[0]) || !(b[3] > b[2])) throw ParseError("expected [xmin, xmax, ymin, ymax] with min < max", 0, "domain");
    c.domain = {b[0], b[1], b[2], b[3]};
  }
  if (!j.contains("final_time")) throw ParseError("missing", 0, "final_time");
  c.spec.final_time = json_get<double>(j["final_time"], "final_time");
  if (!(c.spec.final_time > 0.0)) throw ParseError("must be positive", 0, "final_time");
  if (!j.contains("obstacle")) throw ParseError("missing", 0, "obstacle");
  const Expression psi = expr("obstacle", j["obstacle"]);
  c.spec.obstacle = [psi](const Vec2& x) { return psi(x.x(), x.y()); };
  if (j.contains("source")) {
    const Expression f = expr("source", j["source"]);
    c.spec.source = [f](const Vec2& x, double t) { return f(x.x(), x.y(), t); };
  }
  if (j.contains("dirichlet")) {
    const Expression g = expr("dirichlet", j["dirichlet"]);
    c.spec.dirichlet = [g](const Vec2& x, double t) { return g(x.x(), x.y(), t); };
  }
  if (j.contains("initial")) {
    const Expression u0 = expr("initial", j["initial"]);
    c.spec.initial = [u0](const Vec2& x) { return u0(x.x(), x.y()); };
  }
  if (j.contains("diffusion")) {
    const auto& d = j["diffusion"];
    if (!d.is_array() || d.size() != 2 || !d[0].is_array() || !d[1].is_array() || d[0].size() != 2 || d[1].size() != 2)
      throw ParseError("expected a 2x2 array", 0, "diffusion");
    std::vector<Expression> a;
    for (int r = 0; r < 2; ++r)
      for (int s = 0; s < 2; ++s) a.push_back(expr("diffusion[" + std::to_string(r) + "][" + std::to_string(s) + "]", d[r][s]));
    c.spec.diffusion = [a](const Vec2& x) {
      Mat2 m;
      m << a[0](x.x(), x.y()), a[1](x.x(), x.y()), a[2](x.x(), x.y()), a[3](x.x(), x.y());
      return m;
    };
  }
  if (j.contains("exact") != j.contains("exact_grad")) throw ParseError("give both exact and exact_grad or neither", 0, "exact_grad");
  if (j.contains("exact")) {
    const Expression u = expr("exact", j["exact"]);
    const auto& gj = j["exact_grad"];
    if (!gj.is_array() || gj.size() != 2) throw ParseError("expected a pair of expressions", 0, "exact_grad");
    const Expression gx = expr("exact_grad[0]", gj[0]), gy = expr("exact_grad[1]", gj[1]);
    c.exact = SpaceTimeField([u](const Vec2& x, double t) { return u(x.x(), x.y(), t); });
    c.exact_gradient = SpaceTimeGradient([gx, gy](const Vec2& x, double t) { return Vec2(gx(x.x(), x.y(), t), gy(x.x(), x.y(), t)); });
  }
  c.time_step = {1.0, 2.0};
  if (j.contains("time_step")) {
    const auto& ts = j["time_step"];
    if (!ts.is_object()) throw ParseError("expected an object", 0, "time_step");
    if (ts.contains("dt")) {
      c.time_step = {json_get<double>(ts["dt"], "time_step.dt"), 0.0};
    } else {
      if (ts.contains("coefficient")) c.time_step.coefficient = json_get<double>(ts["coefficient"], "time_step.coefficient");
      if (ts.contains("power")) c.time_step.power = json_get<double>(ts["power"], "time_step.power");
    }
    if (!(c.time_step.coefficient > 0.0) || !(c.time_step.power >= 0.0))
      throw ParseError("needs a positive step or coefficient and a non-negative power", 0, "time_step");
  }
  c.families = {MeshFamily::cartesian};
  return c;
}

inline AnalyticCase load_case_spec(const std::string& path) {
  try {
    return parse_case_spec(detail::read_json_file(path));
  } catch (const ParseError& e) {
    throw ParseError(e.reason() + " in case file '" + path + "'", e.line(), e.field());
  }
}

/// The case named in `cfg` (file wins over name); built-in `fallback` when neither is given.
inline AnalyticCase resolve_case(const RunConfig& cfg, const std::string& fallback = "") {
  if (cfg.case_file) return load_case_spec(*cfg.case_file);
  if (cfg.case_name) return find_case(*cfg.case_name);
  if (fallback.empty()) throw UsageError("no case given (use --case NAME or --case-file FILE)");
  return find_case(fallback);
}

}  // namespace pvi
