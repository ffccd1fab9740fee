#pragma once

#include <cstddef>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pvi/diagnostics.hpp"
#include "pvi/study.hpp"
#include "pvi/error.hpp"
#include "pvi/mesh.hpp"
#include "pvi/vi_solver.hpp"

namespace pvi {

/// A named per-cell scalar field.
struct CellField {
  std::string name;
  Eigen::VectorXd values;
};

namespace detail {

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write '" + path + "'");
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  return out;
}

inline void check_fields(const PolytopalMesh& mesh, const std::vector<CellField>& fields) {
  for (const auto& f : fields) {
    if (static_cast<std::size_t>(f.values.size()) != mesh.num_cells())
      throw UsageError("field '" + f.name + "' has " + std::to_string(f.values.size()) + " values for " +
                       std::to_string(mesh.num_cells()) + " cells");
    if (f.name.empty() || f.name.find_first_of(" \t\n,") != std::string::npos)
      throw UsageError("field name '" + f.name + "' must be non-empty without spaces or commas");
  }
}

}  // namespace detail

/// Legacy ASCII VTK unstructured grid with one polygon per cell and CELL_DATA scalars.
inline std::string to_vtk(const PolytopalMesh& mesh, const std::vector<CellField>& fields, const std::string& title = "pvi") {
  detail::check_fields(mesh, fields);
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.num_vertices() << " double\n";
  for (const Vec2& v : mesh.vertices()) out << v.x() << ' ' << v.y() << " 0\n";
  std::size_t total = 0;
  for (const Cell& c : mesh.cells()) total += c.vertices.size() + 1;
  out << "CELLS " << mesh.num_cells() << ' ' << total << '\n';
  for (const Cell& c : mesh.cells()) {
    out << c.vertices.size();
    for (std::size_t v : c.vertices) out << ' ' << v;
    out << '\n';
  }
  out << "CELL_TYPES " << mesh.num_cells() << '\n';
  for (std::size_t k = 0; k < mesh.num_cells(); ++k) out << "7\n";  // VTK_POLYGON
  if (!fields.empty()) {
    out << "CELL_DATA " << mesh.num_cells() << '\n';
    for (const auto& f : fields) {
      out << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
      for (Eigen::Index k = 0; k < f.values.size(); ++k) out << f.values[k] << '\n';
    }
  }
  return out.str();
}

/// CSV with columns cell, x, y, area, then one column per field.
inline std::string to_cell_csv(const PolytopalMesh& mesh, const std::vector<CellField>& fields) {
  detail::check_fields(mesh, fields);
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "cell,x,y,area";
  for (const auto& f : fields) out << ',' << f.name;
  out << '\n';
  for (std::size_t k = 0; k < mesh.num_cells(); ++k) {
    const Cell& c = mesh.cell(k);
    out << k << ',' << c.center.x() << ',' << c.center.y() << ',' << c.area;
    for (const auto& f : fields) out << ',' << f.values[static_cast<Eigen::Index>(k)];
    out << '\n';
  }
  return out.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  auto out = detail::open_output(path);
  out << text;
  if (!out) throw UsageError("failed writing '" + path + "'");
}

/// u, u - psi and the coincidence indicator (1 where u_K - psi_K <= tol).
inline std::vector<CellField> solution_fields(const DofVector& u, const ObstacleVector& psi, double tol) {
  const auto nc = static_cast<Eigen::Index>(u.num_cells());
  CellField val{"u", u.cells()}, gap{"u_minus_psi", u.cells() - psi.values}, contact{"contact", Eigen::VectorXd::Zero(nc)};
  for (Eigen::Index k = 0; k < nc; ++k) contact.values[k] = gap.values[k] <= tol ? 1.0 : 0.0;
  return {val, gap, contact};
}

inline nlohmann::json to_json(const SolveStats& s) {
  return {{"iterations", s.iterations},
          {"set_updates", s.set_updates()},
          {"set_changes", s.set_changes},
          {"linear_residuals", s.linear_residuals},
          {"complementarity_residual", s.complementarity_residual},
          {"conservation_defect", s.conservation_defect},
          {"tolerance", s.tolerance}};
}

inline nlohmann::json to_json(const ErrorReport& r) {
  nlohmann::json j{{"l2_per_node", r.l2_per_node},
                   {"l2_max", r.l2_max},
                   {"grad_space_time", r.grad_space_time},
                   {"final_l2", r.final_l2},
                   {"final_grad", r.final_grad},
                   {"exact_final_l2", r.exact_final_l2},
                   {"exact_final_grad", r.exact_final_grad}};
  if (r.has_relative) {
    j["relative_final_l2"] = r.relative_final_l2;
    j["relative_final_grad"] = r.relative_final_grad;
    j["relative_l2_max"] = r.relative_l2_max;
    j["relative_grad_space_time"] = r.relative_grad_space_time;
  }
  return j;
}

inline nlohmann::json to_json(const GdQualityReport& r) {
  return {{"h", r.h}, {"C_D", r.c_d}, {"W_D", r.w_d}, {"S_D_bound", r.s_d}, {"I_D0", r.i_d0}};
}

/// Columns h, relative L2 error, rate, relative gradient error, rate (final-time errors), plus
/// level, cells, steps, dt and the space-time norms. Rates are empty on the first row.
inline std::string convergence_csv(const std::vector<ConvergenceRow>& rows) {
  std::vector<double> hs, l2, gr;
  for (const auto& r : rows) {
    hs.push_back(r.h);
    l2.push_back(r.errors.relative_final_l2);
    gr.push_back(r.errors.relative_final_grad);
  }
  std::vector<double> rl2, rgr;
  if (rows.size() >= 2) {
    rl2 = eoc(l2, hs);
    rgr = eoc(gr, hs);
  }
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "h,rel_l2,rate_l2,rel_grad,rate_grad,level,cells,steps,dt,l2_max,grad_space_time\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    out << r.h << ',' << l2[i] << ',';
    if (i > 0) out << rl2[i - 1];
    out << ',' << gr[i] << ',';
    if (i > 0) out << rgr[i - 1];
    out << ',' << r.level << ',' << r.cells << ',' << r.steps << ',' << r.dt << ',' << r.errors.l2_max << ','
        << r.errors.grad_space_time << '\n';
  }
  return out.str();
}

/// Whitespace-separated columns for a log-log plot: h rel_l2 rel_grad.
inline std::string convergence_plot_data(const std::vector<ConvergenceRow>& rows) {
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "# h rel_l2 rel_grad\n";
  for (const auto& r : rows) out << r.h << ' ' << r.errors.relative_final_l2 << ' ' << r.errors.relative_final_grad << '\n';
  return out.str();
}

}  // namespace pvi
