// pvi: mesh generation, transient obstacle solves, convergence studies and discretisation diagnostics.
// Exit codes: 0 success, 1 numerical failure, 2 usage or configuration error.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pvi/config.hpp"
#include "pvi/pvi.hpp"

using namespace pvi;
namespace fs = std::filesystem;

namespace {

constexpr int kExitNumerical = 1;
constexpr int kExitUsage = 2;

/// Flag values; empty optionals were not given on the command line and leave the config untouched.
struct Flags {
  std::optional<std::string> config, case_name, case_file, family, levels, bbox, out, formats, format;
  std::vector<std::string> meshes;
  std::optional<double> dt, dt_coef, dt_power, complementarity_tol, linear_tol, kershaw_distortion;
  std::optional<std::size_t> every;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration; flags override its keys");
  cmd->add_option("--out", f.out, "output directory (overrides PVI_OUTPUT_DIR and the config)");
}

void add_case(CLI::App* cmd, Flags& f) {
  cmd->add_option("--case", f.case_name, "built-in case name (see `pvi cases`)");
  cmd->add_option("--case-file", f.case_file, "JSON case specification");
}

void add_meshes(CLI::App* cmd, Flags& f, bool positional) {
  if (positional)
    cmd->add_option("meshes", f.meshes, "mesh files (native_json .json or fvca_text)");
  else
    cmd->add_option("--mesh", f.meshes, "mesh file(s), used instead of --family/--levels");
  cmd->add_option("--family", f.family, "generated mesh family: cartesian, triangular, hexagonal, kershaw");
  cmd->add_option("--levels", f.levels, "refinement levels, e.g. 3, 1..4 or 2,4,8");
  cmd->add_option("--bbox", f.bbox, "domain xmin,xmax,ymin,ymax for generated meshes");
  cmd->add_option("--kershaw-distortion", f.kershaw_distortion, "Kershaw distortion as a fraction of its cap, in (0, 1)");
}

void add_time_step(CLI::App* cmd, Flags& f) {
  cmd->add_option("--dt", f.dt, "fixed time step");
  cmd->add_option("--dt-coef", f.dt_coef, "time step coefficient c in dt = c h^p");
  cmd->add_option("--dt-power", f.dt_power, "time step power p in dt = c h^p");
  cmd->add_option("--complementarity-tol", f.complementarity_tol, "relative complementarity tolerance");
  cmd->add_option("--linear-tol", f.linear_tol, "relative residual of iterative linear solves");
}

/// Config file first, then flags on top.
RunConfig build_config(const Flags& f, bool& bbox_given) {
  RunConfig cfg = f.config ? load_run_config(*f.config) : RunConfig{};
  bbox_given = false;
  if (f.config) {
    // A bbox in the config counts as given.
    const auto j = detail::read_json_file(*f.config);
    bbox_given = j.is_object() && j.contains("bbox");
  }
  if (f.case_name) {
    cfg.case_name = *f.case_name;
    if (!f.case_file) cfg.case_file.reset();
  }
  if (f.case_file) cfg.case_file = *f.case_file;
  if (!f.meshes.empty()) cfg.mesh_files = f.meshes;
  if (f.family) cfg.family = parse_mesh_family(*f.family);
  if (f.levels) cfg.levels = parse_levels(*f.levels);
  if (f.bbox) {
    cfg.bbox = parse_bbox(*f.bbox);
    bbox_given = true;
  }
  if (f.kershaw_distortion) cfg.kershaw_distortion = *f.kershaw_distortion;
  if (f.dt) {
    cfg.fixed_dt = *f.dt;
  } else if (f.dt_coef || f.dt_power) {
    cfg.fixed_dt.reset();
  }
  if (f.dt_coef) cfg.dt_coefficient = *f.dt_coef;
  if (f.dt_power) cfg.dt_power = *f.dt_power;
  if (f.complementarity_tol) cfg.solver.complementarity_tol = *f.complementarity_tol;
  if (f.linear_tol) cfg.solver.linear_tol = *f.linear_tol;
  if (f.every) cfg.output_every = *f.every;
  if (f.formats) {
    cfg.formats.clear();
    std::stringstream ss(*f.formats);
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) cfg.formats.push_back(item);
  }
  if (f.out) {
    cfg.output_dir = *f.out;
  } else if (const char* env = std::getenv("PVI_OUTPUT_DIR"); env && *env) {
    cfg.output_dir = env;
  }
  cfg.validate();
  return cfg;
}

fs::path output_dir(const RunConfig& cfg) {
  const fs::path dir = cfg.output_dir.value_or(".");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw UsageError("cannot create output directory '" + dir.string() + "'");
  return dir;
}

struct MeshEntry {
  std::string label;
  std::size_t level = 0;
  std::shared_ptr<const PolytopalMesh> mesh;
};

/// Mesh files if given, otherwise generated meshes of the configured family and levels.
std::vector<MeshEntry> collect_meshes(const RunConfig& cfg, const BoundingBox& domain) {
  std::vector<MeshEntry> out;
  if (!cfg.mesh_files.empty()) {
    for (const auto& path : cfg.mesh_files) out.push_back({path, 0, std::make_shared<const PolytopalMesh>(load_mesh(path))});
    return out;
  }
  if (!cfg.family) throw UsageError("no meshes given (use --mesh FILE... or --family with --levels)");
  if (cfg.levels.empty()) throw UsageError("refinement list is empty (use --levels)");
  MeshGenOptions opt;
  opt.kershaw_distortion = cfg.kershaw_distortion;
  for (std::size_t n : cfg.levels)
    out.push_back({to_string(*cfg.family) + "_" + std::to_string(n), n,
                   std::make_shared<const PolytopalMesh>(generate_mesh(*cfg.family, n, domain, opt))});
  return out;
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path.string(), j.dump(2) + "\n"); }

int cmd_meshgen(const Flags& f, const std::string& format_name) {
  bool bbox_given = false;
  const RunConfig cfg = build_config(f, bbox_given);
  if (!cfg.family) throw UsageError("meshgen needs --family");
  if (cfg.levels.empty()) throw UsageError("meshgen needs --levels");
  const MeshFormat format = parse_mesh_format(format_name);
  const fs::path dir = output_dir(cfg);
  for (const auto& m : collect_meshes(cfg, cfg.bbox)) {
    const fs::path path = dir / (m.label + (format == MeshFormat::native_json ? ".json" : ".txt"));
    save_mesh(*m.mesh, path.string(), format);
    std::cout << path.string() << ": " << m.mesh->num_cells() << " cells, h = " << mesh_size(*m.mesh) << "\n";
  }
  return 0;
}

int cmd_validate(const Flags& f) {
  if (f.meshes.empty()) throw UsageError("validate needs at least one mesh file");
  for (const auto& path : f.meshes) {
    const PolytopalMesh mesh = f.format ? load_mesh(path, parse_mesh_format(*f.format)) : load_mesh(path);
    const auto bb = mesh.domain_bbox();
    std::cout << path << ": ok, " << mesh.num_vertices() << " vertices, " << mesh.num_edges() << " edges ("
              << mesh.num_boundary_edges() << " on the boundary), " << mesh.num_cells() << " cells, h = " << mesh_size(mesh)
              << ", bbox [" << bb.xmin << ", " << bb.xmax << "] x [" << bb.ymin << ", " << bb.ymax << "]\n";
  }
  return 0;
}

int cmd_solve(const Flags& f) {
  bool bbox_given = false;
  RunConfig cfg = build_config(f, bbox_given);
  const AnalyticCase c = resolve_case(cfg);
  if (cfg.mesh_files.size() > 1) throw UsageError("solve takes a single mesh");
  if (cfg.mesh_files.empty() && cfg.levels.size() > 1) cfg.levels.resize(1);
  if (cfg.mesh_files.empty() && !cfg.family && !c.families.empty()) cfg.family = c.families.front();
  const auto meshes = collect_meshes(cfg, bbox_given ? cfg.bbox : c.domain);
  const auto& mesh = meshes.front().mesh;

  const GradientDiscretisation gd = build_gd(mesh, c.spec.diffusion);
  const TimeStepRule rule = cfg.time_step(c.time_step);
  const TimeGrid grid = TimeGrid::with_max_step(c.spec.final_time, rule.step(mesh_size(*mesh)));
  TransientOptions opt;
  opt.solver = cfg.solver;
  const fs::path dir = output_dir(cfg);
  const ObstacleVector psi = interpolate_obstacle(gd, c.spec.obstacle);
  const bool vtk = std::find(cfg.formats.begin(), cfg.formats.end(), "vtk") != cfg.formats.end();
  const bool csv = std::find(cfg.formats.begin(), cfg.formats.end(), "csv") != cfg.formats.end();

  nlohmann::json steps = nlohmann::json::array();
  const StepHook hook = [&](std::size_t n, double t, const DofVector& u, const ActiveSetPartition& part, const SolveStats* stats) {
    const double tol = stats ? stats->tolerance : cfg.solver.complementarity_tol;
    nlohmann::json entry{{"step", n}, {"t", t}, {"contact_cells", part.num_contact()}};
    if (stats) entry["stats"] = to_json(*stats);
    steps.push_back(entry);
    if (n % cfg.output_every != 0 && n != grid.num_steps()) return;
    char name[32];
    std::snprintf(name, sizeof name, "step_%04zu", n);
    const auto fields = solution_fields(u, psi, tol);
    if (vtk) write_text((dir / (std::string(name) + ".vtk")).string(), to_vtk(*mesh, fields, c.name + " t=" + std::to_string(t)));
    if (csv) write_text((dir / (std::string(name) + ".csv")).string(), to_cell_csv(*mesh, fields));
  };
  const TransientSolution sol = run_transient(gd, c.spec, grid, opt, hook);

  nlohmann::json report{{"case", c.name},
                        {"mesh", {{"source", meshes.front().label}, {"cells", mesh->num_cells()}, {"h", mesh_size(*mesh)}}},
                        {"time", {{"final_time", c.spec.final_time}, {"steps", grid.num_steps()}, {"dt", grid.max_step()}}},
                        {"steps", steps}};
  if (c.has_exact()) report["errors"] = to_json(error_norms(gd, sol, *c.exact, *c.exact_gradient));
  write_json(dir / "stats.json", report);

  std::size_t max_it = 0;
  for (const auto& s : sol.stats) max_it = std::max(max_it, s.iterations);
  std::cout << c.name << " on " << meshes.front().label << ": " << mesh->num_cells() << " cells, " << grid.num_steps()
            << " steps, max active-set iterations " << max_it << ", contact cells at T " << sol.partitions.back().num_contact();
  if (report.contains("errors") && report["errors"].contains("relative_final_l2"))
    std::cout << ", relative L2 error " << report["errors"]["relative_final_l2"].get<double>() << ", relative gradient error "
              << report["errors"]["relative_final_grad"].get<double>();
  std::cout << "\nwrote " << (dir / "stats.json").string() << "\n";
  return 0;
}

int cmd_converge(const Flags& f) {
  bool bbox_given = false;
  RunConfig cfg = build_config(f, bbox_given);
  const AnalyticCase c = resolve_case(cfg);
  if (!c.has_exact()) throw UsageError("case '" + c.name + "' has no exact solution; converge needs one");
  if (cfg.mesh_files.empty() && !cfg.family && !c.families.empty()) cfg.family = c.families.front();
  const auto meshes = collect_meshes(cfg, bbox_given ? cfg.bbox : c.domain);
  TransientOptions opt;
  opt.solver = cfg.solver;
  const TimeStepRule rule = cfg.time_step(c.time_step);
  std::vector<ConvergenceRow> rows;
  for (const auto& m : meshes) {
    rows.push_back(run_level(c, m.mesh, rule, opt));
    rows.back().level = m.level;
    const auto& r = rows.back();
    std::cout << m.label << ": h = " << r.h << ", " << r.cells << " cells, " << r.steps << " steps, relative L2 "
              << r.errors.relative_final_l2 << ", relative gradient " << r.errors.relative_final_grad << "\n";
  }
  const fs::path dir = output_dir(cfg);
  write_text((dir / "convergence.csv").string(), convergence_csv(rows));
  write_text((dir / "convergence.dat").string(), convergence_plot_data(rows));
  std::cout << "wrote " << (dir / "convergence.csv").string() << " and " << (dir / "convergence.dat").string() << "\n";
  return 0;
}

int cmd_diagnose(const Flags& f) {
  constexpr double pi = std::numbers::pi;
  bool bbox_given = false;
  RunConfig cfg = build_config(f, bbox_given);
  const AnalyticCase c = resolve_case(cfg, "smooth");
  const auto meshes = collect_meshes(cfg, bbox_given ? cfg.bbox : c.domain);
  const std::vector<WdProbe> wd = {
      {"smooth", [](const Vec2& x) { return Vec2(std::sin(pi * x.x()) * std::cos(pi * x.y()), std::exp(x.x() * x.y())); },
       [](const Vec2& x) { return pi * std::cos(pi * x.x()) * std::cos(pi * x.y()) + x.x() * std::exp(x.x() * x.y()); }}};
  const std::vector<SdProbe> sd = {
      {"smooth", [](const Vec2& x) { return std::sin(pi * x.x()) * std::sin(pi * x.y()); },
       [](const Vec2& x) {
         return Vec2(pi * std::cos(pi * x.x()) * std::sin(pi * x.y()), pi * std::sin(pi * x.x()) * std::cos(pi * x.y()));
       }}};
  std::ostringstream csv;
  csv.precision(17);
  csv << "mesh,level,cells,h,C_D,W_D,S_D_bound,I_D0\n";
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& m : meshes) {
    const GradientDiscretisation gd = build_gd(m.mesh, c.spec.diffusion);
    const AssembledForms forms = assemble_forms(gd);
    const GdQualityReport r = quality_report(gd, forms, wd, sd, c.spec.initial, interpolate_obstacle(gd, c.spec.obstacle));
    csv << m.label << ',' << m.level << ',' << m.mesh->num_cells() << ',' << r.h << ',' << r.c_d << ',' << r.w_d[0] << ','
        << r.s_d[0] << ',' << r.i_d0 << '\n';
    nlohmann::json j = to_json(r);
    j["mesh"] = m.label;
    j["level"] = m.level;
    j["cells"] = m.mesh->num_cells();
    rows.push_back(j);
    std::cout << m.label << ": C_D = " << r.c_d << ", W_D = " << r.w_d[0] << ", S_D bound = " << r.s_d[0] << ", I_D0 = " << r.i_d0
              << "\n";
  }
  const fs::path dir = output_dir(cfg);
  write_text((dir / "diagnostics.csv").string(), csv.str());
  write_json(dir / "diagnostics.json", {{"case", c.name}, {"probes", {{"W_D", "smooth"}, {"S_D", "smooth"}}}, {"levels", rows}});
  std::cout << "wrote " << (dir / "diagnostics.csv").string() << " and " << (dir / "diagnostics.json").string() << "\n";
  return 0;
}

int cmd_cases(bool discrepancy) {
  for (const auto& name : builtin_case_names()) {
    const AnalyticCase c = find_case(name);
    std::cout << name << ": " << c.description << " (T = " << c.spec.final_time << (c.has_exact() ? ", exact solution" : "")
              << ")\n";
  }
  if (discrepancy) {
    const SourceDiscrepancy d = test1_source_discrepancy();
    std::cout << "test1 source discrepancy (printed vs derived, 51x51x11 grid, non-contact points): max abs " << d.max_abs
              << ", relative to max |f| " << d.max_relative << ", " << d.samples << " samples\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parabolic obstacle problems with the hybrid mimetic mixed gradient scheme"};
  app.require_subcommand(1);
  Flags f;
  std::string mesh_format = "native_json";
  bool discrepancy = false;

  auto* meshgen = app.add_subcommand("meshgen", "write generated meshes for a family and refinement list");
  add_common(meshgen, f);
  add_meshes(meshgen, f, false);
  meshgen->add_option("--format", mesh_format, "native_json (default) or fvca_text");

  auto* validate = app.add_subcommand("validate", "load and validate mesh files");
  validate->add_option("meshes", f.meshes, "mesh files")->required();
  validate->add_option("--format", f.format, "force native_json or fvca_text");

  auto* solve = app.add_subcommand("solve", "run one transient solve and write per-step fields and statistics");
  add_common(solve, f);
  add_case(solve, f);
  add_meshes(solve, f, false);
  add_time_step(solve, f);
  solve->add_option("--formats", f.formats, "comma-separated field formats: vtk, csv");
  solve->add_option("--every", f.every, "write fields every k steps (the final step is always written)");

  auto* converge = app.add_subcommand("converge", "convergence study against an exact solution");
  add_common(converge, f);
  add_case(converge, f);
  add_meshes(converge, f, false);
  add_time_step(converge, f);

  auto* diagnose = app.add_subcommand("diagnose", "C_D, W_D, S_D bound and I_D0 per mesh");
  add_common(diagnose, f);
  add_case(diagnose, f);
  add_meshes(diagnose, f, false);

  auto* cases = app.add_subcommand("cases", "list built-in cases");
  cases->add_flag("--discrepancy", discrepancy, "report printed vs derived source of test1");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (meshgen->parsed()) return cmd_meshgen(f, mesh_format);
    if (validate->parsed()) return cmd_validate(f);
    if (solve->parsed()) return cmd_solve(f);
    if (converge->parsed()) return cmd_converge(f);
    if (diagnose->parsed()) return cmd_diagnose(f);
    if (cases->parsed()) return cmd_cases(discrepancy);
  } catch (const SolverError& e) {
    std::cerr << "pvi: numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const UsageError& e) {
    std::cerr << "pvi: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    std::cerr << "pvi: " << e.what() << "\n";
    return kExitUsage;
  } catch (const MeshError& e) {
    std::cerr << "pvi: invalid mesh: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "pvi: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}
