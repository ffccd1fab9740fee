#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pvi/error.hpp"
#include "pvi/mesh.hpp"

namespace pvi {

enum class MeshFormat { native_json, fvca_text };

inline std::string to_string(MeshFormat f) { return f == MeshFormat::native_json ? "native_json" : "fvca_text"; }

inline MeshFormat parse_mesh_format(const std::string& s) {
  if (s == "native_json" || s == "json") return MeshFormat::native_json;
  if (s == "fvca_text" || s == "fvca") return MeshFormat::fvca_text;
  throw UsageError("unknown mesh format '" + s + "' (expected native_json or fvca_text)");
}

/// Format from the file extension: .json is native_json, anything else fvca_text.
inline MeshFormat guess_mesh_format(const std::string& path) {
  const auto dot = path.rfind('.');
  return dot != std::string::npos && path.substr(dot) == ".json" ? MeshFormat::native_json : MeshFormat::fvca_text;
}

namespace detail {

inline std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

inline Vec2 json_point(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ParseError("expected a pair of numbers", 0, field);
  return Vec2(j[0].get<double>(), j[1].get<double>());
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open mesh file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace detail

/// Parse a native_json mesh document:
///   {"format": "pvi-mesh", "version": 1, "vertices": [[x, y], ...],
///    "cells": [[i0, i1, ...], ...], "cell_points": [[x, y], ...] (optional), "metadata": {...} (optional)}
/// Vertex indices are 0-based. All geometry is recomputed from the coordinates.
inline PolytopalMesh parse_native_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), detail::line_of_offset(text, e.byte == 0 ? 0 : e.byte - 1), "");
  }
  if (!doc.is_object()) throw ParseError("top-level value must be an object", 0, "");
  if (doc.contains("format") && doc["format"] != "pvi-mesh") throw ParseError("unsupported format tag", 0, "format");
  if (doc.contains("version") && doc["version"] != 1) throw ParseError("unsupported version", 0, "version");
  if (!doc.contains("vertices") || !doc["vertices"].is_array()) throw ParseError("missing array", 0, "vertices");
  if (!doc.contains("cells") || !doc["cells"].is_array()) throw ParseError("missing array", 0, "cells");

  std::vector<Vec2> vertices;
  for (std::size_t i = 0; i < doc["vertices"].size(); ++i)
    vertices.push_back(detail::json_point(doc["vertices"][i], "vertices[" + std::to_string(i) + "]"));
  std::vector<std::vector<std::size_t>> cells;
  for (std::size_t k = 0; k < doc["cells"].size(); ++k) {
    const auto& c = doc["cells"][k];
    const std::string field = "cells[" + std::to_string(k) + "]";
    if (!c.is_array()) throw ParseError("expected an array of vertex indices", 0, field);
    std::vector<std::size_t> loop;
    for (const auto& v : c) {
      if (!v.is_number_integer() || v.get<long long>() < 0) throw ParseError("vertex index must be a non-negative integer", 0, field);
      loop.push_back(v.get<std::size_t>());
    }
    cells.push_back(std::move(loop));
  }
  std::optional<std::vector<Vec2>> points;
  if (doc.contains("cell_points") && !doc["cell_points"].is_null()) {
    if (!doc["cell_points"].is_array()) throw ParseError("expected an array", 0, "cell_points");
    points.emplace();
    for (std::size_t k = 0; k < doc["cell_points"].size(); ++k)
      points->push_back(detail::json_point(doc["cell_points"][k], "cell_points[" + std::to_string(k) + "]"));
  }
  PolytopalMesh::Metadata meta;
  if (doc.contains("metadata")) {
    if (!doc["metadata"].is_object()) throw ParseError("expected an object", 0, "metadata");
    for (const auto& [key, value] : doc["metadata"].items()) meta[key] = value.is_string() ? value.get<std::string>() : value.dump();
  }
  return PolytopalMesh::from_polygons(std::move(vertices), std::move(cells), std::move(points), std::move(meta));
}

inline std::string to_native_json(const PolytopalMesh& mesh) {
  nlohmann::json doc;
  doc["format"] = "pvi-mesh";
  doc["version"] = 1;
  auto& vs = doc["vertices"] = nlohmann::json::array();
  for (const Vec2& v : mesh.vertices()) vs.push_back({v.x(), v.y()});
  auto& cs = doc["cells"] = nlohmann::json::array();
  auto& ps = doc["cell_points"] = nlohmann::json::array();
  for (const Cell& c : mesh.cells()) {
    cs.push_back(c.vertices);
    ps.push_back({c.center.x(), c.center.y()});
  }
  doc["metadata"] = mesh.metadata();
  return doc.dump() + "\n";
}

/// Parse the FVCA-style text format. Sections, each a keyword line followed by a count line:
///   vertices      then `count` lines "x y"
///   cells         then `count` lines "m i1 ... im" (1-based vertex indices)
///   triangles / quadrangles / pentagons / hexagons
///                 then `count` lines of 3 / 4 / 5 / 6 1-based vertex indices
/// Any other section is skipped (count lines). Blank lines and lines starting with '#' are ignored.
inline PolytopalMesh parse_fvca_text(const std::string& text) {
  std::vector<std::pair<std::size_t, std::string>> lines;  // (line number, content)
  {
    std::istringstream in(text);
    std::string l;
    std::size_t no = 0;
    while (std::getline(in, l)) {
      ++no;
      if (!l.empty() && l.back() == '\r') l.pop_back();
      const auto first = l.find_first_not_of(" \t");
      if (first == std::string::npos || l[first] == '#') continue;
      lines.emplace_back(no, l.substr(first));
    }
  }
  std::size_t pos = 0;
  auto next = [&](const std::string& field) -> const std::pair<std::size_t, std::string>& {
    if (pos >= lines.size()) throw ParseError("unexpected end of file", lines.empty() ? 1 : lines.back().first + 1, field);
    return lines[pos++];
  };
  auto read_count = [&](const std::string& field) {
    const auto& [no, s] = next(field);
    std::istringstream ls(s);
    long long n = -1;
    std::string rest;
    if (!(ls >> n) || n < 0 || (ls >> rest)) throw ParseError("expected a non-negative count", no, field);
    return static_cast<std::size_t>(n);
  };
  auto read_indices = [&](std::istringstream& ls, std::size_t m, std::size_t no, const std::string& field) {
    std::vector<std::size_t> loop;
    for (std::size_t i = 0; i < m; ++i) {
      long long v = 0;
      if (!(ls >> v)) throw ParseError("expected " + std::to_string(m) + " vertex indices", no, field);
      if (v < 1) throw ParseError("vertex indices are 1-based", no, field);
      loop.push_back(static_cast<std::size_t>(v - 1));
    }
    std::string rest;
    if (ls >> rest) throw ParseError("trailing data '" + rest + "'", no, field);
    return loop;
  };

  std::vector<Vec2> vertices;
  std::vector<std::vector<std::size_t>> cells;
  bool have_vertices = false;
  while (pos < lines.size()) {
    const auto [kno, raw] = lines[pos++];
    std::string key;
    std::istringstream(raw) >> key;
    for (char& ch : key) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    const std::size_t count = read_count(key);
    if (key == "vertices") {
      have_vertices = true;
      for (std::size_t i = 0; i < count; ++i) {
        const auto& [no, s] = next("vertices");
        std::istringstream ls(s);
        double x = 0, y = 0;
        std::string rest;
        if (!(ls >> x >> y) || (ls >> rest)) throw ParseError("expected 'x y'", no, "vertices");
        vertices.emplace_back(x, y);
      }
    } else if (key == "cells") {
      for (std::size_t i = 0; i < count; ++i) {
        const auto& [no, s] = next("cells");
        std::istringstream ls(s);
        long long m = 0;
        if (!(ls >> m) || m < 3) throw ParseError("expected vertex count >= 3", no, "cells");
        cells.push_back(read_indices(ls, static_cast<std::size_t>(m), no, "cells"));
      }
    } else if (key == "triangles" || key == "quadrangles" || key == "pentagons" || key == "hexagons") {
      const std::size_t m = key == "triangles" ? 3 : key == "quadrangles" ? 4 : key == "pentagons" ? 5 : 6;
      for (std::size_t i = 0; i < count; ++i) {
        const auto& [no, s] = next(key);
        std::istringstream ls(s);
        cells.push_back(read_indices(ls, m, no, key));
      }
    } else {
      if (key.empty()) throw ParseError("expected a section keyword", kno, "");
      for (std::size_t i = 0; i < count; ++i) next(key);
    }
  }
  if (!have_vertices) throw ParseError("missing section", 0, "vertices");
  if (cells.empty()) throw ParseError("no cell section", 0, "cells");
  return PolytopalMesh::from_polygons(std::move(vertices), std::move(cells));
}

inline std::string to_fvca_text(const PolytopalMesh& mesh) {
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "vertices\n" << mesh.num_vertices() << "\n";
  for (const Vec2& v : mesh.vertices()) out << v.x() << ' ' << v.y() << '\n';
  out << "cells\n" << mesh.num_cells() << "\n";
  for (const Cell& c : mesh.cells()) {
    out << c.vertices.size();
    for (std::size_t v : c.vertices) out << ' ' << v + 1;
    out << '\n';
  }
  return out.str();
}

inline PolytopalMesh load_mesh(const std::string& path, std::optional<MeshFormat> format = std::nullopt) {
  const std::string text = detail::read_file(path);
  const MeshFormat f = format.value_or(guess_mesh_format(path));
  try {
    return f == MeshFormat::native_json ? parse_native_json(text) : parse_fvca_text(text);
  } catch (const ParseError& e) {
    throw ParseError(e.reason() + " in '" + path + "'", e.line(), e.field());
  } catch (const MeshError& e) {
    throw MeshError(e.reason() + " in '" + path + "'", e.entity(), e.id());
  }
}

inline void save_mesh(const PolytopalMesh& mesh, const std::string& path, std::optional<MeshFormat> format = std::nullopt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write mesh file '" + path + "'");
  out << (format.value_or(guess_mesh_format(path)) == MeshFormat::native_json ? to_native_json(mesh) : to_fvca_text(mesh));
  if (!out) throw UsageError("failed writing mesh file '" + path + "'");
}

}  // namespace pvi
