#pragma once

// File formats: Gmsh MSH ASCII v2.2 subset reader, legacy VTK ASCII
// writer/reader, RFC 4180 CSV, self-contained SVG line plots and the
// line-oriented `key = value` config format.

#include "ftrcontact/mesh.hpp"

#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace ftr {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Gmsh MSH ASCII v2.2 subset.
//
// Recognised sections: $MeshFormat (must be "2.2 0 8"), $PhysicalNames
// (optional), $Nodes, $Elements.  Element types: 1 (2-node line) and
// 2 (3-node triangle); the first tag is the physical group.  Lines map to
// boundary markers, triangles to body ids, both via the caller-supplied
// name bindings (physical names if present, else the decimal tag).
// ---------------------------------------------------------------------------

inline Mesh read_msh(std::istream& in,
                     const std::map<std::string, Marker>& boundary_markers,
                     const std::map<std::string, int>& body_names)
{
  Mesh mesh;
  std::map<int, std::string> physical;  // tag -> name
  std::map<int, int> node_index;        // file id -> vertex index
  std::string line;
  auto fail = [](const std::string& msg) { throw ParseError("msh: " + msg); };

  while (std::getline(in, line)) {
    if (line.empty() || line[0] != '$') continue;
    std::string section = line.substr(1);
    if (section == "MeshFormat") {
      std::getline(in, line);
      std::istringstream ls(line);
      std::string version;
      ls >> version;
      if (version.rfind("2.2", 0) != 0) fail("unsupported version " + version);
      std::getline(in, line);  // $EndMeshFormat
    } else if (section == "PhysicalNames") {
      std::getline(in, line);
      int n = std::stoi(line);
      for (int i = 0; i < n; ++i) {
        std::getline(in, line);
        std::istringstream ls(line);
        int dim, tag;
        std::string name;
        ls >> dim >> tag;
        std::getline(ls, name);
        auto l = name.find('"');
        auto r = name.rfind('"');
        if (l == std::string::npos || r <= l) fail("malformed physical name");
        physical[tag] = name.substr(l + 1, r - l - 1);
      }
      std::getline(in, line);
    } else if (section == "Nodes") {
      std::getline(in, line);
      int n = std::stoi(line);
      for (int i = 0; i < n; ++i) {
        std::getline(in, line);
        std::istringstream ls(line);
        int id;
        double x, y, z;
        if (!(ls >> id >> x >> y >> z)) fail("malformed node line");
        node_index[id] = static_cast<int>(mesh.vertices.size());
        mesh.vertices.emplace_back(x, y);
      }
      std::getline(in, line);
    } else if (section == "Elements") {
      std::getline(in, line);
      int n = std::stoi(line);
      auto name_of = [&](int tag) {
        auto it = physical.find(tag);
        return it != physical.end() ? it->second : std::to_string(tag);
      };
      for (int i = 0; i < n; ++i) {
        std::getline(in, line);
        std::istringstream ls(line);
        int id, type, ntags;
        if (!(ls >> id >> type >> ntags)) fail("malformed element line");
        std::vector<int> tags(ntags);
        for (int& t : tags) ls >> t;
        int phys = ntags > 0 ? tags[0] : 0;
        if (type == 1) {
          int a, b;
          if (!(ls >> a >> b)) fail("malformed line element");
          std::string nm = name_of(phys);
          auto mit = boundary_markers.find(nm);
          if (mit == boundary_markers.end())
            fail("unbound boundary physical group '" + nm + "'");
          mesh.segments.push_back(
              {node_index.at(a), node_index.at(b), mit->second, 0});
        } else if (type == 2) {
          int a, b, c;
          if (!(ls >> a >> b >> c)) fail("malformed triangle element");
          std::string nm = name_of(phys);
          auto bit = body_names.find(nm);
          if (bit == body_names.end())
            fail("unbound body physical group '" + nm + "'");
          mesh.triangles.push_back(
              {node_index.at(a), node_index.at(b), node_index.at(c)});
          mesh.triangle_body.push_back(bit->second);
        }
        // other element types (points etc.) are ignored
      }
      std::getline(in, line);
    } else {
      // skip unknown section
      std::string end = "$End" + section;
      while (std::getline(in, line) && line != end) {
      }
    }
  }
  if (mesh.vertices.empty() || mesh.triangles.empty())
    fail("no nodes or no triangles");
  // segment body ids from the vertices' owning triangles
  auto body = mesh.vertex_body();
  for (auto& s : mesh.segments) s.body = body[s.a] == body[s.b] ? body[s.a] : 0;
  fix_orientation(mesh);
  return mesh;
}

inline Mesh read_msh_file(const std::string& path,
                          const std::map<std::string, Marker>& boundary_markers,
                          const std::map<std::string, int>& body_names)
{
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open mesh file " + path);
  return read_msh(in, boundary_markers, body_names);
}

// ---------------------------------------------------------------------------
// Legacy VTK ASCII (unstructured grid, reference points + displacement
// vectors).  Round-trips to full double precision.
// ---------------------------------------------------------------------------

inline void write_vtk(std::ostream& out, const Mesh& mesh, const DofMap& map,
                      const Eigen::VectorXd& z, const std::string& title)
{
  out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\n";
  out << "DATASET UNSTRUCTURED_GRID\n";
  out << std::setprecision(17);
  int nv = static_cast<int>(mesh.vertices.size());
  out << "POINTS " << nv << " double\n";
  for (const auto& v : mesh.vertices) out << v.x() << " " << v.y() << " 0\n";
  int nt = static_cast<int>(mesh.triangles.size());
  out << "CELLS " << nt << " " << 4 * nt << "\n";
  for (const auto& t : mesh.triangles)
    out << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
  out << "CELL_TYPES " << nt << "\n";
  for (int i = 0; i < nt; ++i) out << "5\n";
  out << "POINT_DATA " << nv << "\n";
  out << "VECTORS displacement double\n";
  for (int v = 0; v < nv; ++v)
    out << z[map.dof(v, 0)] - mesh.vertices[v].x() << " "
        << z[map.dof(v, 1)] - mesh.vertices[v].y() << " 0\n";
}

inline void write_vtk_file(const std::string& path, const Mesh& mesh,
                           const DofMap& map, const Eigen::VectorXd& z,
                           const std::string& title)
{
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open output file " + path);
  write_vtk(out, mesh, map, z, title);
}

/// Reads the displacement vectors of a file written by write_vtk and returns
/// the deformed configuration for the given mesh/dof map.
inline Eigen::VectorXd read_vtk_state(std::istream& in, const Mesh& mesh,
                                      const DofMap& map)
{
  std::string line;
  int npoints = -1;
  std::vector<Eigen::Vector2d> pts;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "POINTS") {
      ls >> npoints;
      pts.reserve(npoints);
      double x, y, zc;
      for (int i = 0; i < npoints; ++i) {
        in >> x >> y >> zc;
        pts.emplace_back(x, y);
      }
    } else if (kw == "VECTORS") {
      std::string name;
      ls >> name;
      if (name != "displacement") continue;
      if (npoints != static_cast<int>(mesh.vertices.size()))
        throw ParseError("vtk: point count does not match mesh");
      Eigen::VectorXd z(map.num_dofs());
      double dx, dy, dz;
      for (int v = 0; v < npoints; ++v) {
        if (!(in >> dx >> dy >> dz)) throw ParseError("vtk: short displacement data");
        z[map.dof(v, 0)] = pts[v].x() + dx;
        z[map.dof(v, 1)] = pts[v].y() + dy;
      }
      return z;
    }
  }
  throw ParseError("vtk: no displacement vectors found");
}

inline Eigen::VectorXd read_vtk_state_file(const std::string& path,
                                           const Mesh& mesh, const DofMap& map)
{
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open state file " + path);
  return read_vtk_state(in, mesh, map);
}

// ---------------------------------------------------------------------------
// RFC 4180 CSV (CRLF records, quoting only when needed).
// ---------------------------------------------------------------------------

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  void row(const std::vector<std::string>& fields)
  {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << quoted(fields[i]);
    }
    out_ << "\r\n";
  }

 private:
  static std::string quoted(const std::string& f)
  {
    if (f.find_first_of(",\"\r\n") == std::string::npos) return f;
    std::string q = "\"";
    for (char c : f) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  }

  std::ostream& out_;
};

inline std::string csv_num(double v)
{
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  return ss.str();
}

// ---------------------------------------------------------------------------
// Self-contained SVG line plots.
// ---------------------------------------------------------------------------

struct PlotSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

/// Writes a simple framed line plot; log_y replaces non-positive values by
/// the smallest positive one in the data.
inline void svg_line_plot(std::ostream& out, const std::string& title,
                          const std::vector<PlotSeries>& series, bool log_y)
{
  const double W = 640, H = 420, L = 70, R = 20, T = 40, B = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  double pos_min = 1e300;
  for (const auto& s : series)
    for (auto [x, y] : s.points)
      if (y > 0.0) pos_min = std::min(pos_min, y);
  if (pos_min == 1e300) pos_min = 1e-16;
  auto yval = [&](double y) {
    if (!log_y) return y;
    return std::log10(std::max(y, pos_min));
  };
  for (const auto& s : series)
    for (auto [x, y] : s.points) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, yval(y));
      ymax = std::max(ymax, yval(y));
    }
  if (xmax <= xmin) xmax = xmin + 1.0;
  if (ymax <= ymin) ymax = ymin + 1.0;
  auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double y) {
    return H - B - (yval(y) - ymin) / (ymax - ymin) * (H - T - B);
  };
  const char* colors[] = {"#1f4e96", "#c23b22", "#2e7d32", "#7b1fa2"};

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
      << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  out << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"15\">" << title << "</text>\n";
  out << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R
      << "\" height=\"" << H - T - B
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  // axis ticks
  for (int i = 0; i <= 5; ++i) {
    double x = xmin + i * (xmax - xmin) / 5.0;
    double y = ymin + i * (ymax - ymin) / 5.0;
    out << "<line x1=\"" << px(x) << "\" y1=\"" << H - B << "\" x2=\"" << px(x)
        << "\" y2=\"" << H - B + 5 << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << px(x) << "\" y=\"" << H - B + 20
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"11\">"
        << std::setprecision(3) << x << "</text>\n";
    double ypix = H - B - i * (H - T - B) / 5.0;
    out << "<line x1=\"" << L - 5 << "\" y1=\"" << ypix << "\" x2=\"" << L
        << "\" y2=\"" << ypix << "\" stroke=\"black\"/>\n";
    std::ostringstream lbl;
    if (log_y)
      lbl << "1e" << std::setprecision(3) << y;
    else
      lbl << std::setprecision(3) << y;
    out << "<text x=\"" << L - 8 << "\" y=\"" << ypix + 4
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
        << lbl.str() << "</text>\n";
  }
  int ci = 0;
  for (const auto& s : series) {
    const char* col = colors[ci % 4];
    out << "<polyline fill=\"none\" stroke=\"" << col
        << "\" stroke-width=\"1.5\" points=\"";
    for (auto [x, y] : s.points) out << px(x) << "," << py(y) << " ";
    out << "\"/>\n";
    out << "<text x=\"" << W - R - 8 << "\" y=\"" << T + 18 + 16 * ci
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" "
        << "fill=\"" << col << "\">" << s.name << "</text>\n";
    ci++;
  }
  out << "</svg>\n";
}

inline void svg_line_plot_file(const std::string& path, const std::string& title,
                               const std::vector<PlotSeries>& series, bool log_y)
{
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open plot file " + path);
  svg_line_plot(out, title, series, log_y);
}

// ---------------------------------------------------------------------------
// Line-oriented `key = value` config.  '#' starts a comment; blank lines
// ignored; keys and values are trimmed.
// ---------------------------------------------------------------------------

struct ConfigError : std::runtime_error {
  std::string key;
  ConfigError(const std::string& k, const std::string& msg)
      : std::runtime_error(msg), key(k)
  {
  }
};

class Config {
 public:
  static Config parse(std::istream& in)
  {
    Config cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      lineno++;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.resize(hash);
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(line, "line " + std::to_string(lineno) +
                                    ": expected 'key = value'");
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      if (key.empty())
        throw ConfigError(key, "line " + std::to_string(lineno) + ": empty key");
      cfg.values_[key] = value;
    }
    return cfg;
  }

  static Config parse_file(const std::string& path)
  {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config file " + path);
    return Config::parse(in);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& dflt)
  {
    used_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? dflt : it->second;
  }

  double get_double(const std::string& key, double dflt)
  {
    used_.insert(key);
    auto it = values_.find(key);
    if (it == values_.end()) return dflt;
    try {
      std::size_t pos = 0;
      double v = std::stod(it->second, &pos);
      if (pos != it->second.size())
        throw ConfigError(key, "malformed number for key '" + key + "'");
      if (!std::isfinite(v))
        throw ConfigError(key, "non-finite value for key '" + key + "'");
      return v;
    } catch (const std::invalid_argument&) {
      throw ConfigError(key, "malformed number for key '" + key + "'");
    }
  }

  int get_int(const std::string& key, int dflt)
  {
    double v = get_double(key, dflt);
    if (v != std::floor(v))
      throw ConfigError(key, "expected integer for key '" + key + "'");
    return static_cast<int>(v);
  }

  bool get_bool(const std::string& key, bool dflt)
  {
    std::string s = get_string(key, dflt ? "true" : "false");
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError(key, "expected boolean for key '" + key + "'");
  }

  /// Throws on the first key that no getter asked about.
  void reject_unknown_keys() const
  {
    for (const auto& [k, v] : values_)
      if (!used_.count(k)) throw ConfigError(k, "unknown config key '" + k + "'");
  }

 private:
  static std::string trim(const std::string& s)
  {
    auto a = s.find_first_not_of(" \t\r");
    auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
  }

  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

}  // namespace ftr
