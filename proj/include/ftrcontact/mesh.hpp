#pragma once

// Simplicial 2D meshes for two disjoint bodies, with boundary markers,
// uniform refinement hierarchies and P1 degree-of-freedom maps.

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace ftr {

enum class Marker { dirichlet, neumann, contact_nonmortar, contact_mortar };

inline const char* to_string(Marker m)
{
  switch (m) {
    case Marker::dirichlet: return "dirichlet";
    case Marker::neumann: return "neumann";
    case Marker::contact_nonmortar: return "contact_nonmortar";
    case Marker::contact_mortar: return "contact_mortar";
  }
  return "?";
}

struct MeshError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Two bodies stored in one mesh; degrees of freedom are numbered globally.
struct Mesh {
  std::vector<Eigen::Vector2d> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> triangle_body;  // body id per triangle (1 or 2)

  struct Segment {
    int a, b;  // oriented so that the owning triangle lies on the left
    Marker marker;
    int body;
  };
  std::vector<Segment> segments;

  int num_vertices() const { return static_cast<int>(vertices.size()); }

  double reference_area(int t) const
  {
    const auto& tri = triangles[t];
    Eigen::Vector2d e1 = vertices[tri[1]] - vertices[tri[0]];
    Eigen::Vector2d e2 = vertices[tri[2]] - vertices[tri[0]];
    return 0.5 * (e1.x() * e2.y() - e1.y() * e2.x());
  }

  /// Diameter of the bounding box; used as the geometric length scale.
  double scale() const
  {
    Eigen::Vector2d lo = vertices.front(), hi = lo;
    for (const auto& v : vertices) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
    return (hi - lo).norm();
  }

  std::vector<int> vertex_body() const
  {
    std::vector<int> body(vertices.size(), 0);
    for (std::size_t t = 0; t < triangles.size(); ++t)
      for (int v : triangles[t]) body[v] = triangle_body[t];
    return body;
  }
};

/// Flips negatively oriented triangles and orients boundary segments so that
/// the adjacent triangle lies on their left.  Throws on degenerate elements.
inline void fix_orientation(Mesh& mesh)
{
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    double a = mesh.reference_area(static_cast<int>(t));
    if (a == 0.0) throw MeshError("degenerate triangle " + std::to_string(t));
    if (a < 0.0) std::swap(mesh.triangles[t][1], mesh.triangles[t][2]);
  }
  // directed edge -> present in some triangle
  std::map<std::pair<int, int>, bool> directed;
  for (const auto& tri : mesh.triangles)
    for (int e = 0; e < 3; ++e)
      directed[{tri[e], tri[(e + 1) % 3]}] = true;
  for (auto& s : mesh.segments) {
    if (directed.count({s.a, s.b})) continue;
    if (directed.count({s.b, s.a})) {
      std::swap(s.a, s.b);
      continue;
    }
    throw MeshError("boundary segment not matching any triangle edge");
  }
}

inline void validate(const Mesh& mesh)
{
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
    if (mesh.reference_area(static_cast<int>(t)) <= 0.0)
      throw MeshError("non-positive triangle orientation");
  int nm_body = 0, m_body = 0;
  std::array<bool, 3> dirichlet_seen{false, false, false};
  for (const auto& s : mesh.segments) {
    if (s.marker == Marker::contact_nonmortar) {
      if (nm_body == 0) nm_body = s.body;
      if (nm_body != s.body) throw MeshError("non-mortar marker on both bodies");
    }
    if (s.marker == Marker::contact_mortar) {
      if (m_body == 0) m_body = s.body;
      if (m_body != s.body) throw MeshError("mortar marker on both bodies");
    }
    if (s.marker == Marker::dirichlet && s.body >= 1 && s.body <= 2)
      dirichlet_seen[s.body] = true;
  }
  if (nm_body != 0 && m_body != 0 && nm_body == m_body)
    throw MeshError("contact markers must live on distinct bodies");
  for (int b = 1; b <= 2; ++b) {
    bool has_body = false;
    for (int tb : mesh.triangle_body) has_body |= (tb == b);
    if (has_body && !dirichlet_seen[b])
      throw MeshError("body " + std::to_string(b) + " has no Dirichlet segment");
  }
}

/// Splits every triangle into four; boundary markers are inherited.
/// If `prolongation` is non-null it receives the scalar vertex interpolation
/// matrix (fine x coarse).
inline Mesh refine_uniform(const Mesh& coarse,
                           Eigen::SparseMatrix<double>* prolongation = nullptr)
{
  Mesh fine;
  fine.vertices = coarse.vertices;
  std::map<std::pair<int, int>, int> midpoint;
  auto mid = [&](int a, int b) {
    auto key = std::minmax(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    int idx = fine.num_vertices();
    fine.vertices.push_back(0.5 * (coarse.vertices[a] + coarse.vertices[b]));
    midpoint.emplace(key, idx);
    return idx;
  };
  for (std::size_t t = 0; t < coarse.triangles.size(); ++t) {
    const auto& tri = coarse.triangles[t];
    int m01 = mid(tri[0], tri[1]);
    int m12 = mid(tri[1], tri[2]);
    int m20 = mid(tri[2], tri[0]);
    int body = coarse.triangle_body[t];
    fine.triangles.push_back({tri[0], m01, m20});
    fine.triangles.push_back({m01, tri[1], m12});
    fine.triangles.push_back({m20, m12, tri[2]});
    fine.triangles.push_back({m01, m12, m20});
    for (int k = 0; k < 4; ++k) fine.triangle_body.push_back(body);
  }
  for (const auto& s : coarse.segments) {
    int m = mid(s.a, s.b);
    fine.segments.push_back({s.a, m, s.marker, s.body});
    fine.segments.push_back({m, s.b, s.marker, s.body});
  }
  if (prolongation) {
    std::vector<Eigen::Triplet<double>> trip;
    for (int v = 0; v < coarse.num_vertices(); ++v) trip.emplace_back(v, v, 1.0);
    for (const auto& [edge, m] : midpoint) {
      trip.emplace_back(m, edge.first, 0.5);
      trip.emplace_back(m, edge.second, 0.5);
    }
    prolongation->resize(fine.num_vertices(), coarse.num_vertices());
    prolongation->setFromTriplets(trip.begin(), trip.end());
  }
  return fine;
}

struct MeshHierarchy {
  std::vector<Mesh> levels;  // coarse -> fine
  std::vector<Eigen::SparseMatrix<double>> vertex_prolongations;  // [l]: l -> l+1

  const Mesh& finest() const { return levels.back(); }

  static MeshHierarchy build(Mesh coarse, int refinements)
  {
    MeshHierarchy h;
    h.levels.push_back(std::move(coarse));
    for (int r = 0; r < refinements; ++r) {
      Eigen::SparseMatrix<double> P;
      h.levels.push_back(refine_uniform(h.levels.back(), &P));
      h.vertex_prolongations.push_back(std::move(P));
    }
    return h;
  }
};

/// Chains the boundary segments carrying `marker` into an ordered open (or
/// closed) polyline of vertex indices.  Returns an empty list if the marker
/// is absent.
inline std::vector<int> boundary_polyline(const Mesh& mesh, Marker marker)
{
  std::map<int, int> next;  // a -> b along the oriented segments
  std::map<int, int> indeg;
  for (const auto& s : mesh.segments) {
    if (s.marker != marker) continue;
    if (next.count(s.a)) throw MeshError("boundary is not a simple polyline");
    next[s.a] = s.b;
    indeg[s.b]++;
  }
  if (next.empty()) return {};
  int start = -1;
  for (const auto& [a, b] : next)
    if (!indeg.count(a)) start = a;
  if (start < 0) start = next.begin()->first;  // closed loop
  std::vector<int> chain{start};
  int cur = start;
  while (next.count(cur)) {
    cur = next[cur];
    chain.push_back(cur);
    if (cur == start) break;
    if (chain.size() > next.size() + 1) throw MeshError("boundary chain does not close");
  }
  if (chain.size() != next.size() + 1)
    throw MeshError("boundary segments form more than one polyline");
  return chain;
}

/// Block-vector ordering (u^1_C, u^2_C, u^I) with block size d per vertex.
/// Contact slots follow the polyline order of the respective boundary.
struct DofMap {
  int d = 2;
  int m1 = 0, m2 = 0, n = 0;
  std::vector<int> vertex_slot;            // mesh vertex -> slot
  std::vector<int> slot_vertex;            // slot -> mesh vertex
  std::vector<int> nonmortar_vertices;     // slots [0, m1)
  std::vector<int> mortar_vertices;        // slots [m1, m1+m2)

  int dof(int vertex, int comp) const { return vertex_slot[vertex] * d + comp; }
  int num_dofs() const { return n * d; }

  static DofMap build(const Mesh& mesh, int d = 2)
  {
    DofMap map;
    map.d = d;
    map.n = mesh.num_vertices();
    map.nonmortar_vertices = boundary_polyline(mesh, Marker::contact_nonmortar);
    map.mortar_vertices = boundary_polyline(mesh, Marker::contact_mortar);
    map.m1 = static_cast<int>(map.nonmortar_vertices.size());
    map.m2 = static_cast<int>(map.mortar_vertices.size());
    map.vertex_slot.assign(map.n, -1);
    int slot = 0;
    for (int v : map.nonmortar_vertices) map.vertex_slot[v] = slot++;
    for (int v : map.mortar_vertices) map.vertex_slot[v] = slot++;
    for (int v = 0; v < map.n; ++v)
      if (map.vertex_slot[v] < 0) map.vertex_slot[v] = slot++;
    map.slot_vertex.assign(map.n, -1);
    for (int v = 0; v < map.n; ++v) map.slot_vertex[map.vertex_slot[v]] = v;
    return map;
  }
};

/// Expands a scalar vertex prolongation into the block dof ordering of the
/// two levels.
inline Eigen::SparseMatrix<double> dof_prolongation(
    const Eigen::SparseMatrix<double>& vertexP, const DofMap& coarse,
    const DofMap& fine)
{
  std::vector<Eigen::Triplet<double>> trip;
  for (int j = 0; j < vertexP.outerSize(); ++j)
    for (Eigen::SparseMatrix<double>::InnerIterator it(vertexP, j); it; ++it)
      for (int c = 0; c < fine.d; ++c)
        trip.emplace_back(fine.dof(static_cast<int>(it.row()), c),
                          coarse.dof(static_cast<int>(it.col()), c), it.value());
  Eigen::SparseMatrix<double> P(fine.num_dofs(), coarse.num_dofs());
  P.setFromTriplets(trip.begin(), trip.end());
  return P;
}

inline std::vector<Eigen::SparseMatrix<double>> dof_prolongations(
    const MeshHierarchy& h, int d = 2)
{
  std::vector<Eigen::SparseMatrix<double>> out;
  for (std::size_t l = 0; l + 1 < h.levels.size(); ++l)
    out.push_back(dof_prolongation(h.vertex_prolongations[l],
                                   DofMap::build(h.levels[l], d),
                                   DofMap::build(h.levels[l + 1], d)));
  return out;
}

/// Deformed positions of a marked boundary, in polyline order.  `z` holds
/// deformed vertex positions in dof ordering.
inline std::vector<Eigen::Vector2d> deformed_boundary(const Mesh& mesh,
                                                      const DofMap& map,
                                                      const Eigen::VectorXd& z,
                                                      Marker marker)
{
  std::vector<Eigen::Vector2d> pts;
  for (int v : boundary_polyline(mesh, marker))
    pts.emplace_back(z[map.dof(v, 0)], z[map.dof(v, 1)]);
  return pts;
}

/// Reference positions as a dof-ordered block vector (the identity deformation).
inline Eigen::VectorXd reference_positions(const Mesh& mesh, const DofMap& map)
{
  Eigen::VectorXd z(map.num_dofs());
  for (int v = 0; v < mesh.num_vertices(); ++v)
    for (int c = 0; c < map.d; ++c) z[map.dof(v, c)] = mesh.vertices[v][c];
  return z;
}

}  // namespace ftr
