#pragma once

// Built-in 2D ironing benchmark: a stiff half-disc ("pipe") pressed
// vertically into a soft block and then swiped horizontally.  The block top
// is the non-mortar boundary, the curved pipe underside the mortar boundary.

#include "ftrcontact/filter.hpp"

namespace ftr {

struct IroningParams {
  double block_w = 8.0, block_h = 2.0;
  int block_nx = 24, block_ny = 6;
  double radius = 1.0;
  // standoff 1.05 over the block top: pressing by 1.4 gives an interference
  // of 0.35, deep enough for a wide contact zone yet shallow enough that the
  // first linearised step can resolve it without folding boundary elements
  Eigen::Vector2d center{2.5, 4.05};
  int n_angular = 12, n_radial = 3;
  double press = 1.4;   // phase 1: vertical Dirichlet displacement
  double sweep = 2.1;   // phase 2: horizontal Dirichlet displacement
  MaterialParams block_material{0.75, 0.375};
  MaterialParams pipe_material{450.0, 225.0};
};

/// Coarse two-body mesh: structured block grid (body 1) and a half-disc with
/// radial layers plus a centre fan (body 2).  Markers: block bottom
/// Dirichlet, block top non-mortar, block sides Neumann, pipe flat top
/// Dirichlet, pipe curved underside mortar.
inline Mesh ironing_coarse_mesh(const IroningParams& p = {})
{
  Mesh mesh;
  const int nx = p.block_nx, ny = p.block_ny;
  auto bidx = [&](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      mesh.vertices.emplace_back(p.block_w * i / nx, p.block_h * j / ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      mesh.triangles.push_back({bidx(i, j), bidx(i + 1, j), bidx(i + 1, j + 1)});
      mesh.triangles.push_back({bidx(i, j), bidx(i + 1, j + 1), bidx(i, j + 1)});
      mesh.triangle_body.push_back(1);
      mesh.triangle_body.push_back(1);
    }
  for (int i = 0; i < nx; ++i) {
    mesh.segments.push_back({bidx(i, 0), bidx(i + 1, 0), Marker::dirichlet, 1});
    mesh.segments.push_back(
        {bidx(i, ny), bidx(i + 1, ny), Marker::contact_nonmortar, 1});
  }
  for (int j = 0; j < ny; ++j) {
    mesh.segments.push_back({bidx(0, j), bidx(0, j + 1), Marker::neumann, 1});
    mesh.segments.push_back({bidx(nx, j), bidx(nx, j + 1), Marker::neumann, 1});
  }

  const int na = p.n_angular, nr = p.n_radial;
  const int centre = mesh.num_vertices();
  mesh.vertices.push_back(p.center);
  // ring(k)[i]: radius k*r/nr, angle pi + i*pi/na (lower half-plane)
  auto ring = [&](int k, int i) { return centre + 1 + (k - 1) * (na + 1) + i; };
  for (int k = 1; k <= nr; ++k) {
    double r = p.radius * k / nr;
    for (int i = 0; i <= na; ++i) {
      double ang = M_PI + M_PI * i / na;
      mesh.vertices.push_back(p.center +
                              r * Eigen::Vector2d(std::cos(ang), std::sin(ang)));
    }
  }
  for (int i = 0; i < na; ++i) {
    mesh.triangles.push_back({centre, ring(1, i), ring(1, i + 1)});
    mesh.triangle_body.push_back(2);
  }
  for (int k = 1; k < nr; ++k)
    for (int i = 0; i < na; ++i) {
      mesh.triangles.push_back({ring(k, i), ring(k + 1, i), ring(k + 1, i + 1)});
      mesh.triangles.push_back({ring(k, i), ring(k + 1, i + 1), ring(k, i + 1)});
      mesh.triangle_body.push_back(2);
      mesh.triangle_body.push_back(2);
    }
  for (int i = 0; i < na; ++i)
    mesh.segments.push_back(
        {ring(nr, i), ring(nr, i + 1), Marker::contact_mortar, 2});
  // flat top: the radial edges along angles pi and 2 pi
  mesh.segments.push_back({centre, ring(1, 0), Marker::dirichlet, 2});
  mesh.segments.push_back({centre, ring(1, na), Marker::dirichlet, 2});
  for (int k = 1; k < nr; ++k) {
    mesh.segments.push_back({ring(k, 0), ring(k + 1, 0), Marker::dirichlet, 2});
    mesh.segments.push_back({ring(k, na), ring(k + 1, na), Marker::dirichlet, 2});
  }

  fix_orientation(mesh);
  validate(mesh);
  return mesh;
}

/// Benchmark problem at one refinement level, with phase-dependent Dirichlet
/// data and rigid-translation warm starts for the pipe body.
struct IroningSetup {
  IroningParams params;
  MeshHierarchy hierarchy;
  DofMap map;
  Problem problem;                 // mesh pointer into `hierarchy`
  std::vector<int> dirichlet_vertices;

  static IroningSetup build(int refinements, const IroningParams& p = {})
  {
    IroningSetup s;
    s.params = p;
    s.hierarchy = MeshHierarchy::build(ironing_coarse_mesh(p), refinements);
    const Mesh& mesh = s.hierarchy.finest();
    s.map = DofMap::build(mesh);
    s.problem.mesh = &s.hierarchy.finest();
    s.problem.map = s.map;
    s.problem.materials[1] = p.block_material;
    s.problem.materials[2] = p.pipe_material;
    s.problem.b = load_vector(mesh, s.map, BodyLoads{});
    s.problem.transfers = dof_prolongations(s.hierarchy, 2);
    s.problem.h1 = h1_metric(mesh, s.map);

    std::set<int> dverts;
    for (const auto& seg : mesh.segments)
      if (seg.marker == Marker::dirichlet) {
        dverts.insert(seg.a);
        dverts.insert(seg.b);
      }
    s.dirichlet_vertices.assign(dverts.begin(), dverts.end());
    for (int v : s.dirichlet_vertices)
      for (int c = 0; c < 2; ++c)
        s.problem.dirichlet.fixed_dofs.push_back(s.map.dof(v, c));
    s.set_phase(1);
    return s;
  }

  /// Cumulative Dirichlet translation of the pipe at the end of a phase.
  Eigen::Vector2d phase_translation(int phase) const
  {
    Eigen::Vector2d t(0.0, -params.press);
    if (phase >= 2) t.x() += params.sweep;
    return t;
  }

  void set_phase(int phase)
  {
    const Mesh& mesh = hierarchy.finest();
    auto body = mesh.vertex_body();
    Eigen::Vector2d t = phase_translation(phase);
    problem.dirichlet.values.resize(
        static_cast<Eigen::Index>(problem.dirichlet.fixed_dofs.size()));
    std::size_t k = 0;
    for (int v : dirichlet_vertices)
      for (int c = 0; c < 2; ++c, ++k)
        problem.dirichlet.values[static_cast<Eigen::Index>(k)] =
            mesh.vertices[v][c] + (body[v] == 2 ? t[c] : 0.0);
  }

  /// Warm start: the whole pipe body rigidly translated by the phase's
  /// Dirichlet increment (orientation-preserving; penetration is handled by
  /// the filter method).
  Eigen::VectorXd initial_state(int phase,
                                const Eigen::VectorXd* previous = nullptr) const
  {
    const Mesh& mesh = hierarchy.finest();
    auto body = mesh.vertex_body();
    Eigen::VectorXd z;
    Eigen::Vector2d t;
    if (phase <= 1 || previous == nullptr) {
      z = reference_positions(mesh, map);
      t = phase_translation(phase);
    } else {
      z = *previous;
      t = phase_translation(phase) - phase_translation(phase - 1);
    }
    for (int v = 0; v < mesh.num_vertices(); ++v)
      if (body[v] == 2)
        for (int c = 0; c < 2; ++c) z[map.dof(v, c)] += t[c];
    return z;
  }
};

/// Runs one benchmark phase; `previous` is the converged state of the phase
/// before (required for phase 2 warm starts across a single setup).
inline FtrResult solve_ironing_phase(IroningSetup& setup, int phase,
                                     const Eigen::VectorXd* previous,
                                     const FtrConfig& cfg,
                                     std::ostream* log = nullptr)
{
  setup.set_phase(phase);
  Eigen::VectorXd z0 = setup.initial_state(phase, previous);
  return ftr_solve(setup.problem, z0, cfg, log);
}

}  // namespace ftr
