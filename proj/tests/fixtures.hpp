#pragma once

// Shared mesh fixtures for the solver test suites.

#include "ftrcontact/mortar.hpp"

#include <random>

namespace ftr::testfix {

inline void add_block(Mesh& mesh, Eigen::Vector2d origin, double w, double h,
                      int nx, int ny, int body, Marker bottom, Marker top)
{
  int base = mesh.num_vertices();
  auto idx = [&](int i, int j) { return base + j * (nx + 1) + i; };
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      mesh.vertices.emplace_back(origin.x() + w * i / nx, origin.y() + h * j / ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      mesh.triangles.push_back({idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)});
      mesh.triangles.push_back({idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)});
      mesh.triangle_body.push_back(body);
      mesh.triangle_body.push_back(body);
    }
  for (int i = 0; i < nx; ++i) {
    mesh.segments.push_back({idx(i, 0), idx(i + 1, 0), bottom, body});
    mesh.segments.push_back({idx(i, ny), idx(i + 1, ny), top, body});
  }
  for (int j = 0; j < ny; ++j) {
    mesh.segments.push_back({idx(0, j), idx(0, j + 1), Marker::neumann, body});
    mesh.segments.push_back({idx(nx, j), idx(nx, j + 1), Marker::neumann, body});
  }
}

/// Flat strip (body 1, non-mortar top at y = 1) under a flat strip (body 2,
/// mortar bottom at y = 1 + gap0); spacing 0.5 on both contact boundaries.
inline Mesh two_strip_mesh(double gap0)
{
  Mesh mesh;
  add_block(mesh, {0.0, 0.0}, 4.0, 1.0, 8, 2, 1, Marker::dirichlet,
            Marker::contact_nonmortar);
  add_block(mesh, {0.5, 1.0 + gap0}, 3.0, 1.0, 6, 2, 2, Marker::contact_mortar,
            Marker::dirichlet);
  fix_orientation(mesh);
  validate(mesh);
  return mesh;
}

/// Slightly perturbed configuration of the two-strip geometry; the contact
/// boundaries stay close to flat, so all projections are well defined.
inline Eigen::VectorXd random_contact_state(const Mesh& mesh, const DofMap& map,
                                            std::mt19937& rng, double amp = 0.02)
{
  std::uniform_real_distribution<double> u(-amp, amp);
  Eigen::VectorXd z = reference_positions(mesh, map);
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] += u(rng);
  return z;
}

}  // namespace ftr::testfix
