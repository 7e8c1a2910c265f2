#include "ftrcontact/mortar.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace ftr;

namespace {

void add_block(Mesh& mesh, Eigen::Vector2d origin, double w, double h, int nx,
               int ny, int body, Marker bottom, Marker top)
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
/// mortar bottom at y = 1 + gap0); matching spacing 0.5 on both boundaries.
Mesh two_strip_mesh(double gap0)
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

}  // namespace

TEST_CASE("averaged normals of a flat mortar line point down")
{
  Mesh mesh = two_strip_mesh(0.1);
  DofMap map = DofMap::build(mesh);
  Eigen::VectorXd z = reference_positions(mesh, map);
  auto poly = extract_polyline(mesh, map, z, Marker::contact_mortar);
  auto nf = averaged_normals(poly);
  for (const auto& n : nf.vertex_normals) {
    CHECK(n.x() == Catch::Approx(0.0).margin(1e-14));
    CHECK(n.y() == Catch::Approx(-1.0).margin(1e-14));
  }
}

TEST_CASE("averaged normal at a right-angle corner bisects")
{
  DeformedPolyline poly;
  poly.pts = {{0.0, 1.0}, {0.0, 0.0}, {1.0, 0.0}};
  poly.vertex_ids = {0, 1, 2};
  auto nf = averaged_normals(poly);
  Eigen::Vector2d corner = nf.vertex_normals[1];
  CHECK(corner.norm() == Catch::Approx(1.0));
  CHECK(corner.x() == Catch::Approx(-std::sqrt(0.5)));
  CHECK(corner.y() == Catch::Approx(-std::sqrt(0.5)));
}

TEST_CASE("closest point projection with tie-breaking")
{
  DeformedPolyline poly;
  poly.pts = {{0.0, 0.0}, {1.0, 0.0}, {2.0, 0.0}};
  poly.vertex_ids = {0, 1, 2};
  auto nf = averaged_normals(poly);
  // the outward normal of this orientation is (0, -1), so probe below
  auto r = closest_point({0.25, -0.5}, poly, nf);
  CHECK(r.segment == 0);
  CHECK(r.t == Catch::Approx(0.25));
  CHECK(r.gap == Catch::Approx(0.5));
  // directly under the shared vertex: both segments reach it, lowest wins
  auto tie = closest_point({1.0, -0.3}, poly, nf);
  CHECK(tie.segment == 0);
  CHECK(tie.t == Catch::Approx(1.0));
}

TEST_CASE("weak gap of a uniform flat gap is exact")
{
  double g0 = 0.07;
  Mesh mesh = two_strip_mesh(g0);
  DofMap map = DofMap::build(mesh);
  Eigen::VectorXd z = reference_positions(mesh, map);
  Eigen::VectorXd c = assemble_gap(mesh, map, z);
  REQUIRE(c.size() == map.m1);
  // interior non-mortar hats whose support lies under the mortar strip:
  // c_q = g0 * h with h = 0.5
  for (int q = 0; q < map.m1; ++q) {
    double x = mesh.vertices[map.nonmortar_vertices[q]].x();
    if (x < 1.0 - 1e-9 || x > 3.0 + 1e-9) continue;
    CHECK(c[q] == Catch::Approx(g0 * 0.5).epsilon(1e-10));
  }
}

TEST_CASE("penetration flips the sign of the weak gap")
{
  double g0 = 0.07, delta = 0.12;
  Mesh mesh = two_strip_mesh(g0);
  DofMap map = DofMap::build(mesh);
  Eigen::VectorXd z = reference_positions(mesh, map);
  auto body = mesh.vertex_body();
  for (int v = 0; v < mesh.num_vertices(); ++v)
    if (body[v] == 2) z[map.dof(v, 1)] -= g0 + delta;
  Eigen::VectorXd c = assemble_gap(mesh, map, z);
  for (int q = 0; q < map.m1; ++q) {
    double x = mesh.vertices[map.nonmortar_vertices[q]].x();
    if (x < 1.0 - 1e-9 || x > 3.0 + 1e-9) continue;
    CHECK(c[q] == Catch::Approx(-delta * 0.5).epsilon(1e-10));
  }
  CHECK(c.minCoeff() < 0.0);
}

TEST_CASE("constraint Jacobian matches directional differences")
{
  Mesh mesh = two_strip_mesh(0.05);
  DofMap map = DofMap::build(mesh);
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd z = reference_positions(mesh, map);
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] += 0.01 * u(rng);

  ContactLinearisation lin = assemble_jacobian(mesh, map, z);
  Eigen::SparseMatrix<double> J = full_jacobian(lin, map.num_dofs());
  const double h = 1e-6;
  for (int s = 0; s < 5; ++s) {
    Eigen::VectorXd v(map.num_dofs());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = u(rng);
    Eigen::VectorXd fd =
        (assemble_gap(mesh, map, z + h * v) - assemble_gap(mesh, map, z - h * v)) /
        (2.0 * h);
    Eigen::VectorXd Jv = J * v;
    double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
    CHECK((Jv - fd).cwiseAbs().maxCoeff() / scale < 1e-4);
  }
}

TEST_CASE("row normals are unit vectors pointing from mortar to non-mortar")
{
  Mesh mesh = two_strip_mesh(0.05);
  DofMap map = DofMap::build(mesh);
  Eigen::VectorXd z = reference_positions(mesh, map);
  ContactLinearisation lin = assemble_jacobian(mesh, map, z);
  REQUIRE(static_cast<int>(lin.row_normal.size()) == map.m1);
  for (const auto& n : lin.row_normal) {
    CHECK(n.norm() == Catch::Approx(1.0));
    CHECK(n.y() == Catch::Approx(-1.0).margin(1e-12));
  }
}

TEST_CASE("jacobian blocks touch only contact dofs")
{
  Mesh mesh = two_strip_mesh(0.05);
  DofMap map = DofMap::build(mesh);
  Eigen::VectorXd z = reference_positions(mesh, map);
  ContactLinearisation lin = assemble_jacobian(mesh, map, z);
  CHECK(lin.D.rows() == map.m1);
  CHECK(lin.D.cols() == 2 * map.m1);
  CHECK(lin.M.cols() == 2 * map.m2);
  CHECK(lin.D.nonZeros() > 0);
  CHECK(lin.M.nonZeros() > 0);
}
