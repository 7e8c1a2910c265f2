#include "ftrcontact/filter.hpp"

#include "fixtures.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace ftr;

TEST_CASE("infeasibility measure uses only the negative gap part")
{
  Eigen::VectorXd c(4);
  c << 1.0, -3.0, 0.0, -4.0;
  CHECK(theta_measure(c) == Catch::Approx(4.0));
  c << 0.5, -0.2, -0.7, 1.0;
  CHECK(theta_measure(c) == Catch::Approx(0.7));
  c << 1.0, 2.0, 0.0, 0.5;
  CHECK(theta_measure(c) == 0.0);
  c << 1.0, 2.0, 0.0, -1e-12;
  CHECK(theta_measure(c) == 1e-12);
}

TEST_CASE("filter acceptance, domination and pruning truth table")
{
  const double xi = 0.1;

  // empty filter accepts anything
  {
    Filter f(xi);
    CHECK(f.is_acceptable(1e9, 1e9));                                   // 1
  }

  Filter f(xi);
  f.add_entry(1.0, 1.0);

  // sufficient objective decrease: J <= J_i - xi * theta
  CHECK(f.is_acceptable(0.5, 2.0));                                     // 2
  CHECK(f.is_acceptable(0.8, 2.0));                                     // 3 boundary
  CHECK_FALSE(f.is_acceptable(0.81, 2.0));                              // 4
  // sufficient infeasibility decrease: theta <= (1 - xi) * theta_i
  CHECK(f.is_acceptable(2.0, 0.5));                                     // 5
  CHECK(f.is_acceptable(2.0, 0.9));                                     // 6 boundary
  CHECK_FALSE(f.is_acceptable(2.0, 0.91));                              // 7
  // both margins fail
  CHECK_FALSE(f.is_acceptable(2.0, 2.0));                               // 8
  // the entry itself is not acceptable (margins are strict improvements)
  CHECK_FALSE(f.is_acceptable(1.0, 1.0));                               // 9
  // J margin met exactly at theta = 1: J <= 1 - 0.1
  CHECK(f.is_acceptable(0.9, 1.0));                                     // 10
  CHECK_FALSE(f.is_acceptable(0.95, 1.0));                              // 11

  // two incomparable entries: must clear every entry
  f.add_entry(0.5, 2.0);
  CHECK(f.entries().size() == 2);                                       // 12
  CHECK(f.is_acceptable(0.3, 1.5));  // J-margin against both            13
  CHECK_FALSE(f.is_acceptable(0.45, 1.9));  // fails against (0.5, 2)    14
  CHECK(f.is_acceptable(10.0, 0.8));  // theta-margin against both       15

  // a new entry prunes everything it dominates
  f.add_entry(0.4, 0.5);
  CHECK(f.entries().size() == 1);                                       // 16
  CHECK(f.entries()[0].J == Catch::Approx(0.4));                        // 17

  // incomparable entries are kept
  f.add_entry(0.1, 3.0);
  CHECK(f.entries().size() == 2);                                       // 18

  CHECK_THROWS_AS(f.add_entry(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("quality ratio and its orientation sentinel")
{
  CHECK(rho_measure(2.0, 1.0, 0.5) == Catch::Approx(2.0));
  CHECK(rho_measure(2.0, 2.2, 0.5) == Catch::Approx(-0.4));
  CHECK(rho_measure(2.0, std::numeric_limits<double>::infinity(), 0.5) ==
        -std::numeric_limits<double>::infinity());
}

TEST_CASE("criticality measure solves the capped coordinate LP")
{
  DofMap map;
  map.d = 2;
  map.m1 = 1;
  map.m2 = 0;
  map.n = 3;
  std::vector<char> fixed(6, 0);
  fixed[5] = 1;

  Eigen::VectorXd fT(6), c(1);
  // dof 0: normal component of the non-mortar vertex
  fT << -2.0, 1.0, -0.5, 0.25, 3.0, 100.0;
  c << 0.3;
  // d = (min(1, 0.3), -1, 1, -1, -1, 0):
  // |(-2)(0.3) + (1)(-1) + (-0.5)(1) + (0.25)(-1) + 3(-1) + 0|
  CHECK(chi_measure(fT, c, map, fixed) == Catch::Approx(0.6 + 1.0 + 0.5 + 0.25 + 3.0));
  // large gap: the normal cap saturates at 1
  c << 5.0;
  CHECK(chi_measure(fT, c, map, fixed) == Catch::Approx(2.0 + 1.0 + 0.5 + 0.25 + 3.0));
  // negative gap caps the normal direction below zero; that term now fights
  // the others inside the sum
  c << -0.4;
  CHECK(chi_measure(fT, c, map, fixed) ==
        Catch::Approx(std::abs(-2.0 * -0.4 - 1.0 - 0.5 - 0.25 - 3.0)).epsilon(1e-12));
}

namespace {

Problem strip_problem(const Mesh& mesh, const DofMap& map, double press)
{
  Problem pr;
  pr.mesh = &mesh;
  pr.map = map;
  pr.materials[1] = {1.0, 0.5};
  pr.materials[2] = {1.0, 0.5};
  pr.b = load_vector(mesh, map, BodyLoads{});
  pr.h1 = h1_metric(mesh, map);
  auto body = mesh.vertex_body();
  std::set<int> dverts;
  for (const auto& s : mesh.segments)
    if (s.marker == Marker::dirichlet) {
      dverts.insert(s.a);
      dverts.insert(s.b);
    }
  std::vector<double> vals;
  for (int v : dverts)
    for (int c = 0; c < 2; ++c) {
      pr.dirichlet.fixed_dofs.push_back(map.dof(v, c));
      double val = mesh.vertices[v][c];
      if (body[v] == 2 && c == 1) val -= press;
      vals.push_back(val);
    }
  pr.dirichlet.values =
      Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
  return pr;
}

}  // namespace

TEST_CASE("toy two-strip contact problem converges to a feasible critical point")
{
  Mesh mesh = testfix::two_strip_mesh(0.05);
  DofMap map = DofMap::build(mesh);
  Problem pr = strip_problem(mesh, map, 0.15);  // 0.1 units of interference

  FtrConfig cfg;
  cfg.max_outer = 120;
  Eigen::VectorXd z0 = reference_positions(mesh, map);
  auto body = mesh.vertex_body();
  for (int v = 0; v < mesh.num_vertices(); ++v)
    if (body[v] == 2) z0[map.dof(v, 1)] -= 0.15;

  FtrResult res = ftr_solve(pr, z0, cfg);
  REQUIRE(res.status == FtrStatus::converged);
  CHECK(res.theta < 1e-8);
  Eigen::VectorXd c = assemble_gap(mesh, map, res.z);
  CHECK(c.minCoeff() >= -1e-8);
  CHECK(c.minCoeff() < 0.02);  // contact is actually active
  CHECK(std::isfinite(res.J));
  CHECK(res.multiplier_sign_violations == 0);
}

TEST_CASE("feasibility restoration recovers from deep penetration")
{
  Mesh mesh = testfix::two_strip_mesh(0.05);
  DofMap map = DofMap::build(mesh);
  Problem pr = strip_problem(mesh, map, 0.15);

  Eigen::VectorXd z = reference_positions(mesh, map);
  auto body = mesh.vertex_body();
  for (int v = 0; v < mesh.num_vertices(); ++v)
    if (body[v] == 2) z[map.dof(v, 1)] -= 1.3;  // far past the admissible radius

  Eigen::VectorXd c0 = assemble_gap(mesh, map, z);
  REQUIRE(c0.minCoeff() < -0.5);
  FtrConfig cfg;
  Filter filter(cfg.xi);
  filter.add_entry(energy(mesh, map, z, pr.materials, pr.b), theta_measure(c0));
  REQUIRE(restore_feasibility(pr, z, filter, cfg));
  Eigen::VectorXd c1 = assemble_gap(mesh, map, z);
  CHECK(c1.minCoeff() >= -cfg.Delta0);
}
