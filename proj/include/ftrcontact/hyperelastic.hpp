#pragma once

// Neo-Hookean energy, gradient and Hessian assembly on P1 triangles,
// Dirichlet handling and external load vectors.
//
// The strain energy density is
//   W(F) = lambda/4 (det F^2 - 1) - (lambda/2 + mu) log det F + mu tr E(F),
// with E(F) = 1/2 (F^T F - I).  F is constant per element, so a one-point
// quadrature rule is exact.

#include "ftrcontact/mesh.hpp"

#include <cmath>
#include <limits>
#include <set>

namespace ftr {

struct MaterialParams {
  double lambda = 0.0;  // first Lame parameter, >= 0
  double mu = 0.0;      // second Lame parameter, > 0
};

/// Material per body id (index 1 and 2 used).
using Materials = std::array<MaterialParams, 3>;

struct BodyLoads {
  // constant volume force and Neumann traction per body id
  std::array<Eigen::Vector2d, 3> volume_force{Eigen::Vector2d::Zero(),
                                              Eigen::Vector2d::Zero(),
                                              Eigen::Vector2d::Zero()};
  std::array<Eigen::Vector2d, 3> traction{Eigen::Vector2d::Zero(),
                                          Eigen::Vector2d::Zero(),
                                          Eigen::Vector2d::Zero()};
};

struct DirichletData {
  std::vector<int> fixed_dofs;    // dof indices
  Eigen::VectorXd values;         // prescribed deformed positions, same length

  std::vector<char> mask(int ndofs) const
  {
    std::vector<char> m(ndofs, 0);
    for (int i : fixed_dofs) m[i] = 1;
    return m;
  }

  void apply(Eigen::VectorXd& z) const
  {
    for (std::size_t i = 0; i < fixed_dofs.size(); ++i)
      z[fixed_dofs[i]] = values[static_cast<Eigen::Index>(i)];
  }
};

inline double neo_hookean_density(const Eigen::Matrix2d& F,
                                  const MaterialParams& mat)
{
  double J = F.determinant();
  if (J <= 0.0) return std::numeric_limits<double>::infinity();
  double trE = 0.5 * (F.squaredNorm() - 2.0);
  return 0.25 * mat.lambda * (J * J - 1.0) -
         (0.5 * mat.lambda + mat.mu) * std::log(J) + mat.mu * trE;
}

/// First Piola-Kirchhoff stress dW/dF.
inline Eigen::Matrix2d neo_hookean_stress(const Eigen::Matrix2d& F,
                                          const MaterialParams& mat)
{
  double J = F.determinant();
  Eigen::Matrix2d Finv = F.inverse();
  Eigen::Matrix2d FinvT = Finv.transpose();
  double c = 0.5 * mat.lambda * J * J - (0.5 * mat.lambda + mat.mu);
  return c * FinvT + mat.mu * F;
}

/// Directional derivative of the stress, dP(F)[dF].
inline Eigen::Matrix2d neo_hookean_stress_derivative(const Eigen::Matrix2d& F,
                                                     const Eigen::Matrix2d& dF,
                                                     const MaterialParams& mat)
{
  double J = F.determinant();
  Eigen::Matrix2d Finv = F.inverse();
  Eigen::Matrix2d FinvT = Finv.transpose();
  double c = 0.5 * mat.lambda * J * J - (0.5 * mat.lambda + mat.mu);
  double trFinvdF = (Finv * dF).trace();
  return mat.lambda * J * J * trFinvdF * FinvT -
         c * (FinvT * dF.transpose() * FinvT) + mat.mu * dF;
}

namespace detail {

// Deformation gradient and shape-function gradients h_a of one triangle.
struct ElementGeometry {
  Eigen::Matrix2d F;
  std::array<Eigen::Vector2d, 3> h;  // dF/d(x_a)_i = e_i h_a^T
  double area;
};

inline ElementGeometry element_geometry(const Mesh& mesh, const DofMap& map,
                                        const Eigen::VectorXd& z, int t)
{
  const auto& tri = mesh.triangles[t];
  Eigen::Matrix2d Dm;
  Dm.col(0) = mesh.vertices[tri[1]] - mesh.vertices[tri[0]];
  Dm.col(1) = mesh.vertices[tri[2]] - mesh.vertices[tri[0]];
  auto pos = [&](int a) {
    return Eigen::Vector2d(z[map.dof(tri[a], 0)], z[map.dof(tri[a], 1)]);
  };
  Eigen::Matrix2d Ds;
  Ds.col(0) = pos(1) - pos(0);
  Ds.col(1) = pos(2) - pos(0);
  Eigen::Matrix2d Bm = Dm.inverse();
  ElementGeometry g;
  g.F = Ds * Bm;
  g.area = 0.5 * Dm.determinant();
  const Eigen::Vector2d s0(-1.0, -1.0), s1(1.0, 0.0), s2(0.0, 1.0);
  g.h = {Bm.transpose() * s0, Bm.transpose() * s1, Bm.transpose() * s2};
  return g;
}

}  // namespace detail

/// External load vector b, (b_p)_i = int f e_i psi_p dx + int t e_i psi_p ds.
inline Eigen::VectorXd load_vector(const Mesh& mesh, const DofMap& map,
                                   const BodyLoads& loads)
{
  Eigen::VectorXd b = Eigen::VectorXd::Zero(map.num_dofs());
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    double area = mesh.reference_area(static_cast<int>(t));
    const Eigen::Vector2d& f = loads.volume_force[mesh.triangle_body[t]];
    for (int v : mesh.triangles[t])
      for (int c = 0; c < 2; ++c) b[map.dof(v, c)] += f[c] * area / 3.0;
  }
  for (const auto& s : mesh.segments) {
    if (s.marker != Marker::neumann) continue;
    double len = (mesh.vertices[s.b] - mesh.vertices[s.a]).norm();
    const Eigen::Vector2d& tr = loads.traction[s.body];
    for (int c = 0; c < 2; ++c) {
      b[map.dof(s.a, c)] += tr[c] * len / 2.0;
      b[map.dof(s.b, c)] += tr[c] * len / 2.0;
    }
  }
  return b;
}

/// Total energy J(z) = sum_T area W(F) - b^T z.  Returns +infinity if any
/// element violates det F > 0; callers compare against that value.
inline double energy(const Mesh& mesh, const DofMap& map,
                     const Eigen::VectorXd& z, const Materials& mats,
                     const Eigen::VectorXd& b)
{
  double e = 0.0;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    auto g = detail::element_geometry(mesh, map, z, static_cast<int>(t));
    double w = neo_hookean_density(g.F, mats[mesh.triangle_body[t]]);
    if (!std::isfinite(w)) return std::numeric_limits<double>::infinity();
    e += g.area * w;
  }
  return e - b.dot(z);
}

struct OrientationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Assembled gradient with Dirichlet rows zeroed.
inline Eigen::VectorXd gradient(const Mesh& mesh, const DofMap& map,
                                const Eigen::VectorXd& z, const Materials& mats,
                                const Eigen::VectorXd& b,
                                const DirichletData& dirichlet)
{
  Eigen::VectorXd grad = -b;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    auto g = detail::element_geometry(mesh, map, z, static_cast<int>(t));
    if (g.F.determinant() <= 0.0)
      throw OrientationError("element " + std::to_string(t) + " inverted");
    Eigen::Matrix2d P = neo_hookean_stress(g.F, mats[mesh.triangle_body[t]]);
    const auto& tri = mesh.triangles[t];
    for (int a = 0; a < 3; ++a) {
      Eigen::Vector2d ga = g.area * (P * g.h[a]);
      for (int c = 0; c < 2; ++c) grad[map.dof(tri[a], c)] += ga[c];
    }
  }
  for (int i : dirichlet.fixed_dofs) grad[i] = 0.0;
  return grad;
}

/// Assembled Hessian; Dirichlet rows and columns are replaced by identity.
inline Eigen::SparseMatrix<double> hessian(const Mesh& mesh, const DofMap& map,
                                           const Eigen::VectorXd& z,
                                           const Materials& mats,
                                           const DirichletData& dirichlet)
{
  auto fixed = dirichlet.mask(map.num_dofs());
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(mesh.triangles.size() * 36 + dirichlet.fixed_dofs.size());
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    auto g = detail::element_geometry(mesh, map, z, static_cast<int>(t));
    if (g.F.determinant() <= 0.0)
      throw OrientationError("element " + std::to_string(t) + " inverted");
    const MaterialParams& mat = mats[mesh.triangle_body[t]];
    const auto& tri = mesh.triangles[t];
    for (int b2 = 0; b2 < 3; ++b2)
      for (int j = 0; j < 2; ++j) {
        Eigen::Matrix2d dF = Eigen::Matrix2d::Zero();
        dF.row(j) = g.h[b2].transpose();
        Eigen::Matrix2d dP = neo_hookean_stress_derivative(g.F, dF, mat);
        for (int a = 0; a < 3; ++a) {
          Eigen::Vector2d col = g.area * (dP * g.h[a]);
          int cj = map.dof(tri[b2], j);
          if (fixed[cj]) continue;
          for (int i = 0; i < 2; ++i) {
            int ri = map.dof(tri[a], i);
            if (fixed[ri]) continue;
            trip.emplace_back(ri, cj, col[i]);
          }
        }
      }
  }
  for (int i : dirichlet.fixed_dofs) trip.emplace_back(i, i, 1.0);
  Eigen::SparseMatrix<double> H(map.num_dofs(), map.num_dofs());
  H.setFromTriplets(trip.begin(), trip.end());
  return H;
}

/// Reference-configuration H1 inner product matrix (stiffness + mass),
/// assembled once and used for termination norms.
inline Eigen::SparseMatrix<double> h1_metric(const Mesh& mesh, const DofMap& map)
{
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    Eigen::Matrix2d Dm;
    Dm.col(0) = mesh.vertices[tri[1]] - mesh.vertices[tri[0]];
    Dm.col(1) = mesh.vertices[tri[2]] - mesh.vertices[tri[0]];
    Eigen::Matrix2d Bm = Dm.inverse();
    double area = 0.5 * Dm.determinant();
    const Eigen::Vector2d s0(-1.0, -1.0), s1(1.0, 0.0), s2(0.0, 1.0);
    std::array<Eigen::Vector2d, 3> h = {Bm.transpose() * s0, Bm.transpose() * s1,
                                        Bm.transpose() * s2};
    for (int a = 0; a < 3; ++a)
      for (int bq = 0; bq < 3; ++bq) {
        double stiff = area * h[a].dot(h[bq]);
        double mass = area * (a == bq ? 1.0 / 6.0 : 1.0 / 12.0);
        for (int c = 0; c < 2; ++c)
          trip.emplace_back(map.dof(tri[a], c), map.dof(tri[bq], c),
                            stiff + mass);
      }
  }
  Eigen::SparseMatrix<double> A(map.num_dofs(), map.num_dofs());
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

inline double h1_norm(const Eigen::SparseMatrix<double>& metric,
                      const Eigen::VectorXd& u)
{
  return std::sqrt(u.dot(metric * u));
}

}  // namespace ftr
