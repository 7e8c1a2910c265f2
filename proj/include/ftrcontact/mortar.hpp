#pragma once

// Contact geometry on the deformed boundaries: averaged normal field,
// closest-point projection, weak gap vector c(z) and its Jacobian blocks
// D(z), M(z).

#include "ftrcontact/mesh.hpp"

#include <cmath>
#include <optional>

namespace ftr {

struct DegenerateGeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A deformed boundary polyline; `pts[i]` is the deformed position of
/// `vertex_ids[i]`.  Orientation follows the mesh segments (body on the left,
/// outward normal to the right of the walking direction).
struct DeformedPolyline {
  std::vector<Eigen::Vector2d> pts;
  std::vector<int> vertex_ids;

  int num_segments() const { return static_cast<int>(pts.size()) - 1; }

  Eigen::Vector2d segment_normal(int s) const
  {
    Eigen::Vector2d t = pts[s + 1] - pts[s];
    double len = t.norm();
    if (len == 0.0) throw DegenerateGeometryError("zero-length boundary segment");
    return Eigen::Vector2d(t.y(), -t.x()) / len;
  }
};

inline DeformedPolyline extract_polyline(const Mesh& mesh, const DofMap& map,
                                         const Eigen::VectorXd& z, Marker marker)
{
  DeformedPolyline p;
  p.vertex_ids = boundary_polyline(mesh, marker);
  for (int v : p.vertex_ids)
    p.pts.emplace_back(z[map.dof(v, 0)], z[map.dof(v, 1)]);
  return p;
}

/// Unit vertex normals obtained by averaging adjacent segment normals;
/// P1-interpolated along each segment.
struct NormalField {
  std::vector<Eigen::Vector2d> vertex_normals;

  /// Interpolated (not re-normalised) normal at parameter t of segment s.
  Eigen::Vector2d at(int s, double t) const
  {
    return (1.0 - t) * vertex_normals[s] + t * vertex_normals[s + 1];
  }
};

inline NormalField averaged_normals(const DeformedPolyline& poly)
{
  if (poly.num_segments() < 1)
    throw DegenerateGeometryError("polyline without segments");
  NormalField nf;
  int nv = static_cast<int>(poly.pts.size());
  for (int v = 0; v < nv; ++v) {
    Eigen::Vector2d sum = Eigen::Vector2d::Zero();
    if (v > 0) sum += poly.segment_normal(v - 1);
    if (v < nv - 1) sum += poly.segment_normal(v);
    double len = sum.norm();
    if (len < 1e-14)
      throw DegenerateGeometryError("adjacent normals cancel at vertex " +
                                    std::to_string(v));
    nf.vertex_normals.push_back(sum / len);
  }
  return nf;
}

struct ProjectionResult {
  Eigen::Vector2d foot;
  int segment = -1;
  double t = 0.0;     // barycentric coordinate on the owning segment
  double gap = 0.0;   // n_h(foot) . (s - foot)
};

/// Global closest-point projection onto the polyline; ties broken by lowest
/// segment index.  Gap uses the P1-interpolated normal at the foot.
inline ProjectionResult closest_point(const Eigen::Vector2d& s,
                                      const DeformedPolyline& poly,
                                      const NormalField& normals)
{
  ProjectionResult best;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (int seg = 0; seg < poly.num_segments(); ++seg) {
    const Eigen::Vector2d& a = poly.pts[seg];
    const Eigen::Vector2d& b = poly.pts[seg + 1];
    // cheap bounding-box prefilter
    double pad = std::sqrt(best_d2);
    if (std::isfinite(pad)) {
      if (s.x() < std::min(a.x(), b.x()) - pad) continue;
      if (s.x() > std::max(a.x(), b.x()) + pad) continue;
      if (s.y() < std::min(a.y(), b.y()) - pad) continue;
      if (s.y() > std::max(a.y(), b.y()) + pad) continue;
    }
    Eigen::Vector2d ab = b - a;
    double t = ab.squaredNorm() > 0.0 ? (s - a).dot(ab) / ab.squaredNorm() : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    Eigen::Vector2d foot = a + t * ab;
    double d2 = (s - foot).squaredNorm();
    if (d2 < best_d2 - 1e-30 || (best.segment < 0)) {
      best_d2 = d2;
      best.segment = seg;
      best.t = t;
      best.foot = foot;
    }
  }
  best.gap = normals.at(best.segment, best.t).dot(s - best.foot);
  return best;
}

namespace detail {

// Parameters in (t0,t1) where the owning mortar segment of the projection
// changes, located by bisection.
inline void owner_breakpoints(const DeformedPolyline& nm, int seg,
                              const DeformedPolyline& mortar,
                              const NormalField& normals, double t0, double t1,
                              int o0, int o1, int depth,
                              std::vector<double>& cuts)
{
  auto owner = [&](double t) {
    Eigen::Vector2d s = (1.0 - t) * nm.pts[seg] + t * nm.pts[seg + 1];
    return closest_point(s, mortar, normals).segment;
  };
  if (o0 == o1 && depth > 4) return;  // a few forced subdivisions catch jumps
  if (t1 - t0 < 1e-12) {
    if (o0 != o1) cuts.push_back(0.5 * (t0 + t1));
    return;
  }
  double tm = 0.5 * (t0 + t1);
  int om = owner(tm);
  owner_breakpoints(nm, seg, mortar, normals, t0, tm, o0, om, depth + 1, cuts);
  owner_breakpoints(nm, seg, mortar, normals, tm, t1, om, o1, depth + 1, cuts);
}

}  // namespace detail

/// Weak gap vector: c_q = int over the deformed non-mortar boundary of
/// gap(s) theta_q(s) ds, with theta_q the P1 hat at non-mortar vertex q.
/// Row q corresponds to dof slot q of the non-mortar partition.
inline Eigen::VectorXd assemble_gap(const Mesh& mesh, const DofMap& map,
                                    const Eigen::VectorXd& z)
{
  DeformedPolyline nm = extract_polyline(mesh, map, z, Marker::contact_nonmortar);
  DeformedPolyline mortar = extract_polyline(mesh, map, z, Marker::contact_mortar);
  NormalField normals = averaged_normals(mortar);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(map.m1);

  // 3-point Gauss rule on [0,1]
  const double gp[3] = {0.5 - std::sqrt(0.15), 0.5, 0.5 + std::sqrt(0.15)};
  const double gw[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};

  for (int seg = 0; seg < nm.num_segments(); ++seg) {
    double len = (nm.pts[seg + 1] - nm.pts[seg]).norm();
    if (len == 0.0) throw DegenerateGeometryError("zero-length non-mortar segment");
    auto at = [&](double t) -> Eigen::Vector2d {
      return (1.0 - t) * nm.pts[seg] + t * nm.pts[seg + 1];
    };
    std::vector<double> cuts{0.0, 1.0};
    int o0 = closest_point(at(0.0), mortar, normals).segment;
    int o1 = closest_point(at(1.0), mortar, normals).segment;
    detail::owner_breakpoints(nm, seg, mortar, normals, 0.0, 1.0, o0, o1, 0, cuts);
    std::sort(cuts.begin(), cuts.end());
    int qa = map.vertex_slot[nm.vertex_ids[seg]];
    int qb = map.vertex_slot[nm.vertex_ids[seg + 1]];
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      double ta = cuts[k], tb = cuts[k + 1];
      if (tb - ta < 1e-14) continue;
      for (int g = 0; g < 3; ++g) {
        double t = ta + gp[g] * (tb - ta);
        double w = gw[g] * (tb - ta) * len;
        auto proj = closest_point(at(t), mortar, normals);
        c[qa] += w * proj.gap * (1.0 - t);
        c[qb] += w * proj.gap * t;
      }
    }
  }
  return c;
}

/// Gap vector, Jacobian blocks and projection metadata at a configuration.
struct ContactLinearisation {
  Eigen::VectorXd c;                        // length m1
  Eigen::SparseMatrix<double> D;            // m1 x d*m1
  Eigen::SparseMatrix<double> M;            // m1 x d*m2
  std::vector<Eigen::Vector2d> row_normal;  // unit normal at Phi(p) per row
  std::vector<char> flagged;                // non-smooth projection within stencil
};

/// Reference Jacobian: column-wise central finite differences of the weak gap
/// with respect to the contact-boundary dofs (step 1e-7 * geometry scale).
/// The analytic normal-field, gap and domain linearisations are captured
/// together.
inline ContactLinearisation assemble_jacobian(const Mesh& mesh, const DofMap& map,
                                              const Eigen::VectorXd& z)
{
  ContactLinearisation lin;
  lin.c = assemble_gap(mesh, map, z);
  double h = 1e-7 * mesh.scale();
  int d = map.d;
  lin.flagged.assign(map.m1, 0);

  std::vector<Eigen::Triplet<double>> dtrip, mtrip;
  Eigen::VectorXd zp = z;
  int ncols = d * (map.m1 + map.m2);
  // contact dofs occupy the leading block of the dof ordering
  for (int col = 0; col < ncols; ++col) {
    zp[col] = z[col] + h;
    Eigen::VectorXd cp = assemble_gap(mesh, map, zp);
    zp[col] = z[col] - h;
    Eigen::VectorXd cm = assemble_gap(mesh, map, zp);
    zp[col] = z[col];
    Eigen::VectorXd dc = (cp - cm) / (2.0 * h);
    Eigen::VectorXd curv = (cp + cm - 2.0 * lin.c) / h;  // second-difference probe
    double drop = 1e-8 * std::max(1.0, dc.cwiseAbs().maxCoeff());
    for (int q = 0; q < map.m1; ++q) {
      if (std::abs(curv[q]) > 0.05 * std::abs(dc[q]) + 1e-4) lin.flagged[q] = 1;
      if (std::abs(dc[q]) <= drop) continue;
      if (col < d * map.m1)
        dtrip.emplace_back(q, col, dc[q]);
      else
        mtrip.emplace_back(q, col - d * map.m1, dc[q]);
    }
  }
  lin.D.resize(map.m1, d * map.m1);
  lin.D.setFromTriplets(dtrip.begin(), dtrip.end());
  lin.M.resize(map.m1, d * map.m2);
  lin.M.setFromTriplets(mtrip.begin(), mtrip.end());

  DeformedPolyline nm = extract_polyline(mesh, map, z, Marker::contact_nonmortar);
  DeformedPolyline mortar = extract_polyline(mesh, map, z, Marker::contact_mortar);
  NormalField normals = averaged_normals(mortar);
  for (int p = 0; p < map.m1; ++p) {
    auto proj = closest_point(nm.pts[p], mortar, normals);
    Eigen::Vector2d n = normals.at(proj.segment, proj.t);
    double len = n.norm();
    if (len < 1e-14) throw DegenerateGeometryError("vanishing projected normal");
    lin.row_normal.push_back(n / len);
  }
  return lin;
}

/// Full constraint Jacobian (D | M | 0) as an m1 x ndofs sparse matrix.
inline Eigen::SparseMatrix<double> full_jacobian(const ContactLinearisation& lin,
                                                 int ndofs)
{
  std::vector<Eigen::Triplet<double>> trip;
  int dm1 = static_cast<int>(lin.D.cols());
  for (int j = 0; j < lin.D.outerSize(); ++j)
    for (Eigen::SparseMatrix<double>::InnerIterator it(lin.D, j); it; ++it)
      trip.emplace_back(it.row(), it.col(), it.value());
  for (int j = 0; j < lin.M.outerSize(); ++j)
    for (Eigen::SparseMatrix<double>::InnerIterator it(lin.M, j); it; ++it)
      trip.emplace_back(it.row(), dm1 + it.col(), it.value());
  Eigen::SparseMatrix<double> J(lin.c.size(), ndofs);
  J.setFromTriplets(trip.begin(), trip.end());
  return J;
}

}  // namespace ftr
