#pragma once

// Deformation-dependent basis transformation T(z) that decouples the
// linearised mortar contact constraints into bound constraints, together
// with its lumped variant and inverse-free application.
//
// Block layout of T (non-mortar, mortar, interior):
//
//   T = ( O K   -O L   0 )          T^-1 = ( U O   -V    0 )
//       (  0      I    0 )                 (  0     I    0 )
//       (  0      0    I )                 (  0     0    I )
//
// with K, L built from D_N^-1 (or its lumped row-sum diagonal), and
// U, V from D_N, D_T, M directly.

#include "ftrcontact/mortar.hpp"

#include <Eigen/SparseLU>
#include <memory>

namespace ftr {

struct SingularTransformError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class DecouplingTransform {
 public:
  int d = 2;
  int m1 = 0, m2 = 0;
  int ndofs = 0;
  bool lumped = false;

  std::vector<Eigen::MatrixXd> O;      // Householder d x d blocks, O_pp e1 = n_p
  Eigen::SparseMatrix<double> DN;      // m1 x m1, exact normal non-mortar matrix
  Eigen::SparseMatrix<double> DT;      // m1 x (d-1)m1
  Eigen::SparseMatrix<double> Mb;      // m1 x d*m2
  Eigen::VectorXd lumped_diag;         // row sums of DN

  Eigen::SparseMatrix<double> Tinv;    // explicit sparse inverse transform

  const Eigen::SparseLU<Eigen::SparseMatrix<double>>& lu() const { return *lu_; }
  const Eigen::SparseLU<Eigen::SparseMatrix<double>>& luT() const { return *luT_; }

  std::shared_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> lu_, luT_;
};

namespace detail {

inline Eigen::MatrixXd householder_to_normal(const Eigen::VectorXd& n)
{
  int d = static_cast<int>(n.size());
  Eigen::VectorXd v = -n;
  v[0] += 1.0;  // e1 - n
  double vv = v.squaredNorm();
  if (vv < 1e-28) return Eigen::MatrixXd::Identity(d, d);
  return Eigen::MatrixXd::Identity(d, d) - (2.0 / vv) * (v * v.transpose());
}

}  // namespace detail

/// Builds the transform from a contact linearisation.  If `lumped` is set the
/// Hessian path uses the row-sum diagonal of D_N; the gradient path and the
/// back-transformation always use the exact D_N.
inline DecouplingTransform build_transform(const ContactLinearisation& lin,
                                           int d, int ndofs, bool lumped)
{
  DecouplingTransform tr;
  tr.d = d;
  tr.m1 = static_cast<int>(lin.c.size());
  tr.m2 = static_cast<int>(lin.M.cols()) / d;
  tr.ndofs = ndofs;
  tr.lumped = lumped;
  tr.Mb = lin.M;

  for (int p = 0; p < tr.m1; ++p)
    tr.O.push_back(detail::householder_to_normal(
        Eigen::VectorXd(lin.row_normal[p])));

  // Split D O into (D_N | D_T) row-block-wise.
  std::vector<Eigen::Triplet<double>> dn, dt;
  Eigen::SparseMatrix<double> DO(tr.m1, d * tr.m1);
  {
    std::vector<Eigen::Triplet<double>> trip;
    for (int j = 0; j < lin.D.outerSize(); ++j)
      for (Eigen::SparseMatrix<double>::InnerIterator it(lin.D, j); it; ++it) {
        int q = static_cast<int>(it.col()) / d;   // block column
        int ci = static_cast<int>(it.col()) % d;  // component within block
        // (D O)_{p, (q,c)} = sum_i D_{p,(q,i)} O_{ic}
        for (int c = 0; c < d; ++c)
          trip.emplace_back(it.row(), q * d + c, it.value() * tr.O[q](ci, c));
      }
    DO.setFromTriplets(trip.begin(), trip.end());
  }
  for (int j = 0; j < DO.outerSize(); ++j)
    for (Eigen::SparseMatrix<double>::InnerIterator it(DO, j); it; ++it) {
      int q = static_cast<int>(it.col()) / d;
      int ci = static_cast<int>(it.col()) % d;
      if (std::abs(it.value()) < 1e-300) continue;
      if (ci == 0)
        dn.emplace_back(it.row(), q, it.value());
      else
        dt.emplace_back(it.row(), q * (d - 1) + (ci - 1), it.value());
    }
  tr.DN.resize(tr.m1, tr.m1);
  tr.DN.setFromTriplets(dn.begin(), dn.end());
  tr.DT.resize(tr.m1, (d - 1) * tr.m1);
  tr.DT.setFromTriplets(dt.begin(), dt.end());

  tr.lumped_diag = tr.DN * Eigen::VectorXd::Ones(tr.m1);
  if (lumped)
    for (int p = 0; p < tr.m1; ++p)
      if (std::abs(tr.lumped_diag[p]) < 1e-300)
        throw SingularTransformError("zero lumped diagonal in row " +
                                     std::to_string(p));

  tr.lu_ = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
  tr.lu_->compute(tr.DN);
  if (tr.lu_->info() != Eigen::Success)
    throw SingularTransformError("singular non-mortar matrix D_N");
  Eigen::SparseMatrix<double> DNT = tr.DN.transpose();
  tr.luT_ = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
  tr.luT_->compute(DNT);
  if (tr.luT_->info() != Eigen::Success)
    throw SingularTransformError("singular non-mortar matrix D_N (transpose)");

  // Explicit sparse inverse transform from U, O, V blocks.
  {
    std::vector<Eigen::Triplet<double>> trip;
    int off2 = d * tr.m1;
    // (U O) block: row-block p gets rows [-DN -DT; 0 I] times O.
    // normal rows: -DN and -DT entries
    for (int j = 0; j < tr.DN.outerSize(); ++j)
      for (Eigen::SparseMatrix<double>::InnerIterator it(tr.DN, j); it; ++it) {
        int p = static_cast<int>(it.row());
        int q = static_cast<int>(it.col());
        for (int c = 0; c < d; ++c) {
          double v = -it.value() * tr.O[q](0, c);
          if (v != 0.0) trip.emplace_back(p * d, q * d + c, v);
        }
      }
    for (int j = 0; j < tr.DT.outerSize(); ++j)
      for (Eigen::SparseMatrix<double>::InnerIterator it(tr.DT, j); it; ++it) {
        int p = static_cast<int>(it.row());
        int q = static_cast<int>(it.col()) / (d - 1);
        int ci = 1 + static_cast<int>(it.col()) % (d - 1);
        for (int c = 0; c < d; ++c) {
          double v = -it.value() * tr.O[q](ci, c);
          if (v != 0.0) trip.emplace_back(p * d, q * d + c, v);
        }
      }
    // tangential rows of U: identity block times O
    for (int p = 0; p < tr.m1; ++p)
      for (int ci = 1; ci < d; ++ci)
        for (int c = 0; c < d; ++c) {
          double v = tr.O[p](ci, c);
          if (v != 0.0) trip.emplace_back(p * d + ci, p * d + c, v);
        }
    // -V block (mortar columns of the normal rows)
    for (int j = 0; j < tr.Mb.outerSize(); ++j)
      for (Eigen::SparseMatrix<double>::InnerIterator it(tr.Mb, j); it; ++it)
        trip.emplace_back(static_cast<int>(it.row()) * d,
                          off2 + static_cast<int>(it.col()), -it.value());
    // identity on mortar and interior blocks
    for (int i = off2; i < ndofs; ++i) trip.emplace_back(i, i, 1.0);
    tr.Tinv.resize(ndofs, ndofs);
    tr.Tinv.setFromTriplets(trip.begin(), trip.end());
    tr.Tinv.prune(0.0);
  }
  return tr;
}

/// f_T = T^T f using the exact D_N via one small transpose solve; never uses
/// the lumped diagonal (first-order consistency of the SQP model).
inline Eigen::VectorXd transform_gradient(const DecouplingTransform& tr,
                                          const Eigen::VectorXd& f)
{
  int d = tr.d;
  Eigen::VectorXd fT = f;
  // g = O^T f on the non-mortar block
  Eigen::VectorXd gN(tr.m1);
  Eigen::VectorXd gT((d - 1) * tr.m1);
  for (int p = 0; p < tr.m1; ++p) {
    Eigen::VectorXd g = tr.O[p].transpose() * f.segment(p * d, d);
    gN[p] = g[0];
    for (int c = 1; c < d; ++c) gT[p * (d - 1) + c - 1] = g[c];
  }
  Eigen::VectorXd gbar = tr.luT().solve(gN);
  if (tr.luT().info() != Eigen::Success)
    throw SingularTransformError("D_N^T solve failed");
  // normal components: -gbar; tangential: gT - DT^T gbar
  Eigen::VectorXd tang = gT - tr.DT.transpose() * gbar;
  for (int p = 0; p < tr.m1; ++p) {
    fT[p * d] = -gbar[p];
    for (int c = 1; c < d; ++c) fT[p * d + c] = tang[p * (d - 1) + c - 1];
  }
  // mortar block: f2 - M^T gbar
  Eigen::VectorXd m = tr.Mb.transpose() * gbar;
  fT.segment(d * tr.m1, d * tr.m2) -= m;
  return fT;
}

namespace detail {

/// Explicit transform matrix.  With `use_lumped` the diagonal row-sum
/// approximation replaces D_N^-1 inside K and L; otherwise the exact inverse
/// is formed densely on the (small) non-mortar block.
inline Eigen::SparseMatrix<double> transform_matrix(const DecouplingTransform& tr,
                                                    bool use_lumped)
{
  int d = tr.d;
  Eigen::MatrixXd DNinv;
  if (!use_lumped) {
    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(tr.m1, tr.m1);
    DNinv = tr.lu().solve(I);
  }
  auto dninv_row = [&](int p) -> Eigen::VectorXd {
    if (use_lumped) {
      Eigen::VectorXd r = Eigen::VectorXd::Zero(tr.m1);
      r[p] = 1.0 / tr.lumped_diag[p];
      return r;
    }
    return DNinv.row(p).transpose();
  };

  // K and L row-blocks; K_pq = [-(DNi)_pq, -(DNi DT)_pq; 0, I],
  // L_pq = [(DNi M)_pq; 0].
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::SparseMatrix<double> DNiDT;
  Eigen::SparseMatrix<double> DNiM;
  if (use_lumped) {
    Eigen::SparseMatrix<double> Dinv(tr.m1, tr.m1);
    std::vector<Eigen::Triplet<double>> dd;
    for (int p = 0; p < tr.m1; ++p) dd.emplace_back(p, p, 1.0 / tr.lumped_diag[p]);
    Dinv.setFromTriplets(dd.begin(), dd.end());
    DNiDT = Dinv * tr.DT;
    DNiM = Dinv * tr.Mb;
  } else {
    DNiDT = (DNinv * Eigen::MatrixXd(tr.DT)).sparseView(1.0, 1e-300);
    DNiM = (DNinv * Eigen::MatrixXd(tr.Mb)).sparseView(1.0, 1e-300);
  }

  // assemble OK and -OL directly: row-block p of K/L combined with O_p
  // K column-block q entries
  auto add_ok = [&](int p, int q, const Eigen::MatrixXd& Kpq) {
    Eigen::MatrixXd OK = tr.O[p] * Kpq;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        if (OK(i, j) != 0.0) trip.emplace_back(p * d + i, q * d + j, OK(i, j));
  };
  // diagonal identity part of K (tangential rows)
  for (int p = 0; p < tr.m1; ++p) {
    Eigen::MatrixXd Kpp = Eigen::MatrixXd::Zero(d, d);
    for (int c = 1; c < d; ++c) Kpp(c, c) = 1.0;
    add_ok(p, p, Kpp);
  }
  // -DNinv and -DNiDT on the normal row of K
  for (int p = 0; p < tr.m1; ++p) {
    Eigen::VectorXd dr = dninv_row(p);
    for (int q = 0; q < tr.m1; ++q) {
      Eigen::MatrixXd Kpq = Eigen::MatrixXd::Zero(d, d);
      bool nz = false;
      if (dr[q] != 0.0) {
        Kpq(0, 0) = -dr[q];
        nz = true;
      }
      for (int c = 1; c < d; ++c) {
        double v = -DNiDT.coeff(p, q * (d - 1) + c - 1);
        if (v != 0.0) {
          Kpq(0, c) = v;
          nz = true;
        }
      }
      // the identity part was added above
      if (nz) add_ok(p, q, Kpq);
    }
  }
  // -O L block: L_pq = [ (DNi M)_pq ; 0 ]
  int off2 = d * tr.m1;
  for (int p = 0; p < tr.m1; ++p)
    for (int jc = 0; jc < d * tr.m2; ++jc) {
      double v = DNiM.coeff(p, jc);
      if (v == 0.0) continue;
      for (int i = 0; i < d; ++i) {
        double w = -tr.O[p](i, 0) * v;
        if (w != 0.0) trip.emplace_back(p * d + i, off2 + jc, w);
      }
    }
  for (int i = off2; i < tr.ndofs; ++i) trip.emplace_back(i, i, 1.0);
  Eigen::SparseMatrix<double> T(tr.ndofs, tr.ndofs);
  T.setFromTriplets(trip.begin(), trip.end());
  T.prune(0.0);
  return T;
}

}  // namespace detail

/// H_T = That^T H That with the lumped transform (or the exact one when the
/// transform was built without lumping).
inline Eigen::SparseMatrix<double> transform_hessian(
    const DecouplingTransform& tr, const Eigen::SparseMatrix<double>& H)
{
  Eigen::SparseMatrix<double> T = detail::transform_matrix(tr, tr.lumped);
  Eigen::SparseMatrix<double> HT = T.transpose() * H * T;
  Eigen::SparseMatrix<double> HTs = 0.5 * (Eigen::SparseMatrix<double>(HT.transpose()) + HT);
  HTs.prune(0.0);
  return HTs;
}

/// u = T(z) utilde via the small D_N solve and O rotation; no explicit inverse.
inline Eigen::VectorXd to_euclidean(const DecouplingTransform& tr,
                                    const Eigen::VectorXd& ut)
{
  int d = tr.d;
  Eigen::VectorXd u = ut;
  Eigen::VectorXd utN(tr.m1), utT((d - 1) * tr.m1);
  for (int p = 0; p < tr.m1; ++p) {
    utN[p] = ut[p * d];
    for (int c = 1; c < d; ++c) utT[p * (d - 1) + c - 1] = ut[p * d + c];
  }
  Eigen::VectorXd u2 = ut.segment(d * tr.m1, d * tr.m2);
  Eigen::VectorXd rhs = -(utN + tr.DT * utT + tr.Mb * u2);
  Eigen::VectorXd uhat = tr.lu().solve(rhs);
  if (tr.lu().info() != Eigen::Success)
    throw SingularTransformError("D_N solve failed");
  for (int p = 0; p < tr.m1; ++p) {
    Eigen::VectorXd w(d);
    w[0] = uhat[p];
    for (int c = 1; c < d; ++c) w[c] = utT[p * (d - 1) + c - 1];
    u.segment(p * d, d) = tr.O[p] * w;
  }
  return u;
}

/// utilde = T^-1 u (sparse product with the explicit inverse).
inline Eigen::VectorXd to_transformed(const DecouplingTransform& tr,
                                      const Eigen::VectorXd& u)
{
  return tr.Tinv * u;
}

/// 1-norm condition estimate of D_N from the LU factors; used as the
/// Assumption-3 guard in the outer loop.
inline double dn_condition_estimate(const DecouplingTransform& tr)
{
  double norm1 = 0.0;
  for (int j = 0; j < tr.DN.outerSize(); ++j) {
    double s = 0.0;
    for (Eigen::SparseMatrix<double>::InnerIterator it(tr.DN, j); it; ++it)
      s += std::abs(it.value());
    norm1 = std::max(norm1, s);
  }
  // power-iteration style estimate of ||DN^-1||_1 via a few solves
  Eigen::VectorXd x = Eigen::VectorXd::Ones(tr.m1) / tr.m1;
  double inv_norm = 0.0;
  for (int it = 0; it < 4; ++it) {
    Eigen::VectorXd y = tr.lu().solve(x);
    inv_norm = std::max(inv_norm, y.template lpNorm<1>() / x.template lpNorm<1>());
    if (y.lpNorm<1>() == 0.0) break;
    for (int i = 0; i < tr.m1; ++i) x[i] = (y[i] >= 0.0 ? 1.0 : -1.0);
    x /= x.lpNorm<1>();
  }
  return norm1 * inv_norm;
}

}  // namespace ftr
