#pragma once

// Bound-constrained quadratic solvers: convex TNNMG (projected Gauss-Seidel
// smoothing, active-set truncation, linear multigrid correction, projection,
// exact line search) and the non-convex extension with a safeguarded
// monotone-multigrid correction step.

#include "ftrcontact/transform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ftr {

using SparseRM = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct UnboundedCoordinateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// m(u) = f^T u + 1/2 u^T H u subject to lower <= u <= upper (entries may be
/// +-infinity).
struct QuadraticModel {
  SparseRM H;
  Eigen::VectorXd f;
  Eigen::VectorXd lower, upper;

  double energy(const Eigen::VectorXd& u) const
  {
    return f.dot(u) + 0.5 * u.dot(H * u);
  }

  Eigen::VectorXd clamp(Eigen::VectorXd u) const
  {
    for (Eigen::Index i = 0; i < u.size(); ++i)
      u[i] = std::min(std::max(u[i], lower[i]), upper[i]);
    return u;
  }

  void check_finite() const
  {
    if (!f.allFinite()) throw std::invalid_argument("non-finite linear term");
    for (int j = 0; j < H.outerSize(); ++j)
      for (SparseRM::InnerIterator it(H, j); it; ++it)
        if (!std::isfinite(it.value()))
          throw std::invalid_argument("non-finite Hessian entry");
    for (Eigen::Index i = 0; i < lower.size(); ++i)
      if (!(lower[i] <= upper[i]))
        throw std::invalid_argument("empty bound interval");
  }
};

struct SolveReport {
  int iterations = 0;
  double final_energy = 0.0;
  std::vector<double> energy_per_iteration;
  double last_correction_norm = 0.0;
  std::string termination;
  int monotonicity_violations = 0;
  int feasibility_violations = 0;
};

namespace detail {

/// Minimiser of 1/2 q a^2 + g a over [lo, hi] (0 in the interval).  For
/// non-positive curvature the endpoints are compared; ties pick the larger a.
inline double coordinate_min(double q, double g, double lo, double hi)
{
  if (q > 0.0) return std::clamp(-g / q, lo, hi);
  auto phi = [&](double a) { return 0.5 * q * a * a + g * a; };
  if (q < 0.0) {
    if (!std::isfinite(lo) || !std::isfinite(hi))
      throw UnboundedCoordinateError("negative curvature with infinite bound");
    return phi(lo) < phi(hi) ? lo : hi;
  }
  // linear coordinate model
  if (g > 0.0) {
    if (!std::isfinite(lo))
      throw UnboundedCoordinateError("zero curvature descent to -infinity");
    return lo;
  }
  if (g < 0.0) {
    if (!std::isfinite(hi))
      throw UnboundedCoordinateError("zero curvature descent to +infinity");
    return hi;
  }
  return 0.0;
}

inline bool feasible(const Eigen::VectorXd& u, const Eigen::VectorXd& lo,
                     const Eigen::VectorXd& hi, double tol = 1e-12)
{
  for (Eigen::Index i = 0; i < u.size(); ++i)
    if (u[i] < lo[i] - tol || u[i] > hi[i] + tol) return false;
  return true;
}

}  // namespace detail

/// One sequential projected Gauss-Seidel sweep; m(u') <= m(u).
inline Eigen::VectorXd pgs_sweep(const QuadraticModel& model, Eigen::VectorXd u)
{
  const Eigen::Index n = u.size();
  for (Eigen::Index p = 0; p < n; ++p) {
    double q = 0.0, rowdot = 0.0;
    for (SparseRM::InnerIterator it(model.H, static_cast<int>(p)); it; ++it) {
      rowdot += it.value() * u[it.col()];
      if (it.col() == p) q = it.value();
    }
    double g = model.f[p] + rowdot;
    double alpha = detail::coordinate_min(q, g, model.lower[p] - u[p],
                                          model.upper[p] - u[p]);
    u[p] += alpha;
  }
  return u;
}

/// Active-set indicator: a dof is truncated iff it sits at a finite bound
/// (absolute tolerance 1e-12).
inline std::vector<char> truncate(const Eigen::VectorXd& u,
                                  const Eigen::VectorXd& lower,
                                  const Eigen::VectorXd& upper,
                                  double tol = 1e-12)
{
  std::vector<char> active(u.size(), 0);
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    if (std::isfinite(lower[i]) && std::abs(u[i] - lower[i]) <= tol) active[i] = 1;
    if (std::isfinite(upper[i]) && std::abs(u[i] - upper[i]) <= tol) active[i] = 1;
  }
  return active;
}

namespace detail {

inline Eigen::SparseMatrix<double> truncated_matrix(const SparseRM& H,
                                                    const std::vector<char>& active,
                                                    bool unit_diagonal)
{
  std::vector<Eigen::Triplet<double>> trip;
  for (int r = 0; r < H.outerSize(); ++r) {
    if (active[r]) continue;
    for (SparseRM::InnerIterator it(H, r); it; ++it)
      if (!active[it.col()]) trip.emplace_back(r, static_cast<int>(it.col()), it.value());
  }
  if (unit_diagonal)
    for (std::size_t i = 0; i < active.size(); ++i)
      if (active[i]) trip.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);
  Eigen::SparseMatrix<double> Q(H.rows(), H.cols());
  Q.setFromTriplets(trip.begin(), trip.end());
  return Q;
}

/// Galerkin chain A_l = P^T A_{l+1} P, finest last; transfers[l]: l -> l+1.
inline std::vector<SparseRM> galerkin_chain(
    const Eigen::SparseMatrix<double>& fine,
    const std::vector<Eigen::SparseMatrix<double>>& transfers)
{
  std::vector<Eigen::SparseMatrix<double>> chain(transfers.size() + 1);
  chain.back() = fine;
  for (int l = static_cast<int>(transfers.size()) - 1; l >= 0; --l)
    chain[l] = transfers[l].transpose() * chain[l + 1] * transfers[l];
  std::vector<SparseRM> out;
  for (auto& A : chain) out.emplace_back(A);
  return out;
}

// one linear Gauss-Seidel sweep for 1/2 v^T A v - r^T v; zero-diagonal rows
// are skipped (they carry no residual for consistent truncated systems)
inline void gs_linear(const SparseRM& A, const Eigen::VectorXd& r,
                      Eigen::VectorXd& v)
{
  for (int p = 0; p < A.outerSize(); ++p) {
    double q = 0.0, rowdot = 0.0;
    for (SparseRM::InnerIterator it(A, p); it; ++it) {
      rowdot += it.value() * v[it.col()];
      if (it.col() == p) q = it.value();
    }
    if (std::abs(q) < 1e-300) continue;
    v[p] += (r[p] - rowdot) / q;
  }
}

// projected, possibly non-convex Gauss-Seidel sweep for the same functional
// with bounds
inline void gs_obstacle(const SparseRM& A, const Eigen::VectorXd& r,
                        const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                        Eigen::VectorXd& v)
{
  for (int p = 0; p < A.outerSize(); ++p) {
    double q = 0.0, rowdot = 0.0;
    for (SparseRM::InnerIterator it(A, p); it; ++it) {
      rowdot += it.value() * v[it.col()];
      if (it.col() == p) q = it.value();
    }
    double g = rowdot - r[p];
    if (q == 0.0 && g == 0.0) continue;
    v[p] += coordinate_min(q, g, lo[p] - v[p], hi[p] - v[p]);
  }
}

inline double defect_energy(const SparseRM& A, const Eigen::VectorXd& r,
                            const Eigen::VectorXd& v)
{
  return 0.5 * v.dot(A * v) - r.dot(v);
}

// exhaustive Gauss-Seidel until 1e-12 relative energy stagnation
template <typename Sweep>
inline void gs_exhaustive(const SparseRM& A, const Eigen::VectorXd& r,
                          Eigen::VectorXd& v, Sweep sweep)
{
  double e = defect_energy(A, r, v);
  for (int it = 0; it < 5000; ++it) {
    sweep(v);
    double e2 = defect_energy(A, r, v);
    if (e - e2 < 1e-12 * (1.0 + std::abs(e2))) break;
    e = e2;
  }
}

/// One geometric V-cycle (3+3 smoothing) for the unconstrained truncated
/// defect problem.  Returns the correction from a zero initial guess.
inline Eigen::VectorXd linear_vcycle(const std::vector<SparseRM>& A,
                                     const std::vector<Eigen::SparseMatrix<double>>& P,
                                     const Eigen::VectorXd& r, int level)
{
  Eigen::VectorXd v = Eigen::VectorXd::Zero(r.size());
  if (level == 0) {
    gs_exhaustive(A[0], r, v, [&](Eigen::VectorXd& x) { gs_linear(A[0], r, x); });
    return v;
  }
  for (int s = 0; s < 3; ++s) gs_linear(A[level], r, v);
  Eigen::VectorXd defect = r - A[level] * v;
  Eigen::VectorXd rc = P[level - 1].transpose() * defect;
  Eigen::VectorXd vc = linear_vcycle(A, P, rc, level - 1);
  v += P[level - 1] * vc;
  for (int s = 0; s < 3; ++s) gs_linear(A[level], r, v);
  return v;
}

/// One monotone-multigrid V-cycle for the obstacle problem
/// min 1/2 v^T A v - r^T v, lo <= v <= hi (lo <= 0 <= hi).  Obstacles are
/// restricted with the minimal-envelope rule, so all iterates are feasible.
inline Eigen::VectorXd mmg_vcycle(const std::vector<SparseRM>& A,
                                  const std::vector<Eigen::SparseMatrix<double>>& P,
                                  const Eigen::VectorXd& r,
                                  const Eigen::VectorXd& lo,
                                  const Eigen::VectorXd& hi, int level)
{
  Eigen::VectorXd v = Eigen::VectorXd::Zero(r.size());
  if (level == 0) {
    gs_exhaustive(A[0], r, v,
                  [&](Eigen::VectorXd& x) { gs_obstacle(A[0], r, lo, hi, x); });
    return v;
  }
  for (int s = 0; s < 3; ++s) gs_obstacle(A[level], r, lo, hi, v);

  const Eigen::SparseMatrix<double>& Pl = P[level - 1];
  Eigen::VectorXd defect = r - A[level] * v;
  Eigen::VectorXd rc = Pl.transpose() * defect;
  Eigen::VectorXd lc = Eigen::VectorXd::Constant(Pl.cols(), 0.0);
  Eigen::VectorXd hc = Eigen::VectorXd::Constant(Pl.cols(), 0.0);
  std::vector<char> seen(Pl.cols(), 0);
  for (int j = 0; j < Pl.outerSize(); ++j)
    for (Eigen::SparseMatrix<double>::InnerIterator it(Pl, j); it; ++it) {
      int i = static_cast<int>(it.col());
      double dl = lo[it.row()] - v[it.row()];
      double dh = hi[it.row()] - v[it.row()];
      if (!seen[i]) {
        lc[i] = dl;
        hc[i] = dh;
        seen[i] = 1;
      } else {
        lc[i] = std::max(lc[i], dl);
        hc[i] = std::min(hc[i], dh);
      }
    }
  for (Eigen::Index i = 0; i < lc.size(); ++i) {
    lc[i] = std::min(lc[i], 0.0);  // guard round-off, keep 0 feasible
    hc[i] = std::max(hc[i], 0.0);
  }
  Eigen::VectorXd vc = mmg_vcycle(A, P, rc, lc, hc, level - 1);
  v += Pl * vc;
  for (int s = 0; s < 3; ++s) gs_obstacle(A[level], r, lo, hi, v);
  return v;
}

/// Exact line search for m along v from u (both feasible w.r.t. the model
/// bounds); returns the admissible minimiser alpha.
inline double line_search(const QuadraticModel& model, const Eigen::VectorXd& u,
                          const Eigen::VectorXd& v)
{
  double vnorm = v.cwiseAbs().maxCoeff();
  if (vnorm == 0.0) return 0.0;
  double g = v.dot(model.f + model.H * u);
  double q = v.dot(model.H * v);
  double alo = -std::numeric_limits<double>::infinity();
  double ahi = std::numeric_limits<double>::infinity();
  for (Eigen::Index p = 0; p < v.size(); ++p) {
    if (v[p] == 0.0) continue;
    double r1 = (model.lower[p] - u[p]) / v[p];
    double r2 = (model.upper[p] - u[p]) / v[p];
    if (v[p] < 0.0) std::swap(r1, r2);
    alo = std::max(alo, r1);
    ahi = std::min(ahi, r2);
  }
  alo = std::min(alo, 0.0);  // u itself is feasible
  ahi = std::max(ahi, 0.0);
  return coordinate_min(q, g, alo, ahi);
}

}  // namespace detail

/// Convex TNNMG.  `transfers[l]` prolongates level l to l+1 (finest = model
/// size); with no transfers the correction is solved exhaustively on the
/// single level.
inline std::pair<Eigen::VectorXd, SolveReport> tnnmg_solve(
    const QuadraticModel& model, const Eigen::VectorXd& u0,
    const std::vector<Eigen::SparseMatrix<double>>& transfers, double tol,
    int max_it)
{
  model.check_finite();
  SolveReport rep;
  Eigen::VectorXd u = model.clamp(u0);
  double e_prev = model.energy(u);
  rep.energy_per_iteration.push_back(e_prev);
  for (int nu = 0; nu < max_it; ++nu) {
    Eigen::VectorXd u_half = pgs_sweep(model, u);
    double e_half = model.energy(u_half);
    if (e_half > e_prev + 1e-10 * (1.0 + std::abs(e_prev)))
      rep.monotonicity_violations++;

    auto active = truncate(u_half, model.lower, model.upper);
    Eigen::VectorXd r = -(model.f + model.H * u_half);
    for (Eigen::Index i = 0; i < r.size(); ++i)
      if (active[i]) r[i] = 0.0;
    auto Aq = detail::truncated_matrix(model.H, active, true);
    auto chain = detail::galerkin_chain(Aq, transfers);
    Eigen::VectorXd v =
        detail::linear_vcycle(chain, transfers, r, static_cast<int>(transfers.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (active[i]) v[i] = 0.0;
      v[i] = std::clamp(v[i], model.lower[i] - u_half[i], model.upper[i] - u_half[i]);
    }
    double alpha = detail::line_search(model, u_half, v);
    Eigen::VectorXd u_new = u_half + alpha * v;

    double e_new = model.energy(u_new);
    if (e_new > e_half + 1e-10 * (1.0 + std::abs(e_half)))
      rep.monotonicity_violations++;
    if (!detail::feasible(u_new, model.lower, model.upper))
      rep.feasibility_violations++;

    rep.last_correction_norm = (u_new - u).cwiseAbs().maxCoeff();
    u = u_new;
    e_prev = e_new;
    rep.energy_per_iteration.push_back(e_new);
    rep.iterations = nu + 1;
    // relative criterion: resolving the iterate much beyond its own
    // magnitude only polishes modes the outer model cannot see anyway
    if (rep.last_correction_norm <=
        tol * std::max(u.cwiseAbs().maxCoeff(), 1e-300)) {
      rep.termination = "correction_below_tol";
      break;
    }
  }
  if (rep.termination.empty()) rep.termination = "max_iterations";
  rep.final_energy = e_prev;
  return {u, rep};
}

/// Bound constraints in Euclidean coordinates that keep the transformed
/// correction inside the trust region (averaged-weight construction; the
/// strict max/min variant is exposed for verification).
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> safeguard_bounds(
    const Eigen::SparseMatrix<double>& Tinv, const Eigen::VectorXd& u_half,
    double Delta, bool strict = false)
{
  const Eigen::Index n = Tinv.rows();
  Eigen::VectorXd row_nnz = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < Tinv.outerSize(); ++j)
    for (Eigen::SparseMatrix<double>::InnerIterator it(Tinv, j); it; ++it)
      if (it.value() != 0.0) row_nnz[it.row()] += 1.0;

  Eigen::VectorXd a(n), b(n);
  Eigen::VectorXd count = Eigen::VectorXd::Zero(n);
  std::vector<char> seen(n, 0);
  a.setZero();
  b.setZero();
  for (int j = 0; j < Tinv.outerSize(); ++j)
    for (Eigen::SparseMatrix<double>::InnerIterator it(Tinv, j); it; ++it) {
      double t = it.value();
      if (t == 0.0) continue;
      int i = static_cast<int>(it.row());
      double sgn = t > 0.0 ? 1.0 : -1.0;
      double denom = row_nnz[i] * t;
      double bj = (sgn * Delta - u_half[i]) / denom;
      double aj = (-sgn * Delta - u_half[i]) / denom;
      if (strict) {
        if (!seen[j]) {
          a[j] = aj;
          b[j] = bj;
        } else {
          a[j] = std::max(a[j], aj);
          b[j] = std::min(b[j], bj);
        }
      } else {
        a[j] += aj;
        b[j] += bj;
      }
      seen[j] = 1;
      count[j] += 1.0;
    }
  if (!strict)
    for (Eigen::Index j = 0; j < n; ++j)
      if (count[j] > 0.0) {
        a[j] /= count[j];
        b[j] /= count[j];
      }
  return {a, b};
}

/// TNNMG with monotone-multigrid correction for the (possibly indefinite)
/// trust-region sub-problem in transformed coordinates.  The model carries
/// the merged contact/trust-region bounds; smoothing acts in transformed
/// coordinates, the correction in Euclidean coordinates (via the sparse
/// inverse transform) with safeguard bounds derived from Delta.
inline std::pair<Eigen::VectorXd, SolveReport> trqp_solve(
    const QuadraticModel& model, const Eigen::SparseMatrix<double>& Tinv,
    const std::vector<Eigen::SparseMatrix<double>>& transfers, double Delta,
    double tol, int max_it,
    const Eigen::VectorXd& u0 = Eigen::VectorXd())
{
  model.check_finite();
  for (Eigen::Index i = 0; i < model.lower.size(); ++i)
    if (!(model.lower[i] <= model.upper[i]))
      throw std::invalid_argument("inadmissible trust-region sub-problem");
  SolveReport rep;
  Eigen::VectorXd u = model.clamp(
      u0.size() == model.f.size() ? u0
                                  : Eigen::VectorXd::Zero(model.f.size()));
  double e_prev = model.energy(u);
  rep.energy_per_iteration.push_back(e_prev);
  for (int nu = 0; nu < max_it; ++nu) {
    Eigen::VectorXd u_half = pgs_sweep(model, u);
    double e_half = model.energy(u_half);
    if (e_half > e_prev + 1e-10 * (1.0 + std::abs(e_prev)))
      rep.monotonicity_violations++;

    auto active = truncate(u_half, model.lower, model.upper);
    Eigen::VectorXd rT = -(model.f + model.H * u_half);
    for (Eigen::Index i = 0; i < rT.size(); ++i)
      if (active[i]) rT[i] = 0.0;
    // Euclidean-coordinate truncated defect problem
    auto HqT = detail::truncated_matrix(model.H, active, false);
    Eigen::SparseMatrix<double> Heu = Tinv.transpose() * HqT * Tinv;
    Eigen::VectorXd reu = Tinv.transpose() * rT;
    auto [a, b] = safeguard_bounds(Tinv, u_half, Delta, false);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      a[i] = std::min(a[i], 0.0);
      b[i] = std::max(b[i], 0.0);
    }
    auto chain = detail::galerkin_chain(Heu, transfers);
    Eigen::VectorXd v = detail::mmg_vcycle(chain, transfers, reu, a, b,
                                           static_cast<int>(transfers.size()));
    Eigen::VectorXd vt = Tinv * v;
    for (Eigen::Index i = 0; i < vt.size(); ++i) {
      if (active[i]) vt[i] = 0.0;
      vt[i] =
          std::clamp(vt[i], model.lower[i] - u_half[i], model.upper[i] - u_half[i]);
    }
    double alpha = detail::line_search(model, u_half, vt);
    Eigen::VectorXd u_new = u_half + alpha * vt;

    double e_new = model.energy(u_new);
    if (e_new > e_half + 1e-10 * (1.0 + std::abs(e_half)))
      rep.monotonicity_violations++;
    if (!detail::feasible(u_new, model.lower, model.upper))
      rep.feasibility_violations++;

    rep.last_correction_norm = (u_new - u).cwiseAbs().maxCoeff();
    u = u_new;
    e_prev = e_new;
    rep.energy_per_iteration.push_back(e_new);
    rep.iterations = nu + 1;
    // relative criterion: resolving the iterate much beyond its own
    // magnitude only polishes modes the outer model cannot see anyway
    if (rep.last_correction_norm <=
        tol * std::max(u.cwiseAbs().maxCoeff(), 1e-300)) {
      rep.termination = "correction_below_tol";
      break;
    }
  }
  if (rep.termination.empty()) rep.termination = "max_iterations";
  rep.final_energy = e_prev;
  return {u, rep};
}

}  // namespace ftr
