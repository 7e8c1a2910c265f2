#pragma once

// Globally convergent filter trust-region SQP driver for the contact
// minimisation problem, plus the feasibility-restoration fallback and the
// first-order criticality measure.

#include "ftrcontact/hyperelastic.hpp"
#include "ftrcontact/qp.hpp"

#include <iostream>
#include <optional>
#include <sstream>

namespace ftr {

/// Infeasibility measure: largest weak-gap violation.
inline double theta_measure(const Eigen::VectorXd& c)
{
  double s = 0.0;
  for (Eigen::Index i = 0; i < c.size(); ++i) s = std::max(s, -c[i]);
  return s;
}

struct FilterEntry {
  double J = 0.0;
  double theta = 0.0;
};

/// (J, theta) filter with margin xi.  A pair is acceptable iff for every
/// entry it improves the objective or the infeasibility by the margin.
class Filter {
 public:
  explicit Filter(double xi) : xi_(xi) {}

  bool is_acceptable(double J, double theta) const
  {
    for (const auto& e : entries_)
      if (!(J <= e.J - xi_ * theta || theta <= (1.0 - xi_) * e.theta))
        return false;
    return true;
  }

  /// Only pairs with positive infeasibility enter the filter.
  void add_entry(double J, double theta)
  {
    if (!(theta > 0.0))
      throw std::invalid_argument("filter entries require theta > 0");
    entries_.erase(std::remove_if(entries_.begin(), entries_.end(),
                                  [&](const FilterEntry& e) {
                                    return J <= e.J && theta <= e.theta;
                                  }),
                   entries_.end());
    entries_.push_back({J, theta});
  }

  const std::vector<FilterEntry>& entries() const { return entries_; }

 private:
  double xi_;
  std::vector<FilterEntry> entries_;
};

struct FtrConfig {
  double eta1 = 0.1;         // acceptance threshold on rho
  double eta2 = 0.9;         // enlargement threshold on rho
  double kappa_theta = 1e-4; // switching condition constant
  double xi = 1e-5;          // filter margin
  double kappa_scd = 1e-4;   // sufficient-Cauchy-decrease monitor constant
  double Delta0 = 0.5;
  double shrink = 0.25;
  double feas_tol = 1e-12;   // weak-gap noise floor: theta at or below this
                             // is treated as feasible in the step acceptance
  double outer_tol = 1e-7;   // relative H1 norm of the accepted correction
  double inner_tol = 1e-4;   // relative correction tolerance of the sub-problem solver
  int max_outer = 300;
  int max_inner = 200;
  bool lumped = true;        // lumped transform in the Hessian path
  double dn_condition_cap = 1e12;
};

/// rho = (J - J_trial) / (m(0) - m(u)); -infinity when the trial state is
/// orientation-infeasible (infinite energy).
inline double rho_measure(double J, double J_trial, double model_decrease)
{
  if (!std::isfinite(J_trial)) return -std::numeric_limits<double>::infinity();
  return (J - J_trial) / model_decrease;
}

/// First-order criticality: maximal linearised decrease of the transformed
/// gradient over the capped coordinate box
///   -1 <= d_i <= min(1, c_p)  (normal non-mortar components)
///   -1 <= d_i <= 1            (all other free components)
///    d_i = 0                  (Dirichlet dofs).
inline double chi_measure(const Eigen::VectorXd& fT, const Eigen::VectorXd& c,
                          const DofMap& map, const std::vector<char>& fixed)
{
  double val = 0.0;
  int d = map.d;
  for (Eigen::Index i = 0; i < fT.size(); ++i) {
    if (fixed[i]) continue;
    double hi = 1.0;
    if (i < static_cast<Eigen::Index>(d) * map.m1 && i % d == 0)
      hi = std::max(-1.0, std::min(1.0, c[i / d]));
    double di = fT[i] > 0.0 ? -1.0 : hi;
    val += fT[i] * di;
  }
  return std::abs(val);
}

enum class StepKind { accept_objective, accept_infeasibility, reject, restoration };

struct IterationRecord {
  int k = 0;
  double J = 0.0;
  double theta = 0.0;
  double Delta = 0.0;
  double rho = 0.0;
  double chi = 0.0;
  double model_decrease = 0.0;
  double correction_norm = 0.0;   // H1 norm of the Euclidean correction
  StepKind kind = StepKind::reject;
  int inner_iterations = 0;
  double dn_condition = 0.0;
  int flagged_rows = 0;
  bool cauchy_ok = true;          // kappa_scd monitor, logged only
};

enum class FtrStatus { converged, max_iterations, restoration_failed };

struct FtrResult {
  Eigen::VectorXd z;
  FtrStatus status = FtrStatus::max_iterations;
  std::vector<IterationRecord> history;
  double J = 0.0;
  double theta = 0.0;
  double chi = 0.0;
  int restoration_count = 0;
  int filter_size = 0;
  int multiplier_sign_violations = 0;
  int inner_monotonicity_violations = 0;  // summed over all sub-problem solves
  int inner_feasibility_violations = 0;
  long hessian_nnz = 0;           // of the transformed Hessian, last assembly
};

/// Discrete problem data for one refinement level.
struct Problem {
  const Mesh* mesh = nullptr;
  DofMap map;
  Materials materials{};
  Eigen::VectorXd b;              // external load vector
  DirichletData dirichlet;
  std::vector<Eigen::SparseMatrix<double>> transfers;  // dof prolongations
  Eigen::SparseMatrix<double> h1;                      // termination metric
};

namespace detail {

inline double inf_row_norm(const Eigen::SparseMatrix<double>& A)
{
  Eigen::VectorXd s = Eigen::VectorXd::Zero(A.rows());
  for (int j = 0; j < A.outerSize(); ++j)
    for (Eigen::SparseMatrix<double>::InnerIterator it(A, j); it; ++it)
      s[it.row()] += std::abs(it.value());
  return s.size() ? s.maxCoeff() : 0.0;
}

/// Diagnostic Lagrange-multiplier recovery: least-squares solve of
/// grad J + Jc^T lambda = 0 restricted to near-active constraint rows.
/// Counts multipliers with the wrong sign (lambda must be <= 0 for the
/// convention c >= 0 with gradient of the gap pointing outward).
inline int multiplier_sign_violations(const Eigen::VectorXd& grad,
                                      const Eigen::SparseMatrix<double>& Jc,
                                      const Eigen::VectorXd& c,
                                      double active_tol = 1e-6)
{
  std::vector<int> rows;
  for (Eigen::Index p = 0; p < c.size(); ++p)
    if (c[p] < active_tol) rows.push_back(static_cast<int>(p));
  if (rows.empty()) return 0;
  Eigen::MatrixXd A(Jc.cols(), rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k)
    A.col(k) = Eigen::VectorXd(Jc.row(rows[k]).transpose());
  Eigen::VectorXd lambda = A.colPivHouseholderQr().solve(-grad);
  int bad = 0;
  for (Eigen::Index k = 0; k < lambda.size(); ++k)
    if (lambda[k] > 1e-6 * (1.0 + lambda.cwiseAbs().maxCoeff())) bad++;
  return bad;
}

}  // namespace detail

/// Trust-region Gauss-Newton descent on psi(z) = sum max(0, -c_p)^2 until the
/// sub-problem is admissible at Delta0 and the pair is filter-acceptable.
inline bool restore_feasibility(const Problem& pr, Eigen::VectorXd& z,
                                const Filter& filter, const FtrConfig& cfg,
                                int* iterations_out = nullptr,
                                FtrResult* stats = nullptr)
{
  const Mesh& mesh = *pr.mesh;
  auto fixed = pr.dirichlet.mask(pr.map.num_dofs());
  double Dr = -1.0;
  int its = 0;
  for (; its < 100; ++its) {
    ContactLinearisation lin = assemble_jacobian(mesh, pr.map, z);
    double J = energy(mesh, pr.map, z, pr.materials, pr.b);
    double th = theta_measure(lin.c);
    // small initial radius: the descent should remove the penetration with
    // near-minimal motion instead of folding the mesh with Delta0-sized steps
    if (Dr < 0.0) Dr = std::min(cfg.Delta0, std::max(1e-6, 2.0 * th));
    if (lin.c.minCoeff() >= -cfg.Delta0 && std::isfinite(J) &&
        (th == 0.0 || filter.is_acceptable(J, th))) {
      if (iterations_out) *iterations_out = its;
      return true;
    }
    Eigen::VectorXd m = (-lin.c).cwiseMax(0.0);
    double psi = m.squaredNorm();
    if (psi == 0.0) break;  // feasible yet not acceptable: give up

    auto Jc = full_jacobian(lin, pr.map.num_dofs());
    QuadraticModel model;
    model.H = SparseRM(2.0 * (Jc.transpose() * Jc).eval());
    model.f = -2.0 * (Jc.transpose() * m);
    model.lower = Eigen::VectorXd::Constant(pr.map.num_dofs(), -Dr);
    model.upper = Eigen::VectorXd::Constant(pr.map.num_dofs(), Dr);
    for (int i = 0; i < pr.map.num_dofs(); ++i)
      if (fixed[i]) model.lower[i] = model.upper[i] = 0.0;
    auto [u, rep] = tnnmg_solve(model, Eigen::VectorXd::Zero(pr.map.num_dofs()),
                                {}, 1e-10, 10);
    if (stats) {
      stats->inner_monotonicity_violations += rep.monotonicity_violations;
      stats->inner_feasibility_violations += rep.feasibility_violations;
    }
    Eigen::VectorXd z_trial = z + u;
    double scale = 1.0;
    while (scale > 1e-8 &&
           !std::isfinite(energy(mesh, pr.map, z + scale * u, pr.materials, pr.b)))
      scale *= 0.5;
    z_trial = z + scale * u;
    double psi_trial;
    try {
      psi_trial = (-assemble_gap(mesh, pr.map, z_trial)).cwiseMax(0.0).squaredNorm();
    } catch (const DegenerateGeometryError&) {
      psi_trial = std::numeric_limits<double>::infinity();
    }
    if (psi_trial < psi * (1.0 - 1e-6)) {
      z = z_trial;
      Dr = std::min(4.0 * Dr, 1e3 * cfg.Delta0);
    } else {
      Dr *= 0.25;
      if (Dr < 1e-12) break;  // stagnation with psi > 0
    }
  }
  if (iterations_out) *iterations_out = its;
  return false;
}

/// Filter trust-region SQP loop.  Starts from z0 (Dirichlet values applied),
/// returns the final deformed configuration and the iteration history.
inline FtrResult ftr_solve(const Problem& pr, Eigen::VectorXd z0,
                           const FtrConfig& cfg, std::ostream* log = nullptr)
{
  const Mesh& mesh = *pr.mesh;
  const DofMap& map = pr.map;
  const int n = map.num_dofs();
  const int d = map.d;
  auto fixed = pr.dirichlet.mask(n);

  FtrResult res;
  Eigen::VectorXd z = z0;
  pr.dirichlet.apply(z);
  Filter filter(cfg.xi);
  double Delta = cfg.Delta0;

  double J = energy(mesh, map, z, pr.materials, pr.b);
  if (!std::isfinite(J))
    throw OrientationError("initial iterate violates orientation");

  for (int k = 0; k < cfg.max_outer; ++k) {
    IterationRecord rec;
    rec.k = k;
    rec.Delta = Delta;
    rec.J = J;

    ContactLinearisation lin = assemble_jacobian(mesh, map, z);
    double th = theta_measure(lin.c);
    rec.theta = th;
    rec.flagged_rows =
        static_cast<int>(std::count(lin.flagged.begin(), lin.flagged.end(), 1));

    DecouplingTransform tr = build_transform(lin, d, n, cfg.lumped);
    rec.dn_condition = dn_condition_estimate(tr);

    Eigen::VectorXd grad = gradient(mesh, map, z, pr.materials, pr.b, pr.dirichlet);
    Eigen::VectorXd fT = transform_gradient(tr, grad);
    for (int i = 0; i < n; ++i)
      if (fixed[i]) fT[i] = 0.0;
    rec.chi = chi_measure(fT, lin.c, map, fixed);

    // restoration when the trust-region sub-problem is inadmissible
    if (lin.c.minCoeff() < -Delta) {
      if (th > 0.0) filter.add_entry(J, th);
      rec.kind = StepKind::restoration;
      res.history.push_back(rec);
      res.restoration_count++;
      if (log) *log << "k=" << k << " restoration, min c=" << lin.c.minCoeff()
                    << " Delta=" << Delta << "\n";
      if (!restore_feasibility(pr, z, filter, cfg, nullptr, &res)) {
        res.status = FtrStatus::restoration_failed;
        break;
      }
      Delta = cfg.Delta0;
      J = energy(mesh, map, z, pr.materials, pr.b);
      continue;
    }

    Eigen::SparseMatrix<double> H = hessian(mesh, map, z, pr.materials, pr.dirichlet);
    Eigen::SparseMatrix<double> HT = transform_hessian(tr, H);
    res.hessian_nnz = HT.nonZeros();

    QuadraticModel model;
    model.H = SparseRM(HT);
    model.f = fT;
    model.lower = Eigen::VectorXd::Constant(n, -Delta);
    model.upper = Eigen::VectorXd::Constant(n, Delta);
    for (int p = 0; p < map.m1; ++p)
      model.upper[p * d] = std::min(Delta, lin.c[p]);
    for (int i = 0; i < n; ++i)
      if (fixed[i]) model.lower[i] = model.upper[i] = 0.0;

    auto [ut, rep] = trqp_solve(model, tr.Tinv, pr.transfers, Delta,
                                cfg.inner_tol, cfg.max_inner);
    rec.inner_iterations = rep.iterations;
    res.inner_monotonicity_violations += rep.monotonicity_violations;
    res.inner_feasibility_violations += rep.feasibility_violations;

    if (cfg.lumped && map.m1 > 0) {
      // The lumped and exact transforms differ only in the contact-normal
      // components, so the sub-problem's curvature error is confined to that
      // small subspace.  One block pass with the exact reduced operator
      // (m1 x m1, built from m1 Hessian products) removes it; without this
      // the outer loop limps along the polluted modes at a rate near one.
      Eigen::MatrixXd W(n, map.m1);
      for (int p = 0; p < map.m1; ++p) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
        e[p * d] = 1.0;
        W.col(p) = to_euclidean(tr, e);
        for (int i = 0; i < n; ++i)
          if (fixed[i]) W(i, p) = 0.0;
      }
      Eigen::MatrixXd Ann = W.transpose() * (H * W).eval();
      Eigen::VectorXd ucur = to_euclidean(tr, ut);
      for (int i = 0; i < n; ++i)
        if (fixed[i]) ucur[i] = 0.0;
      Eigen::VectorXd r = transform_gradient(tr, grad + H * ucur);
      Eigen::VectorXd delta = Eigen::VectorXd::Zero(map.m1);
      for (int sweep = 0; sweep < 100; ++sweep) {
        double change = 0.0;
        for (int p = 0; p < map.m1; ++p) {
          double app = Ann(p, p);
          if (app <= 0.0) continue;
          double g = r[p * d] + Ann.row(p).dot(delta);
          double lo = model.lower[p * d] - ut[p * d];
          double hi = model.upper[p * d] - ut[p * d];
          double dnew = std::clamp(delta[p] - g / app, lo, hi);
          change = std::max(change, std::abs(dnew - delta[p]));
          delta[p] = dnew;
        }
        if (change < 1e-14) break;
      }
      for (int p = 0; p < map.m1; ++p) ut[p * d] += delta[p];
    }

    Eigen::VectorXd u = to_euclidean(tr, ut);
    for (int i = 0; i < n; ++i)
      if (fixed[i]) u[i] = 0.0;
    // quality of the step is judged against the untransformed quadratic
    // model; the lumped transform only approximates the sub-problem, so
    // measuring the decrease through it would corrupt rho at every radius
    double lin_term = grad.dot(u);
    double quad_term = u.dot(H * u);
    double model_decrease = -(lin_term + 0.5 * quad_term);
    if (th <= cfg.feas_tol && lin_term < 0.0 && quad_term > 0.0 &&
        -lin_term / quad_term < 1.0) {
      // the approximate sub-problem overshot along a direction whose true
      // curvature is higher than modelled; the linear term is exact, so a
      // scalar minimisation along the step restores a proper descent step
      // (shortening keeps the bounds feasible because no gap bound is
      // negative at a feasible iterate)
      double alpha = -lin_term / quad_term;
      u *= alpha;
      ut *= alpha;
      model_decrease = -(alpha * lin_term + 0.5 * alpha * alpha * quad_term);
    }
    rec.model_decrease = model_decrease;

    double HTnorm = detail::inf_row_norm(HT);
    double cauchy_ref = cfg.kappa_scd * rec.chi *
                        std::min(HTnorm > 0.0 ? rec.chi / HTnorm : Delta, Delta);
    rec.cauchy_ok = model_decrease >= cauchy_ref - 1e-12;
    Eigen::VectorXd z_trial = z + u;
    double J_trial = energy(mesh, map, z_trial, pr.materials, pr.b);
    if (cfg.lumped && !std::isfinite(J_trial)) {
      // a folded trial state means the lumped sub-problem mismodelled a
      // large step badly enough to leave the energy domain; re-solve this
      // one step with the exact transform (the gradient path and the bounds
      // are shared, only the Hessian congruence differs)
      DecouplingTransform tre = build_transform(lin, d, n, false);
      QuadraticModel exact_model;
      exact_model.H = SparseRM(transform_hessian(tre, H));
      exact_model.f = fT;
      exact_model.lower = model.lower;
      exact_model.upper = model.upper;
      auto [ute, repe] = trqp_solve(exact_model, tre.Tinv, pr.transfers, Delta,
                                    cfg.inner_tol, cfg.max_inner);
      rec.inner_iterations += repe.iterations;
      res.inner_monotonicity_violations += repe.monotonicity_violations;
      res.inner_feasibility_violations += repe.feasibility_violations;
      ut = ute;
      u = to_euclidean(tre, ute);
      for (int i = 0; i < n; ++i)
        if (fixed[i]) u[i] = 0.0;
      z_trial = z + u;
      J_trial = energy(mesh, map, z_trial, pr.materials, pr.b);
    }
    // the quadratic model cannot see the orientation barrier of the stored
    // energy; a trial state with folded elements is halved back into the
    // energy domain and left to the filter to judge (a partial step removes
    // a proportional part of the penetration, so it remains a useful
    // infeasibility-reducing candidate)
    for (int bt = 0; bt < 30 && !std::isfinite(J_trial); ++bt) {
      u *= 0.5;
      ut *= 0.5;
      z_trial = z + u;
      J_trial = energy(mesh, map, z_trial, pr.materials, pr.b);
    }
    if (std::isfinite(J_trial)) {
      lin_term = grad.dot(u);
      quad_term = u.dot(H * u);
      model_decrease = -(lin_term + 0.5 * quad_term);
      rec.model_decrease = model_decrease;
    }
    double th_trial;
    try {
      th_trial = std::isfinite(J_trial)
                     ? theta_measure(assemble_gap(mesh, map, z_trial))
                     : std::numeric_limits<double>::infinity();
    } catch (const DegenerateGeometryError&) {
      th_trial = std::numeric_limits<double>::infinity();
    }

    double rho = model_decrease > 0.0
                     ? rho_measure(J, J_trial, model_decrease)
                     : -std::numeric_limits<double>::infinity();
    rec.rho = rho;
    rec.correction_norm = h1_norm(pr.h1, u);

    bool acceptable = std::isfinite(J_trial) &&
                      filter.is_acceptable(J_trial, th_trial) &&
                      (J_trial <= J - cfg.xi * th_trial ||
                       th_trial <= (1.0 - cfg.xi) * th);
    bool switching = model_decrease >= cfg.kappa_theta * th * th;

    bool accepted = false;
    if (!acceptable) {
      rec.kind = StepKind::reject;
      Delta = cfg.shrink * std::min(ut.cwiseAbs().maxCoeff(), Delta);
    } else if (switching && rho < cfg.eta1) {
      rec.kind = StepKind::reject;
      Delta = cfg.shrink * std::min(ut.cwiseAbs().maxCoeff(), Delta);
    } else if (!switching && th > cfg.feas_tol) {
      filter.add_entry(J, th);
      rec.kind = StepKind::accept_infeasibility;
      accepted = true;
    } else if (!switching) {
      // feasible point with no usable model decrease: plain rejection
      rec.kind = StepKind::reject;
      Delta = cfg.shrink * std::min(ut.cwiseAbs().maxCoeff(), Delta);
    } else {
      rec.kind = StepKind::accept_objective;
      accepted = true;
    }

    res.history.push_back(rec);
    if (log)
      *log << "k=" << k << " J=" << J << " theta=" << th << " Delta=" << rec.Delta
           << " rho=" << rho << " chi=" << rec.chi << " md=" << model_decrease
           << " Jt=" << J_trial << " tht=" << th_trial
           << " unorm=" << ut.cwiseAbs().maxCoeff()
           << (accepted ? " accept" : " reject")
           << (rec.cauchy_ok ? "" : " [cauchy-monitor]")
           << (rec.dn_condition > cfg.dn_condition_cap ? " [ill-conditioned DN]"
                                                       : "")
           << "\n";

    if (accepted) {
      z = z_trial;
      J = J_trial;
      double rel = rec.correction_norm / std::max(1.0, h1_norm(pr.h1, z));
      if (rel < cfg.outer_tol) {
        res.status = FtrStatus::converged;
        res.chi = rec.chi;
        break;
      }
    } else if (Delta < 1e-15) {
      // trust region collapsed; the iterate is as converged as it will get
      res.status = FtrStatus::converged;
      res.chi = rec.chi;
      break;
    }
  }

  res.z = z;
  res.J = energy(mesh, map, z, pr.materials, pr.b);
  try {
    ContactLinearisation lin = assemble_jacobian(mesh, map, z);
    res.theta = theta_measure(lin.c);
    DecouplingTransform tr = build_transform(lin, d, n, false);
    Eigen::VectorXd grad = gradient(mesh, map, z, pr.materials, pr.b, pr.dirichlet);
    Eigen::VectorXd fT = transform_gradient(tr, grad);
    for (int i = 0; i < n; ++i)
      if (fixed[i]) fT[i] = 0.0;
    res.chi = chi_measure(fT, lin.c, map, fixed);
    res.multiplier_sign_violations = detail::multiplier_sign_violations(
        grad, full_jacobian(lin, n), lin.c);
  } catch (const std::exception&) {
    // final diagnostics are best-effort
  }
  res.filter_size = static_cast<int>(filter.entries().size());
  return res;
}

}  // namespace ftr
