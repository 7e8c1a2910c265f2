#include "ftrcontact/qp.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace ftr;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

SparseRM dense_to_sparse(const Eigen::MatrixXd& A)
{
  return SparseRM(A.sparseView());
}

QuadraticModel make_model(const Eigen::MatrixXd& H, const Eigen::VectorXd& f,
                          const Eigen::VectorXd& lo, const Eigen::VectorXd& hi)
{
  QuadraticModel m;
  m.H = dense_to_sparse(H);
  m.f = f;
  m.lower = lo;
  m.upper = hi;
  return m;
}

/// All first-order stationary points found by enumerating the 3^n active-set
/// assignments (free / lower / upper) and solving the free subsystem.
std::vector<Eigen::VectorXd> enumerate_stationary(const Eigen::MatrixXd& H,
                                                  const Eigen::VectorXd& f,
                                                  const Eigen::VectorXd& lo,
                                                  const Eigen::VectorXd& hi,
                                                  bool first_only)
{
  const int n = static_cast<int>(f.size());
  std::vector<Eigen::VectorXd> found;
  std::vector<int> state(n, 0);
  long total = 1;
  for (int i = 0; i < n; ++i) total *= 3;
  const double tol = 1e-9;
  for (long code = 0; code < total; ++code) {
    long c = code;
    bool possible = true;
    std::vector<int> free_idx;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i, c /= 3) {
      state[i] = static_cast<int>(c % 3);
      if (state[i] == 1) {
        if (!std::isfinite(lo[i])) possible = false;
        x[i] = lo[i];
      } else if (state[i] == 2) {
        if (!std::isfinite(hi[i])) possible = false;
        x[i] = hi[i];
      } else {
        free_idx.push_back(i);
      }
    }
    if (!possible) continue;
    const int nf = static_cast<int>(free_idx.size());
    if (nf > 0) {
      Eigen::MatrixXd Hff(nf, nf);
      Eigen::VectorXd rhs(nf);
      for (int a = 0; a < nf; ++a) {
        rhs[a] = -f[free_idx[a]];
        for (int i = 0; i < n; ++i)
          if (state[i] != 0) rhs[a] -= H(free_idx[a], i) * x[i];
        for (int b = 0; b < nf; ++b) Hff(a, b) = H(free_idx[a], free_idx[b]);
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(Hff);
      if (!lu.isInvertible()) continue;
      Eigen::VectorXd xf = lu.solve(rhs);
      for (int a = 0; a < nf; ++a) x[free_idx[a]] = xf[a];
    }
    bool ok = true;
    Eigen::VectorXd g = f + H * x;
    for (int i = 0; i < n && ok; ++i) {
      if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) ok = false;
      if (state[i] == 1 && g[i] < -tol) ok = false;
      if (state[i] == 2 && g[i] > tol) ok = false;
    }
    if (!ok) continue;
    found.push_back(x);
    if (first_only) return found;
  }
  return found;
}

Eigen::SparseMatrix<double> identity_sparse(int n)
{
  Eigen::SparseMatrix<double> I(n, n);
  I.setIdentity();
  return I;
}

/// Standard 1D interpolation chains for the multigrid tests; sizes
/// 3, 7, 15, ... interior nodes.
std::vector<Eigen::SparseMatrix<double>> laplace_transfers(int levels, int n0)
{
  std::vector<Eigen::SparseMatrix<double>> P;
  int n = n0;
  for (int l = 0; l + 1 < levels; ++l) {
    int nf = 2 * n + 1;
    std::vector<Eigen::Triplet<double>> trip;
    for (int j = 0; j < n; ++j) {
      trip.emplace_back(2 * j + 1, j, 1.0);
      trip.emplace_back(2 * j, j, 0.5);
      trip.emplace_back(2 * j + 2, j, 0.5);
    }
    Eigen::SparseMatrix<double> Pl(nf, n);
    Pl.setFromTriplets(trip.begin(), trip.end());
    P.push_back(Pl);
    n = nf;
  }
  return P;
}

Eigen::MatrixXd laplace_matrix(int n)
{
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    A(i, i) = 2.0;
    if (i > 0) A(i, i - 1) = -1.0;
    if (i + 1 < n) A(i, i + 1) = -1.0;
  }
  return A;
}

}  // namespace

TEST_CASE("coordinate rules of the projected Gauss-Seidel sweep")
{
  auto one = [](double q, double g, double lo, double hi) {
    Eigen::MatrixXd H(1, 1);
    H << q;
    Eigen::VectorXd f(1), l(1), u(1);
    f << g;
    l << lo;
    u << hi;
    QuadraticModel m = make_model(H, f, l, u);
    return pgs_sweep(m, Eigen::VectorXd::Zero(1))[0];
  };
  // positive curvature: clamped Newton step
  CHECK(one(2.0, -1.0, -5.0, 5.0) == Catch::Approx(0.5));
  CHECK(one(2.0, -20.0, -5.0, 5.0) == Catch::Approx(5.0));
  // negative curvature: endpoint comparison, tie picks the larger step
  CHECK(one(-1.0, 0.4, -2.0, 2.0) == Catch::Approx(-2.0));
  CHECK(one(-1.0, 0.0, -2.0, 2.0) == Catch::Approx(2.0));
  // zero curvature: bound on the descent side, nothing at a flat coordinate
  CHECK(one(0.0, 1.5, -3.0, 7.0) == Catch::Approx(-3.0));
  CHECK(one(0.0, -1.5, -3.0, 7.0) == Catch::Approx(7.0));
  CHECK(one(0.0, 0.0, -3.0, 7.0) == Catch::Approx(0.0));
  // unbounded descent is an error
  CHECK_THROWS_AS(one(-1.0, 0.2, -kInf, 2.0), UnboundedCoordinateError);
  CHECK_THROWS_AS(one(0.0, -1.0, -3.0, kInf), UnboundedCoordinateError);
}

TEST_CASE("model validation rejects bad input")
{
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(2, 2);
  Eigen::VectorXd f(2), lo(2), hi(2);
  f << 1.0, std::numeric_limits<double>::quiet_NaN();
  lo << -1.0, -1.0;
  hi << 1.0, 1.0;
  QuadraticModel m = make_model(H, f, lo, hi);
  CHECK_THROWS_AS(tnnmg_solve(m, Eigen::VectorXd::Zero(2), {}, 1e-10, 5),
                  std::invalid_argument);
  m.f << 1.0, 1.0;
  m.lower << 2.0, -1.0;  // empty interval
  CHECK_THROWS_AS(tnnmg_solve(m, Eigen::VectorXd::Zero(2), {}, 1e-10, 5),
                  std::invalid_argument);
}

TEST_CASE("convex solver matches the active-set enumeration oracle")
{
  std::mt19937 rng(101);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> nd(2, 12);
  std::uniform_real_distribution<double> bd(0.1, 1.5);
  int total_mono = 0, total_feas = 0;
  for (int s = 0; s < 50; ++s) {
    int n = nd(rng);
    Eigen::MatrixXd B(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) B(i, j) = u(rng);
    Eigen::MatrixXd H = B.transpose() * B + 0.5 * Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd f(n), lo(n), hi(n);
    for (int i = 0; i < n; ++i) {
      f[i] = 2.0 * u(rng);
      lo[i] = (u(rng) > 0.6) ? -kInf : -bd(rng);
      hi[i] = (u(rng) > 0.6) ? kInf : bd(rng);
    }
    auto oracle = enumerate_stationary(H, f, lo, hi, true);
    REQUIRE(oracle.size() == 1);
    QuadraticModel m = make_model(H, f, lo, hi);
    auto [x, rep] = tnnmg_solve(m, Eigen::VectorXd::Zero(n), {}, 1e-13, 300);
    CHECK((x - oracle[0]).cwiseAbs().maxCoeff() < 1e-8);
    total_mono += rep.monotonicity_violations;
    total_feas += rep.feasibility_violations;
  }
  CHECK(total_mono == 0);
  CHECK(total_feas == 0);
}

TEST_CASE("non-convex solver reaches enumerated stationary points")
{
  std::mt19937 rng(211);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> nd(2, 8);
  std::uniform_real_distribution<double> bd(0.2, 1.2);
  int total_mono = 0, total_feas = 0;
  for (int s = 0; s < 25; ++s) {
    int n = nd(rng);
    Eigen::MatrixXd A(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) A(i, j) = u(rng);
    Eigen::MatrixXd H = 0.5 * (A + A.transpose());
    H(0, 0) -= 1.0;  // ensure at least one strongly negative direction
    Eigen::VectorXd f(n), lo(n), hi(n);
    for (int i = 0; i < n; ++i) {
      f[i] = u(rng);
      lo[i] = -bd(rng);
      hi[i] = bd(rng);
    }
    double Delta = std::max(lo.cwiseAbs().maxCoeff(), hi.cwiseAbs().maxCoeff());
    auto stationary = enumerate_stationary(H, f, lo, hi, false);
    REQUIRE(!stationary.empty());
    QuadraticModel m = make_model(H, f, lo, hi);
    auto [x, rep] = trqp_solve(m, identity_sparse(n), {}, Delta, 1e-13, 400);
    double best = kInf;
    for (const auto& p : stationary)
      best = std::min(best, (x - p).cwiseAbs().maxCoeff());
    CHECK(best < 1e-6);
    total_mono += rep.monotonicity_violations;
    total_feas += rep.feasibility_violations;
  }
  CHECK(total_mono == 0);
  CHECK(total_feas == 0);
}

TEST_CASE("multigrid correction contracts on the unconstrained 1D Laplacian")
{
  auto P = laplace_transfers(5, 3);
  int n = 63;
  Eigen::MatrixXd A = laplace_matrix(n);
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) b[i] = u(rng);
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(n, -kInf);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(n, kInf);
  QuadraticModel m = make_model(A, -b, lo, hi);
  double e_star = m.energy(A.ldlt().solve(b));

  auto [x, rep] = tnnmg_solve(m, Eigen::VectorXd::Zero(n), P, 0.0, 12);
  REQUIRE(rep.energy_per_iteration.size() >= 6);
  for (int k = 1; k <= 5; ++k) {
    double e0 = rep.energy_per_iteration[k] - e_star;
    double e1 = rep.energy_per_iteration[k + 1] - e_star;
    if (e0 < 1e-24) break;
    CHECK(e1 / e0 < 0.5);
  }
  CHECK((x - A.ldlt().solve(b)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("multilevel and single-level solutions of an obstacle problem agree")
{
  auto P = laplace_transfers(4, 3);
  int n = 31;
  Eigen::MatrixXd A = laplace_matrix(n);
  std::mt19937 rng(47);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd f(n), lo(n), hi(n);
  for (int i = 0; i < n; ++i) {
    f[i] = u(rng);
    lo[i] = -0.1 - 0.2 * std::abs(u(rng));
    hi[i] = 0.1 + 0.2 * std::abs(u(rng));
  }
  QuadraticModel m = make_model(A, f, lo, hi);
  auto [x_ml, rep_ml] = tnnmg_solve(m, Eigen::VectorXd::Zero(n), P, 1e-13, 300);
  auto [x_sl, rep_sl] = tnnmg_solve(m, Eigen::VectorXd::Zero(n), {}, 1e-13, 300);
  CHECK((x_ml - x_sl).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(rep_ml.monotonicity_violations == 0);
  CHECK(rep_ml.feasibility_violations == 0);

  auto [x_tr, rep_tr] = trqp_solve(m, identity_sparse(n), P, 0.5, 1e-13, 300);
  CHECK((x_tr - x_sl).cwiseAbs().maxCoeff() < 1e-7);
  CHECK(rep_tr.monotonicity_violations == 0);
  CHECK(rep_tr.feasibility_violations == 0);
}

TEST_CASE("safeguard bounds keep the transformed correction in the region")
{
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> dd(0.1, 2.0);
  for (int s = 0; s < 100; ++s) {
    int n = 10;
    double Delta = dd(rng);
    std::vector<Eigen::Triplet<double>> trip;
    std::uniform_int_distribution<int> col(0, n - 1);
    for (int i = 0; i < n; ++i) {
      trip.emplace_back(i, i, 1.0 + std::abs(u(rng)));
      for (int k = 0; k < 2; ++k) {
        int j = col(rng);
        if (j != i) trip.emplace_back(i, j, 2.0 * u(rng));
      }
    }
    Eigen::SparseMatrix<double> Tinv(n, n);
    Tinv.setFromTriplets(trip.begin(), trip.end());
    Eigen::VectorXd ut(n);
    for (int i = 0; i < n; ++i) ut[i] = Delta * u(rng);

    auto [as, bs] = safeguard_bounds(Tinv, ut, Delta, true);
    auto [aa, ba] = safeguard_bounds(Tinv, ut, Delta, false);
    for (int i = 0; i < n; ++i) {
      CHECK(as[i] <= 1e-15);
      CHECK(bs[i] >= -1e-15);
      CHECK(aa[i] <= 1e-15);
      CHECK(ba[i] >= -1e-15);
    }
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = as[i] + (bs[i] - as[i]) * 0.5 * (u(rng) + 1.0);
    CHECK((ut + Tinv * v).cwiseAbs().maxCoeff() <= Delta + 1e-12);
  }
}
