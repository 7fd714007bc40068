#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "fibrod/fem.hpp"

using namespace fibrod;

namespace {

SpMat identity(int n) {
  SpMat I(n, n);
  I.setIdentity();
  return I;
}

// 1D Dirichlet Laplacian on n interior nodes, optionally periodic.
SpMat laplacian(int n, bool wrap = false) {
  std::vector<Eigen::Triplet<double>> t;
  for (int i = 0; i < n; ++i) {
    t.emplace_back(i, i, 2.0);
    if (i + 1 < n) {
      t.emplace_back(i, i + 1, -1.0);
      t.emplace_back(i + 1, i, -1.0);
    }
  }
  if (wrap) {
    t.emplace_back(0, n - 1, -1.0);
    t.emplace_back(n - 1, 0, -1.0);
  }
  SpMat A(n, n);
  A.setFromTriplets(t.begin(), t.end());
  return A;
}

// 2D five-point Laplacian; incomplete Cholesky is inexact here, so cg has
// to iterate.
SpMat grid_laplacian(int n) {
  auto id = [n](int i, int j) { return i * n + j; };
  std::vector<Eigen::Triplet<double>> t;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      t.emplace_back(id(i, j), id(i, j), 4.0);
      if (i + 1 < n) {
        t.emplace_back(id(i, j), id(i + 1, j), -1.0);
        t.emplace_back(id(i + 1, j), id(i, j), -1.0);
      }
      if (j + 1 < n) {
        t.emplace_back(id(i, j), id(i, j + 1), -1.0);
        t.emplace_back(id(i, j + 1), id(i, j), -1.0);
      }
    }
  SpMat A(n * n, n * n);
  A.setFromTriplets(t.begin(), t.end());
  return A;
}

}  // namespace

TEST_CASE("no constraints gives the identity prolongation") {
  DofElimination elim = DofElimination::build(5, {});
  CHECK(elim.reduced_size() == 5);
  Eigen::VectorXd x(5);
  x << 1, 2, 3, 4, 5;
  CHECK((elim.expand(x) - x).norm() == 0.0);
}

TEST_CASE("zero dofs disappear from the reduced space") {
  DofElimination elim = DofElimination::build(5, {0, 4});
  CHECK(elim.reduced_size() == 3);
  Eigen::VectorXd x(3);
  x << 7, 8, 9;
  Eigen::VectorXd full = elim.expand(x);
  CHECK(full(0) == 0.0);
  CHECK(full(4) == 0.0);
  CHECK(full(1) == 7.0);
  CHECK(full(3) == 9.0);
}

TEST_CASE("periodic pairs share one unknown") {
  DofElimination elim = DofElimination::build(4, {}, {{{3, 0}}});
  CHECK(elim.reduced_size() == 3);
  Eigen::VectorXd x(3);
  x << 5, 6, 7;
  Eigen::VectorXd full = elim.expand(x);
  CHECK(full(3) == full(0));

  // A zero dof wipes its whole class, whichever member is listed.
  DofElimination z = DofElimination::build(4, {3}, {{{3, 0}}});
  CHECK(z.reduced_size() == 2);
  Eigen::VectorXd y(2);
  y << 1, 2;
  Eigen::VectorXd fz = z.expand(y);
  CHECK(fz(0) == 0.0);
  CHECK(fz(3) == 0.0);

  // Periodic chain closing on itself stays consistent.
  DofElimination chain =
      DofElimination::build(4, {}, {{{0, 1}}, {{1, 2}}, {{2, 0}}});
  CHECK(chain.reduced_size() == 2);
}

TEST_CASE("zero-sum constraint projects out the mean") {
  // Minimizing 1/2 x.x - b.x subject to sum(x) = 0 gives x = b - mean(b).
  const int n = 6;
  LinearConstraint mean;
  for (int i = 0; i < n; ++i) mean.terms.emplace_back(i, 1.0);
  DofElimination elim = DofElimination::build(n, {}, {}, {mean});
  CHECK(elim.reduced_size() == n - 1);

  Eigen::VectorXd b(n);
  b << 3, -1, 4, -1, 5, -9;
  SpMat A = elim.reduce(identity(n));
  SolveResult sol = solve_spd(A, elim.reduce(b));
  Eigen::VectorXd x = elim.expand(sol.x);
  Eigen::VectorXd expect = b.array() - b.mean();
  CHECK((x - expect).norm() <= 1e-12 * b.norm());
}

TEST_CASE("constraints compose with pairs, zeros and each other") {
  const int n = 8;
  LinearConstraint sum05;  // x0 + x5 = 0 after x5 ~ x1 pairing
  sum05.terms = {{0, 1.0}, {5, 1.0}};
  LinearConstraint weighted;  // 2 x2 + x3 - x4 = 0
  weighted.terms = {{2, 2.0}, {3, 1.0}, {4, -1.0}};
  LinearConstraint chained;  // x0 - x3 = 0, interacts with both above
  chained.terms = {{0, 1.0}, {3, -1.0}};
  DofElimination elim = DofElimination::build(
      n, {7}, {{{5, 1}}}, {sum05, weighted, chained});

  std::mt19937 rng(42);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd xr(elim.reduced_size());
    for (int i = 0; i < xr.size(); ++i) xr(i) = g(rng);
    Eigen::VectorXd x = elim.expand(xr);
    CHECK(x(7) == 0.0);
    CHECK(x(5) == x(1));
    CHECK(std::abs(x(0) + x(5)) <= 1e-13);
    CHECK(std::abs(2 * x(2) + x(3) - x(4)) <= 1e-13);
    CHECK(std::abs(x(0) - x(3)) <= 1e-13);
  }

  // Redundant copy of a constraint changes nothing.
  DofElimination redundant = DofElimination::build(
      n, {7}, {{{5, 1}}}, {sum05, weighted, chained, sum05});
  CHECK(redundant.reduced_size() == elim.reduced_size());
}

TEST_CASE("direct solve meets the residual contract") {
  const int n = 50;
  SpMat A = laplacian(n);
  Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(n, -1.0, 2.0);
  SolveResult res = solve_spd(A, b);
  CHECK(res.path == "direct");
  CHECK(res.relative_residual <= 1e-10);
  CHECK((A * res.x - b).norm() <= 1e-10 * b.norm());

  // Galerkin identity against random test vectors.
  std::mt19937 rng(7);
  std::normal_distribution<double> g;
  for (int t = 0; t < 10; ++t) {
    Eigen::VectorXd phi(n);
    for (int i = 0; i < n; ++i) phi(i) = g(rng);
    double lhs = phi.dot(A * res.x), rhs = phi.dot(b);
    CHECK(std::abs(lhs - rhs) <= 1e-9 * (std::abs(rhs) + b.norm() * phi.norm()));
  }
}

TEST_CASE("cg path converges and is deterministic") {
  SpMat A = grid_laplacian(24);
  Eigen::VectorXd b = Eigen::VectorXd::Ones(A.rows());
  SolveOptions opt;
  opt.method = SolveOptions::Method::Cg;
  SolveResult res = solve_spd(A, b, opt);
  CHECK(res.path == "cg");
  CHECK(res.relative_residual <= opt.tol);
  CHECK(res.iterations > 1);
  CHECK((int)res.residual_history.size() == res.iterations);
  CHECK(res.residual_history.back() <= opt.tol);

  SolveResult res2 = solve_spd(A, b, opt);
  CHECK(res.x == res2.x);
  CHECK(res.iterations == res2.iterations);

  // Auto dispatch honours the dof cap.
  SolveOptions capped;
  capped.direct_dof_cap = 100;
  CHECK(solve_spd(A, b, capped).path == "cg");
  CHECK(solve_spd(laplacian(50), Eigen::VectorXd::Ones(50), capped).path ==
        "direct");
}

TEST_CASE("solver failures carry diagnostics") {
  SpMat bad(2, 2);
  bad.insert(0, 0) = 1.0;
  bad.insert(1, 1) = -1.0;
  Eigen::VectorXd b(2);
  b << 1, 1;
  SolveOptions direct;
  direct.method = SolveOptions::Method::Direct;
  CHECK_THROWS_AS(solve_spd(bad, b, direct), SolverError);

  SpMat A = grid_laplacian(24);
  SolveOptions strangled;
  strangled.method = SolveOptions::Method::Cg;
  strangled.max_iterations = 3;
  try {
    solve_spd(A, Eigen::VectorXd::Ones(A.rows()), strangled);
    FAIL("expected SolverError");
  } catch (const SolverError& e) {
    CHECK(e.residual_history.size() == 3);
    CHECK(e.residual_history[2] > 0.0);
  }

  // Zero right-hand side short circuits.
  SolveResult zero = solve_spd(A, Eigen::VectorXd::Zero(A.rows()));
  CHECK(zero.x.norm() == 0.0);
}

TEST_CASE("reduced operators agree with dense projection") {
  const int n = 12;
  LinearConstraint mean;
  for (int i = 2; i < 9; ++i) mean.terms.emplace_back(i, 1.0);
  DofElimination elim =
      DofElimination::build(n, {0, 11}, {{{10, 1}}}, {mean});
  SpMat A = laplacian(n, true);
  SpMat R = elim.reduce(A);
  Eigen::MatrixXd P = Eigen::MatrixXd(elim.prolongation());
  Eigen::MatrixXd dense = P.transpose() * Eigen::MatrixXd(A) * P;
  CHECK((Eigen::MatrixXd(R) - dense).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK((Eigen::MatrixXd(R) - Eigen::MatrixXd(R).transpose())
            .cwiseAbs()
            .maxCoeff() <= 1e-14);
}
