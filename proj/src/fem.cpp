#include "fibrod/fem.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace fibrod {

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  // Keeps the smaller index as representative for determinism.
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent[b] = a;
  }
};

}  // namespace

DofElimination DofElimination::build(
    int n_full, const std::vector<int>& zero_dofs,
    const std::vector<std::array<int, 2>>& periodic_pairs,
    const std::vector<LinearConstraint>& constraints) {
  UnionFind uf(n_full);
  for (const auto& p : periodic_pairs) uf.unite(p[0], p[1]);

  std::vector<char> zero(n_full, 0);
  for (int d : zero_dofs) zero[uf.find(d)] = 1;
  // A zero dof silences its whole periodic class.
  for (int d = 0; d < n_full; ++d)
    if (zero[uf.find(d)]) zero[d] = 1;

  // Eliminate one representative per constraint, substituting previously
  // eliminated ones first.  expansions[r] expresses x_r over dofs that were
  // still free at elimination time; back substitution resolves chains.
  std::map<int, std::vector<std::pair<int, double>>> expansions;
  std::vector<int> elim_order;
  for (const auto& c : constraints) {
    std::map<int, double> combined;
    for (auto [dof, coef] : c.terms) {
      int r = uf.find(dof);
      if (zero[r]) continue;
      combined[r] += coef;
    }
    // Substitute dofs this constraint shares with earlier eliminations.
    bool changed = true;
    while (changed) {
      changed = false;
      for (auto it = combined.begin(); it != combined.end(); ++it) {
        auto ex = expansions.find(it->first);
        if (ex == expansions.end()) continue;
        double coef = it->second;
        combined.erase(it);
        for (auto [dof, w] : ex->second) combined[dof] += coef * w;
        changed = true;
        break;
      }
    }
    double scale = 0;
    for (auto [dof, coef] : combined) scale = std::max(scale, std::abs(coef));
    for (auto it = combined.begin(); it != combined.end();) {
      if (std::abs(it->second) <= 1e-14 * scale)
        it = combined.erase(it);
      else
        ++it;
    }
    if (combined.empty()) continue;  // redundant constraint

    auto slave = combined.begin();
    for (auto it = combined.begin(); it != combined.end(); ++it)
      if (std::abs(it->second) > std::abs(slave->second)) slave = it;
    int s = slave->first;
    double cs = slave->second;
    std::vector<std::pair<int, double>> expansion;
    for (auto [dof, coef] : combined)
      if (dof != s) expansion.emplace_back(dof, -coef / cs);
    expansions[s] = std::move(expansion);
    elim_order.push_back(s);
  }

  // Later eliminations may appear inside earlier expansions.
  for (auto it = elim_order.rbegin(); it != elim_order.rend(); ++it) {
    auto& expansion = expansions[*it];
    std::map<int, double> flat;
    for (auto [dof, coef] : expansion) {
      auto ex = expansions.find(dof);
      if (ex != expansions.end() && dof != *it)
        for (auto [d2, w2] : ex->second) flat[d2] += coef * w2;
      else
        flat[dof] += coef;
    }
    expansion.assign(flat.begin(), flat.end());
  }

  std::vector<int> reduced(n_full, -1);
  int n_red = 0;
  for (int d = 0; d < n_full; ++d) {
    int r = uf.find(d);
    if (r != d || zero[r] || expansions.count(r)) continue;
    reduced[d] = n_red++;
  }

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(n_full);
  for (int d = 0; d < n_full; ++d) {
    int r = uf.find(d);
    if (zero[r]) continue;
    auto ex = expansions.find(r);
    if (ex == expansions.end()) {
      trips.emplace_back(d, reduced[r], 1.0);
    } else {
      for (auto [dof, coef] : ex->second) trips.emplace_back(d, reduced[dof], coef);
    }
  }

  DofElimination out;
  out.n_full_ = n_full;
  out.P_.resize(n_full, n_red);
  out.P_.setFromTriplets(trips.begin(), trips.end());
  out.P_.makeCompressed();
  return out;
}

SpMat DofElimination::reduce(const SpMat& A) const {
  SpMat R = P_.transpose() * A * P_;
  R.makeCompressed();
  return R;
}

Eigen::VectorXd DofElimination::reduce(const Eigen::VectorXd& b) const {
  return P_.transpose() * b;
}

Eigen::VectorXd DofElimination::expand(const Eigen::VectorXd& x_red) const {
  return P_ * x_red;
}

namespace {

SolveResult solve_direct(const SpMat& A, const Eigen::VectorXd& b,
                         const SolveOptions& opt, double bnorm) {
  Eigen::SimplicialLDLT<SpMat> ldlt;
  ldlt.compute(A);
  // LDLT happily factors indefinite matrices, so inspect the pivots too.
  if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any())
    throw SolverError("direct factorization failed: matrix is not positive "
                      "definite on the reduced space");
  SolveResult res;
  res.path = "direct";
  res.x = ldlt.solve(b);
  for (int pass = 0; pass < opt.refine_cap; ++pass) {
    Eigen::VectorXd r = b - A * res.x;
    res.relative_residual = r.norm() / bnorm;
    if (res.relative_residual <= opt.tol) return res;
    res.x += ldlt.solve(r);
    res.iterations = pass + 1;
  }
  Eigen::VectorXd r = b - A * res.x;
  res.relative_residual = r.norm() / bnorm;
  if (res.relative_residual <= opt.tol) return res;
  throw SolverError(
      "direct solve stalled at relative residual " +
          std::to_string(res.relative_residual) + " after refinement",
      {res.relative_residual});
}

SolveResult solve_cg(const SpMat& A, const Eigen::VectorXd& b,
                     const SolveOptions& opt, double bnorm) {
  Eigen::IncompleteCholesky<double, Eigen::Lower,
                            Eigen::AMDOrdering<int>>
      precond;
  precond.compute(A);
  if (precond.info() != Eigen::Success)
    throw SolverError("incomplete Cholesky preconditioner failed");

  SolveResult res;
  res.path = "cg";
  const int n = (int)A.rows();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd r = b;
  Eigen::VectorXd z = precond.solve(r);
  Eigen::VectorXd p = z;
  double rz = r.dot(z);
  for (int it = 0; it < opt.max_iterations; ++it) {
    Eigen::VectorXd Ap = A * p;
    double alpha = rz / p.dot(Ap);
    x += alpha * p;
    r -= alpha * Ap;
    double rel = r.norm() / bnorm;
    res.residual_history.push_back(rel);
    if (rel <= opt.tol) {
      res.x = std::move(x);
      res.iterations = it + 1;
      res.relative_residual = rel;
      return res;
    }
    z = precond.solve(r);
    double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  throw SolverError("cg did not reach tol " + std::to_string(opt.tol) +
                        " within " + std::to_string(opt.max_iterations) +
                        " iterations",
                    std::move(res.residual_history));
}

}  // namespace

SolveResult solve_spd(const SpMat& A, const Eigen::VectorXd& b,
                      const SolveOptions& opt) {
  if (A.rows() != A.cols() || A.rows() != b.size())
    throw SolverError("solve_spd: dimension mismatch");
  double bnorm = b.norm();
  if (bnorm == 0.0) {
    SolveResult res;
    res.x = Eigen::VectorXd::Zero(b.size());
    res.path = "direct";
    return res;
  }
  bool direct = opt.method == SolveOptions::Method::Direct ||
                (opt.method == SolveOptions::Method::Auto &&
                 A.rows() <= opt.direct_dof_cap);
  return direct ? solve_direct(A, b, opt, bnorm) : solve_cg(A, b, opt, bnorm);
}

}  // namespace fibrod
