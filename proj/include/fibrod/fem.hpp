#pragma once

#include <Eigen/Sparse>
#include <array>
#include <stdexcept>
#include <string>
#include <vector>

// Constrained-space plumbing and the shared SPD solve path.
//
// Essential conditions are handled by elimination: a sparse prolongation P
// maps reduced unknowns to the full vector, x_full = P x_red, so reduced
// systems stay symmetric positive definite and every solver sees only free
// unknowns.  Zero rows drop dofs, periodic pairs share one column, and
// general zero-sum constraints eliminate their largest-coefficient dof.

namespace fibrod {

using SpMat = Eigen::SparseMatrix<double>;

// Sum of coef * x[dof] constrained to zero.
struct LinearConstraint {
  std::vector<std::pair<int, double>> terms;
};

class DofElimination {
 public:
  static DofElimination build(
      int n_full, const std::vector<int>& zero_dofs,
      const std::vector<std::array<int, 2>>& periodic_pairs = {},
      const std::vector<LinearConstraint>& constraints = {});

  int full_size() const { return n_full_; }
  int reduced_size() const { return (int)P_.cols(); }
  const SpMat& prolongation() const { return P_; }

  SpMat reduce(const SpMat& A) const;
  Eigen::VectorXd reduce(const Eigen::VectorXd& b) const;
  Eigen::VectorXd expand(const Eigen::VectorXd& x_red) const;

 private:
  SpMat P_;
  int n_full_ = 0;
};

struct SolveOptions {
  enum class Method { Auto, Direct, Cg };
  double tol = 1e-10;        // relative residual target
  Method method = Method::Auto;
  int direct_dof_cap = 200000;
  int max_iterations = 50000;  // cg cap
  int refine_cap = 5;          // direct refinement passes
};

struct SolveResult {
  Eigen::VectorXd x;
  std::string path;  // "direct" or "cg"
  int iterations = 0;
  double relative_residual = 0;
  std::vector<double> residual_history;  // cg relative residuals
};

struct SolverError : std::runtime_error {
  SolverError(const std::string& what, std::vector<double> history = {})
      : std::runtime_error(what), residual_history(std::move(history)) {}
  std::vector<double> residual_history;
};

// Solves A x = b for sparse symmetric positive definite A.  Auto picks a
// direct factorization up to direct_dof_cap unknowns and preconditioned
// conjugate gradients above.  Deterministic and single threaded.
SolveResult solve_spd(const SpMat& A, const Eigen::VectorXd& b,
                      const SolveOptions& opt = {});

}  // namespace fibrod
