#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

// Elasticity tensors in Mandel form.
//
// Symmetric 3x3 tensors are flattened to 6-vectors
//
//     (T11, T22, T33, sqrt(2)*T23, sqrt(2)*T13, sqrt(2)*T12),
//
// so the Euclidean dot product of two Mandel vectors equals the Frobenius
// product of the tensors.  A fourth-order stiffness with minor and major
// symmetries becomes a symmetric 6x6 matrix acting on these vectors, and its
// eigenvalues are exactly the coercivity and boundedness constants of the
// quadratic form on symmetric matrices.  Nothing downstream ever unpacks
// index quadruples; every bilinear form in the solvers is a 6-vector product.

namespace fibrod {

using Mandel6 = Eigen::Matrix<double, 6, 6>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

// Region tag shared by meshes and piecewise material laws.
enum class Region { Fiber = 0, Matrix = 1 };

Vec6 to_mandel(const Eigen::Matrix3d& T);
Eigen::Matrix3d from_mandel(const Vec6& v);

// contract(C, E, K) = mandel(E) . C mandel(K) = sum_ijkl C_ijkl E_ij K_kl.
double contract(const Mandel6& C, const Eigen::Matrix3d& E,
                const Eigen::Matrix3d& K);

// Isotropic stiffness 2*mu*I + lambda*e*e^T with e = mandel(identity).
// Eigenvalues are 3*lambda + 2*mu (trace direction) and 2*mu (deviatoric,
// multiplicity 5).  Requires mu > 0 and 3*lambda + 2*mu > 0.
Mandel6 make_isotropic(double lambda, double mu);

struct OrthotropicConstants {
  double E1, E2, E3;        // axial moduli
  double nu12, nu13, nu23;  // nu_ij = -eps_jj / eps_ii under uniaxial sigma_ii
  double G23, G13, G12;     // shear moduli
};

// Stiffness obtained by inverting the engineering compliance matrix.
// Throws std::invalid_argument when the constants do not yield a positive
// definite compliance.
Mandel6 make_orthotropic(const OrthotropicConstants& c);

// Pointwise material law C(x, y).  The in-section cell coordinate y only
// matters for cell-oscillating laws; everything else ignores it.  Dependence
// flags are declared up front because they drive caching in the solvers:
// cross-section condensation is reused across slices only when the law does
// not depend on x3, and cell blocks are reused across macro points only when
// it does not depend on x at all.
class ElasticityTensorField {
 public:
  using Evaluator = std::function<Mandel6(
      const Eigen::Vector3d& x, const Eigen::Vector2d& y, Region r)>;

  static ElasticityTensorField constant(const Mandel6& C);
  static ElasticityTensorField piecewise(const Mandel6& fiber,
                                         const Mandel6& matrix);
  static ElasticityTensorField from_function(Evaluator f, bool x3_dependent,
                                             bool x_dependent,
                                             bool y_dependent);

  Mandel6 eval(const Eigen::Vector3d& x, const Eigen::Vector2d& y,
               Region r) const;

  // Convenience overload for section-plane evaluation (y = 0).
  Mandel6 eval_section(const Eigen::Vector2d& xprime, double x3,
                       Region r) const;

  bool x3_dependent() const { return x3_dep_; }
  bool x_dependent() const { return x_dep_; }
  bool y_dependent() const { return y_dep_; }

 private:
  ElasticityTensorField() = default;

  Evaluator f_;
  Mandel6 fiber_ = Mandel6::Zero();
  Mandel6 matrix_ = Mandel6::Zero();
  bool has_function_ = false;
  bool x3_dep_ = false;
  bool x_dep_ = false;
  bool y_dep_ = false;
};

struct TensorReport {
  double m_est = 0;             // smallest eigenvalue over all samples
  double sup_est = 0;           // largest eigenvalue over all samples
  double symmetry_defect = 0;   // max |C - C^T|_inf over all samples
  double periodicity_defect = 0;  // y-laws only: max |C(y) - C(y + e_a)|_inf
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

// Samples the law on a deterministic grid plus seeded random points inside
// the box [x_lo, x_hi] (and the unit cell, for y-dependent laws), in both
// regions, and checks symmetry, coercivity and y-periodicity.
TensorReport check_admissible(const ElasticityTensorField& C,
                              const Eigen::Vector3d& x_lo,
                              const Eigen::Vector3d& x_hi);

}  // namespace fibrod
