#pragma once

// Scaled three dimensional rod solves on the fixed domain.
//
// One extruded mesh carries a whole family of thin rods: the small parameter
// eps enters only through the strain scaling and through the eps^2 stiffness
// weight on the matrix region, so sweep curves are free of remeshing noise.
// The physical thin rod of cross section eps*omega is recovered afterwards by
// the anisotropic map (x1, x2, x3) -> (eps x1, eps x2, x3) together with
// u_hat_alpha = u_alpha / eps and u_hat_3 = u_3.

#include <Eigen/Dense>

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fibrod/config.hpp"
#include "fibrod/fem.hpp"
#include "fibrod/mesh.hpp"
#include "fibrod/tensors.hpp"

namespace fibrod {

// Scaled strain and scaled gradient of an unscaled displacement gradient
// (grad(i, j) = d_j u_i).  The in-plane block carries 1/eps^2, the mixed
// entries 1/eps and the axial entry stays unscaled; scaled_strain is the
// symmetric part of scaled_gradient.
Eigen::Matrix3d scaled_strain(const Eigen::Matrix3d& grad, double eps);
Eigen::Matrix3d scaled_gradient(const Eigen::Matrix3d& grad, double eps);

// A point inside a prism.  Prism p lives in layer p / num_tris above triangle
// p % num_tris; (a, b) are the barycentric weights of the second and third
// triangle vertex and t in [0, 1] the axial fraction between the two planes
// of the layer.
struct PrismPoint {
  int prism = 0;
  double a = 0, b = 0, t = 0;
};

Eigen::Vector3d prism_location(const ExtrudedMesh& m, const PrismPoint& p);

// P1 evaluation of a nodal 3-vector field (3 unknowns per node).
Eigen::Vector3d field_value(const ExtrudedMesh& m, const Eigen::VectorXd& u,
                            const PrismPoint& p);
Eigen::Matrix3d field_gradient(const ExtrudedMesh& m, const Eigen::VectorXd& u,
                               const PrismPoint& p);

// Nodal interpolation of an analytic displacement field.
Eigen::VectorXd interpolate_nodal(
    const ExtrudedMesh& m,
    const std::function<Eigen::Vector3d(const Eigen::Vector3d&)>& f);

// Norms of nodal fields.  kSliceH1 measures sqrt(int_I ||.||_H1(omega)^2),
// counting only in-plane derivatives.  component selects one displacement
// component, -1 sums over all three.  An empty region means the whole domain.
enum class NormKind { kL2, kH1, kSliceH1 };
double field_norm(const ExtrudedMesh& m, const Eigen::VectorXd& u,
                  NormKind kind, int component = -1,
                  std::optional<Region> region = {});

// Problem data for one scaled solve.  Stiffness and load are evaluated at
// fixed-domain points; callers bake any cell-variable dependence into the
// closures.
struct RodMicroProblem {
  const ExtrudedMesh* mesh = nullptr;
  std::function<Mandel6(const Eigen::Vector3d&, Region)> stiffness;
  std::function<Eigen::Vector3d(const Eigen::Vector3d&, Region)> load;
  // Per-component factors multiplying the load inside the weak form.
  Eigen::Vector3d load_scaling{1.0, 1.0, 1.0};
  // Replaces the eps^2 weight on the matrix region when set.
  std::optional<double> matrix_weight;
  // Enables per-point stiffness evaluation; homogeneous laws are sampled
  // once per region.
  bool stiffness_varies = false;
};

// Builds the problem for a configured tensor field and load, with unit load
// scaling.  Rejects inadmissible stiffness laws.
RodMicroProblem make_rod_micro_problem(const ExtrudedMesh& mesh,
                                       const ElasticityTensorField& C,
                                       const LoadField& f);

// Stiffness matrix and load vector on the unconstrained nodal space, with
// the scaled strain operator and the (chi_F + eps^2 chi_M) weight in place.
struct AssembledSystem {
  SpMat A;
  Eigen::VectorXd b;
};
AssembledSystem assemble_rod_micro(const RodMicroProblem& pb, double eps);

struct RodMicroSolution {
  double eps = 0;
  const ExtrudedMesh* mesh = nullptr;
  Eigen::VectorXd u;    // nodal displacements, clamped planes included
  double energy = 0;    // scaled elastic form at the solution
  double work = 0;      // load functional; equals energy by the Galerkin identity
  double residual = 0;  // relative algebraic residual
  std::string solver_path;
  int iterations = 0;
};

// Solves the clamped scaled problem.  Solver failures propagate.
RodMicroSolution solve_rod_micro(const RodMicroProblem& pb, double eps,
                                 const SolveOptions& opt = {});

// Read-only view of a solution on the physical thin domain.  The solution
// must outlive the view.
class PhysicalFieldView {
 public:
  explicit PhysicalFieldView(const RodMicroSolution& sol);

  double eps() const { return eps_; }
  // (x1, x2, x3) -> (eps x1, eps x2, x3).
  Eigen::Vector3d map_point(const Eigen::Vector3d& fixed_point) const;

  // Displacement at a physical point; locates the containing prism and
  // throws std::out_of_range for points outside the thin rod.
  Eigen::Vector3d value(const Eigen::Vector3d& physical_point) const;

  struct Sample {
    Eigen::Vector3d point;     // physical coordinates
    Eigen::Vector3d value;     // u_hat
    Eigen::Matrix3d gradient;  // physical gradient of u_hat
  };
  // Evaluates u_hat on the prism mapped to physical coordinates.  The
  // gradient is built from the mapped element geometry, not by rescaling
  // fixed-domain quantities, so it can serve as an independent check.
  Sample sample(const PrismPoint& p) const;

 private:
  const ExtrudedMesh* mesh_;
  const Eigen::VectorXd* u_;
  double eps_;
  mutable int hint_tri_ = 0;
};

// Residual of the thin-domain weak form tested against every mapped nodal
// basis field: both sides are reassembled on the physical prisms with the
// load components (eps f_1, eps f_2, f_3), and the residual norm over the
// free unknowns is returned relative to the load norm.
double physical_residual(const RodMicroSolution& sol,
                         const RodMicroProblem& pb);

// Cross-section curves sampled at the layer midpoints.
struct SectionCurves {
  std::vector<double> x3;
  std::vector<Vec6> fiber_strain;   // mean scaled strain over the fiber
  std::vector<Vec6> matrix_strain;  // mean scaled strain over the matrix
  std::vector<Eigen::Vector2d> mean_u12;  // section mean of (u_1, u_2)
  std::vector<double> mean_u3;            // section mean of u_3
  // Fiber mean of the in-plane rotation (d_1 u_2 - d_2 u_1) / (2 eps); the
  // symmetric companion term is a strain entry whose scaled mean vanishes in
  // the limit, so the rotation isolates the twist angle.
  std::vector<double> fiber_twist;
};
SectionCurves cross_section_averages(const RodMicroSolution& sol);

// The six a priori diagnostics of the scaled family.
struct AprioriNorms {
  double strain_fiber = 0;       // ||E^eps u||_L2 on the fiber
  double grad_fiber = 0;         // ||eps H^eps u||_L2 on the fiber
  double h1_fiber = 0;           // ||u||_H1 on the fiber
  double grad_matrix = 0;        // ||eps H^eps u||_L2 on the matrix
  double h1_inplane_matrix = 0;  // ||(u_1, u_2)||_H1 on the matrix
  double u3_slice_matrix = 0;    // ||u_3||_L2(I; H1) on the matrix section

  std::array<double, 6> as_array() const {
    return {strain_fiber,  grad_fiber,        h1_fiber,
            grad_matrix,   h1_inplane_matrix, u3_slice_matrix};
  }
  static const std::array<const char*, 6>& names();
};
AprioriNorms apriori_norms(const RodMicroSolution& sol);

// Squared seminorms entering the matrix-gradient control inequality
//   ||H^eps u||_L2(M) <= c (||E^eps u||_L2(M) + ||H^eps u||_L2(F)).
struct GradientControlTerms {
  double h_matrix_sq = 0;
  double e_matrix_sq = 0;
  double h_fiber_sq = 0;
};
GradientControlTerms gradient_control_terms(const RodMicroSolution& sol);

// Discrete estimate of the constant above on the clamped space of the given
// mesh: the largest generalized Rayleigh quotient of ||H^eps .||^2_M against
// ||E^eps .||^2_M + ||H^eps .||^2_F, computed densely.  Intended for coarse
// meshes; refuses more than 3000 free unknowns.
struct GradientControlEstimate {
  double constant = 0;     // c = sqrt(ratio_bound)
  double ratio_bound = 0;  // largest generalized eigenvalue
  int dofs = 0;
};
GradientControlEstimate estimate_gradient_control(const ExtrudedMesh& mesh,
                                                  double eps);

}  // namespace fibrod
