#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "fibrod/cross_section.hpp"
#include "fibrod/fem.hpp"
#include "fibrod/mesh.hpp"
#include "fibrod/tensors.hpp"

// One dimensional limit of the slender fiber-matrix problem.
//
// The limit displacement is a Bernoulli-Navier field over the whole section,
//   u_a = xi_a(x3),   u3 = xi3(x3) - x_a xi_a'(x3),
// augmented on the matrix by an axial corrector z3, plus a twist theta and
// the condensed section correctors of cross_section.hpp.  The beam energy is
// int_I G^T Q(x3) G with macro slots G = (xi3', xi1'', xi2'', theta') and Q
// the condensed fiber form; the matrix energy only involves z and decouples
// from the beam.  Loads integrate over the whole section: writing
// P_i = int_omega f_i and S_a = int_omega x_a f3, the beam right hand side is
// int_I P_a xi_a + P3 xi3 - S_a xi_a', the twist is unloaded, and the matrix
// corrector of each slice is loaded by f3 alone.
//
// Discretization: xi_a are clamped Hermite cubics, xi3 and theta clamped P1,
// all on a uniform grid with n3 elements; element integrals use gauss3.
// Beam dofs are 6 per grid node in the slot order
//   (xi1, xi1', xi2, xi2', xi3, theta).

namespace fibrod {

struct RodLimitProblem {
  const SectionMesh* section = nullptr;
  double length = 1.0;
  int n3 = 64;
  // Sampled at fixed-domain points (x1, x2, x3) with the region of the
  // enclosing triangle.
  std::function<Mandel6(const Eigen::Vector3d&, Region)> stiffness;
  std::function<Eigen::Vector3d(const Eigen::Vector3d&, Region)> load;
  // Cross sections are condensed once when false, per quadrature slice when
  // true.
  bool stiffness_x3_dependent = false;
};

struct RodLimitSolution {
  const SectionMesh* section = nullptr;
  double length = 0.0;
  int n3 = 0;
  Eigen::VectorXd beam;  // 6 * (n3 + 1) nodal dofs

  // One condensed section when the law ignores x3, otherwise one per
  // quadrature slice in element-major order with slice_x3 holding the
  // quadrature abscissae.
  std::vector<CondensedSection> sections;
  std::vector<double> slice_x3;

  double energy = 0.0;
  double work = 0.0;
  std::string solver_path;
  int iterations = 0;
};

RodLimitSolution solve_rod_limit(const RodLimitProblem& pb,
                                 const SolveOptions& opt = {});

// Same unknowns without the Schur condensation: the beam dofs and the cell
// fields of every quadrature slice assembled into one definite system.
// Returns the beam dof vector; agreement with solve_rod_limit validates the
// elimination.
Eigen::VectorXd solve_rod_limit_monolithic(const RodLimitProblem& pb,
                                           const SolveOptions& opt = {});

// Beam state at one axial position.
struct BeamSample {
  double xi1 = 0, xi1p = 0, xi1pp = 0;
  double xi2 = 0, xi2p = 0, xi2pp = 0;
  double xi3 = 0, xi3p = 0;
  double theta = 0, thetap = 0;
};

BeamSample eval_beam(const RodLimitSolution& sol, double x3);

// Macro slots G = (a, b1, b2, t) of the condensed section at one sample.
Eigen::Vector4d macro_slots(const BeamSample& s);

// Limit fiber strain at a section point of fiber triangle `tri` and axial
// position x3, with the cell correctors reconstructed from the condensation
// generators.  For an x3 dependent law the position must coincide with a
// stored quadrature slice.
Vec6 fiber_limit_strain(const RodLimitSolution& sol, int tri,
                        const Eigen::Vector2d& point, double x3);

// Matrix corrector of one slice: degenerate in-plane elasticity on the
// matrix triangles with every vertex of the fiber closure clamped and the
// outer boundary free, loaded by g zbar_3.  Returns the full nodal vector,
// 3 dofs per section vertex.
Eigen::VectorXd solve_matrix_corrector(
    const SectionMesh& mesh, const SectionStiffness& stiffness,
    const std::function<double(const Eigen::Vector2d&)>& g,
    const SolveOptions& opt = {});

}  // namespace fibrod
