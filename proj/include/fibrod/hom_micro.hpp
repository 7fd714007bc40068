#pragma once

#include <Eigen/Dense>
#include <functional>

#include "fibrod/fem.hpp"
#include "fibrod/mesh.hpp"
#include "fibrod/rod_micro.hpp"
#include "fibrod/tensors.hpp"

// Heterogeneous solves on the periodic fiber array.
//
// This family keeps the physical strain; the cell size eps enters through the
// eps^2 stiffness weight on the matrix, the eps factor on the in-plane load
// components, and the x' -> cell coordinate of the coefficients.  The scaled
// rod assembler delivers exactly that when run with the identity strain
// scaling, so one assembly path serves both families.

namespace fibrod {

// Cell coordinate of an in-plane point: the offset from the center of the
// containing eps-cell, in units of eps.  Points outside (-l, l)^2 fold into
// the nearest boundary cell.  Requires eps = 2 l / k for an integer k.
Eigen::Vector2d fold_to_cell(const Eigen::Vector2d& xp, double half_width,
                             double eps);

struct HomMicroProblem {
  const ExtrudedMesh* mesh = nullptr;  // extruded periodic-array section
  double half_width = 0.5;             // omega = (-l, l)^2
  double eps = 0;                      // cell size, eps = 2 l / k
  // Coefficients sampled at (x, y), y the cell coordinate of x'.
  std::function<Mandel6(const Eigen::Vector3d&, const Eigen::Vector2d&,
                        Region)>
      stiffness;
  std::function<Eigen::Vector3d(const Eigen::Vector3d&, const Eigen::Vector2d&,
                                Region)>
      load;
  // Set when the stiffness depends on (x, y) beyond the region split.
  bool stiffness_varies = false;
};

struct HomMicroSolution {
  double eps = 0;
  // Underlying solve with identity strain scaling and the eps^2 matrix
  // weight; carries the nodal field, energy, work and solver record.
  RodMicroSolution base;
  // A priori family diagnostics.
  double u3_l2 = 0;          // ||u_3||_L2(Omega)
  double eps_u_h1 = 0;       // eps ||u||_H1(Omega)
  double strain_energy = 0;  // int (chi_F + eps^2 chi_M) |E u|^2
  double fiber_volume = 0;   // int_Omega chi_F dx, exact prism measure
};

// Solves the clamped heterogeneous problem
//   int (chi_F + eps^2 chi_M) C(x, x'/eps) E u . E phi
//     = int eps f_a(x, x'/eps) phi_a + f_3(x, x'/eps) phi_3.
HomMicroSolution solve_hom_micro(const HomMicroProblem& pb,
                                 const SolveOptions& opt = {});

// int_Omega u[component](x) phi(x, y(x')) dx with tri3 x gauss2 prism
// quadrature; the pairing functional of two-scale convergence tests.
double two_scale_pairing(
    const ExtrudedMesh& m, double half_width, double eps,
    const Eigen::VectorXd& u, int component,
    const std::function<double(const Eigen::Vector3d&, const Eigen::Vector2d&)>&
        phi);

// Fiber averages of eps * d1 u_2 per cell and layer.  The in-plane response
// is of order 1/eps, so the eps-weighted gradient is the bounded quantity
// whose cell fiber mean approximates the limit rotation theta.  The approach
// is slow: the per-cell tilt field that carries the rotation must die out
// near the clamped end planes over a length of order eps, which suppresses
// the diagnostic until eps is well below the rod length.
struct CellTwistCurves {
  std::vector<double> x3;                // layer midpoints
  std::vector<Eigen::Vector2d> centers;  // cell centers, row-major lattice
  Eigen::MatrixXd theta;                 // layers x cells
};
CellTwistCurves hom_twist_curves(const HomMicroSolution& sol,
                                 double half_width);

}  // namespace fibrod
