#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <string>
#include <vector>

#include "fibrod/cross_section.hpp"
#include "fibrod/fem.hpp"
#include "fibrod/mesh.hpp"
#include "fibrod/tensors.hpp"

// Two-scale limit problem on Omega = omega x (0, L) with the periodic unit
// cell Y = (-1/2, 1/2)^2 attached to every macro point.
//
// Unknowns per macro node:
//   * bending fields u_alpha, Hermite in x3 and multilinear in x', carried as
//     value/slope pairs (u_alpha, s_alpha) with s_alpha = d3 u_alpha,
//   * twist theta and the fiber mean c = avg_D u3, multilinear macro fields,
//   * matrix cell fields u1_alpha, u3 on Y \ D, y-periodic,
//   * fiber correctors (w, v3) on D.
// On the closed fiber disk the cell fields are not independent dofs; they are
// eliminated by substitution:
//   u3       = -y_alpha s_alpha + c,
//   u1_alpha = -y_beta G_beta(u_alpha) + theta * yR_alpha,
// where yR = (-y2, y1) and G_beta is the nodal difference quotient of the
// in-plane macro field (central in the interior, one sided on the in-plane
// boundary of omega).
//
// The energy is a fiber block over Omega x D driven by
// G = (d3 c, d3 s1, d3 s2, d3 theta) together with (w, v3), plus a matrix
// block over Omega x (Y \ D) driven by the cell strain of (u1, u3) and the
// macro strain slots p = (d1 u1, d2 u2, (d2 u1 + d1 u2)/2, d3 u1, d3 u2).
// Cell-level integration reuses the section assemblers, so strain
// conventions are shared with the rod modules.
//
// Essential conditions: u_alpha clamped (value and slope) at both x3 ends,
// theta, c and the matrix u3 zero at both ends, u1_alpha zero at x3 = 0
// (gauge for an additive function of x3).  The fiber correctors satisfy the
// four mean/rotation constraints of the section kernel at every macro node.

namespace fibrod {

struct HomLimitProblem {
  double half_width = 0.5;    // omega = (-l, l)^2
  double length = 1.0;        // x3 in (0, L)
  int nx = 4, ny = 4;         // macro elements per in-plane direction
  int n3 = 8;                 // macro elements along x3
  double fiber_radius = 0.3;  // cell fiber radius, 0 < r < 1/2
  int n_per_cell = 8;         // cell resolution, h_y = 1 / n_per_cell

  // Coefficients at macro point x and cell point y.
  std::function<Mandel6(const Eigen::Vector3d&, const Eigen::Vector2d&, Region)>
      stiffness;
  std::function<Eigen::Vector3d(const Eigen::Vector3d&, const Eigen::Vector2d&)>
      load;

  // When false the stiffness is sampled once at a reference macro point and
  // the cell blocks are shared by every element.  When true they are rebuilt
  // at each macro quadrature point, which is intended for small grids only.
  bool stiffness_x_dependent = false;
};

// Dof bookkeeping of the tensorized space.  Macro nodes are numbered
// (iz * nyn + iy) * nxn + ix; the block per node is
// [6 macro | 3 per free matrix vertex | 3 per fiber vertex] with macro slots
// (u1, s1, u2, s2, theta, c).  Periodic cell vertices share the dofs of their
// canonical representative, interface and fiber vertices carry no matrix dof.
struct HomLimitSpace {
  HomLimitProblem pb;
  SectionMesh cell;
  FiberDofMap fiber;

  int nxn = 0, nyn = 0, nzn = 0;  // macro nodes per direction
  double hx = 0, hy = 0, hz = 0;  // macro element extents

  std::vector<int> canon;       // canonical vertex under periodicity
  std::vector<char> in_fiber;   // vertex touched by a fiber triangle
  std::vector<int> ridx;        // free matrix index per vertex, -1 otherwise
  std::vector<int> ifc;         // interface index per vertex, -1 otherwise
  std::vector<int> free_verts;  // canonical vertex per free matrix index
  std::vector<int> ifc_verts;   // vertex per interface index
  int nm = 0;                   // number of free matrix vertices
  int ni = 0;                   // number of interface vertices
  int node_block = 0;           // 6 + 3 * nm + fiber.num_dofs()

  int num_nodes() const { return nxn * nyn * nzn; }
  int num_dofs() const { return num_nodes() * node_block; }
  int node(int ix, int iy, int iz) const { return (iz * nyn + iy) * nxn + ix; }
  int macro_dof(int n, int slot) const { return n * node_block + slot; }
  int matrix_dof(int n, int r, int comp) const {
    return n * node_block + 6 + 3 * r + comp;
  }
  int fiber_dof(int n, int j) const { return n * node_block + 6 + 3 * nm + j; }
  Eigen::Vector3d node_point(int ix, int iy, int iz) const;
};

HomLimitSpace build_hom_limit_space(const HomLimitProblem& pb);

// Assembled operator in the full node-block layout together with the
// elimination of essential conditions and kernel constraints.  An infeasible
// constraint elimination signals a space-construction bug.
struct HomLimitSystem {
  HomLimitSpace space;
  SpMat K;
  Eigen::VectorXd b;
  DofElimination elim;
};

HomLimitSystem assemble_hom_limit(const HomLimitProblem& pb);

struct HomLimitSolution {
  HomLimitSpace space;

  // One row per macro node.
  Eigen::MatrixXd macro;    // nodes x 6, slots (u1, s1, u2, s2, theta, c)
  Eigen::MatrixXd u3_cell;  // nodes x nv, constrained fiber values included
  std::array<Eigen::MatrixXd, 2> u1_cell;   // nodes x nv per component
  Eigen::MatrixXd fiber_cell;  // nodes x 3 nf, (w1, w2, v3) per fiber vertex

  double energy = 0;  // value of the quadratic form at the solution
  double work = 0;    // value of the load functional
  std::string solver_path;
  int iterations = 0;
};

HomLimitSolution solve_hom_limit(const HomLimitProblem& pb,
                                 const SolveOptions& opt = {});

// Difference quotients G(alpha, beta) = d_beta u_alpha at a macro node, the
// same stencil the interface constraint uses.
Eigen::Matrix2d macro_quotients(const HomLimitSpace& space,
                                const Eigen::MatrixXd& macro, int ix, int iy,
                                int iz);

// Cell mean of u3 per macro node; |Y| = 1 makes it the plain cell integral.
Eigen::VectorXd macro_mean_u3(const HomLimitSolution& sol);

// int_Omega int_Y u3(x, y) phi(x, y) dy dx, the limit side of the two-scale
// pairing.
double pairing_u3(
    const HomLimitSolution& sol,
    const std::function<double(const Eigen::Vector3d&, const Eigen::Vector2d&)>&
        phi);

// Mandel strain of the fiber block at macro point x and cell point y inside
// fiber triangle `tri`, and of the matrix block inside matrix triangle `tri`.
// The triangle region is checked.
Vec6 fiber_block_strain(const HomLimitSolution& sol, const Eigen::Vector3d& x,
                        int tri, const Eigen::Vector2d& y);
Vec6 matrix_block_strain(const HomLimitSolution& sol, const Eigen::Vector3d& x,
                         int tri, const Eigen::Vector2d& y);

// Splitting of the cell mean U(x) = int_Y u3 dy into the fiber mean, the
// matrix response to the mean load and a remainder:
//   U = avg_D u3 + m0 * avg_{Y\D} f3 + m00,
// with m0(x) = int_{Y\D} z0_3 dy for the unit-load corrector z0 and
// m00(x) = int_{Y\D} z00_3 dy for the fluctuation corrector z00.  The nodal
// factor avg_{Y\D} f3 is the mass projection of the matrix mean onto the
// interior macro nodes; the projected mean and the remainder vanish at the
// clamped end planes.
struct HomNonlocalDecomposition {
  Eigen::MatrixXd z0_cell;   // nodes x 3 nv, zero on D
  Eigen::MatrixXd z00_cell;  // nodes x 3 nv, zero on D
  Eigen::VectorXd m0;        // nodes
  Eigen::VectorXd m00;       // nodes
  Eigen::VectorXd mean_f3;   // nodes, projected matrix mean of f3
  Eigen::VectorXd mean_u3_D; // nodes, fiber mean c
  Eigen::VectorXd U;         // nodes, cell mean of u3
  double residual = 0;  // max |U - (mean_u3_D + m0 mean_f3 + m00)| / max(1, |U|_max)
};

HomNonlocalDecomposition decompose_U_hom(const HomLimitSolution& sol,
                                         const SolveOptions& opt = {});

}  // namespace fibrod
