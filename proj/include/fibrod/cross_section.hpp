#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "fibrod/fem.hpp"
#include "fibrod/mesh.hpp"
#include "fibrod/tensors.hpp"

// Cross-section condensation for the fiber part of a section mesh.
//
// The slender-limit strain on a fiber cross section is driven by four macro
// slots G = (a, b1, b2, t): axial stretch rate, two bending curvatures and
// the twist rate.  Together with in-plane correctors w = (w1, w2) and an
// axial warping v3, both P1 on the fiber triangles, the strain reads
//
//   E33     = a - x1 b1 - x2 b2,
//   2 E_a3  = t xR_a + d_a v3,          xR = (-x2, x1),
//   E_ab    = sym grad w,
//
// and the section energy is the unhalved quadratic form int_fiber C E . E.
// Minimizing over (w, v3) at fixed G condenses the energy to a 4x4 form Q.
// The corrector fields are determined up to in-plane translations, one
// in-plane rotation and a constant of v3, which the mean and rotation-moment
// constraints remove.

namespace fibrod {

// Vertex and triangle bookkeeping for fields living on the fiber part of a
// section mesh.  Cell unknowns are (w1, w2, v3) per fiber vertex, numbered
// 3 * local + component.
struct FiberDofMap {
  std::vector<int> fiber_tris;       // indices into SectionMesh::tris
  std::vector<int> vertex_of_local;  // fiber-local index -> mesh vertex
  std::vector<int> local_of_vertex;  // mesh vertex -> fiber-local or -1
  int num_vertices() const { return (int)vertex_of_local.size(); }
  int num_dofs() const { return 3 * num_vertices(); }
};

FiberDofMap build_fiber_dof_map(const SectionMesh& mesh);

// Stiffness law sampled at section points inside the fiber.
using SectionStiffness = std::function<Mandel6(const Eigen::Vector2d&)>;

// Stiffness blocks of the section energy in the (G, c) variables, c the
// stacked cell vector of the dof map.  K_cc is singular on the kernel above;
// consumers reduce it with section_constraints before factorizing.
struct SectionBlocks {
  Eigen::Matrix4d K_GG = Eigen::Matrix4d::Zero();
  Eigen::MatrixXd K_Gc;  // 4 x num_dofs
  SpMat K_cc;
};

SectionBlocks assemble_section_blocks(const SectionMesh& mesh,
                                      const FiberDofMap& map,
                                      const SectionStiffness& stiffness);

// The four kernel constraints: mean(w1) = mean(w2) = mean(v3) = 0 and zero
// rotation moment int (x1 w2 - x2 w1).  Weights are exact integrals of the
// P1 hat functions over the fiber triangles.
std::vector<LinearConstraint> section_constraints(const SectionMesh& mesh,
                                                  const FiberDofMap& map);

struct CondensedSection {
  FiberDofMap map;
  Eigen::Matrix4d Q = Eigen::Matrix4d::Zero();  // condensed form on G
  Eigen::MatrixXd generators;  // num_dofs x 4, minimizer per unit slot

  // Minimizing cell vector for macro slots G.
  Eigen::VectorXd cell_field(const Eigen::Vector4d& G) const {
    return generators * G;
  }
};

CondensedSection condense_section(const SectionMesh& mesh,
                                  const SectionStiffness& stiffness);

// Section strain at a point of fiber triangle `tri` (an index into
// SectionMesh::tris) for macro slots G and cell vector c.  The P1 gradients
// are constant per triangle; the point enters the axial and twist terms.
Vec6 fiber_strain(const SectionMesh& mesh, const FiberDofMap& map, int tri,
                  const Eigen::Vector4d& G, const Eigen::VectorXd& c,
                  const Eigen::Vector2d& point);

// Degenerate in-plane strain of a three-component P1 field z on the section:
// E_ab = sym grad (z1, z2), 2 E_a3 = d_a z3 and E_33 = 0, the strain the
// soft matrix keeps in the slender limit.  Dofs are 3 * vertex + component
// over the full vertex set; rows of vertices the region never touches stay
// empty, so consumers must clamp or drop them.
SpMat assemble_inplane_stiffness(const SectionMesh& mesh, Region region,
                                 const SectionStiffness& stiffness);

// Load vector int_region g zbar_3 in the same dof layout; only the third
// component carries load.
Eigen::VectorXd assemble_inplane_axial_load(
    const SectionMesh& mesh, Region region,
    const std::function<double(const Eigen::Vector2d&)>& g);

// Strain of the nodal field z on triangle `tri`; constant per triangle.
Vec6 inplane_strain(const SectionMesh& mesh, int tri,
                    const Eigen::VectorXd& z);

// Columns of the degenerate in-plane strain per element dof (3 per vertex).
Eigen::Matrix<double, 6, 9> inplane_columns(const TriGeometry& tg);

}  // namespace fibrod
