#pragma once

#include <functional>

#include "fibrod/cross_section.hpp"
#include "fibrod/fem.hpp"
#include "fibrod/mesh.hpp"

// Periodic matrix correctors on the unit cell Y = (-1/2, 1/2)^2.
//
// The corrector carries the degenerate in-plane strain (no axial stretch) on
// the matrix part of the cell, vanishes on the closed fiber disk, and is
// identified across opposite cell edges.  With the axial unit load the
// integral of z0_3 over the matrix is the nonlocal coefficient m0; note that
// it is an integral, not an average, because the cell has unit measure.

namespace fibrod {

// Solves the cell corrector for an axial load density g on the matrix.
// Periodic pairs are taken from the mesh; a mesh without pairs gets natural
// outer conditions, which makes the same routine usable on rod sections.
Eigen::VectorXd solve_cell_corrector(
    const SectionMesh& cell, const SectionStiffness& law,
    const std::function<double(const Eigen::Vector2d&)>& g,
    const SolveOptions& opt = {});

// Same solve for an already assembled load vector, 3 dofs per vertex.
Eigen::VectorXd solve_cell_axial(const SectionMesh& cell,
                                 const SectionStiffness& law,
                                 const Eigen::VectorXd& load,
                                 const SolveOptions& opt = {});

// Corrector for the fluctuation g - avg_{matrix} g; a load that depends only
// on the macro point produces the zero field.
Eigen::VectorXd solve_cell_fluctuation(
    const SectionMesh& cell, const SectionStiffness& law,
    const std::function<double(const Eigen::Vector2d&)>& g,
    const SolveOptions& opt = {});

// Lumped integral of z_3 over the matrix region.
double matrix_axial_integral(const SectionMesh& cell, const Eigen::VectorXd& z);

// m0 = integral of z0_3 for the unit axial load.
double cell_m0(const SectionMesh& cell, const SectionStiffness& law,
               const SolveOptions& opt = {});

}  // namespace fibrod
