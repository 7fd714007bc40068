#include "fibrod/hom_cell.hpp"

#include <stdexcept>

namespace fibrod {

Eigen::VectorXd solve_cell_corrector(
    const SectionMesh& cell, const SectionStiffness& law,
    const std::function<double(const Eigen::Vector2d&)>& g,
    const SolveOptions& opt) {
  return solve_cell_axial(
      cell, law, assemble_inplane_axial_load(cell, Region::Matrix, g), opt);
}

Eigen::VectorXd solve_cell_fluctuation(
    const SectionMesh& cell, const SectionStiffness& law,
    const std::function<double(const Eigen::Vector2d&)>& g,
    const SolveOptions& opt) {
  const Eigen::VectorXd load =
      assemble_inplane_axial_load(cell, Region::Matrix, g);
  const Eigen::VectorXd unit = assemble_inplane_axial_load(
      cell, Region::Matrix, [](const Eigen::Vector2d&) { return 1.0; });
  const double mean = load.sum() / unit.sum();
  return solve_cell_axial(cell, law, load - mean * unit, opt);
}

Eigen::VectorXd solve_cell_axial(const SectionMesh& cell,
                                 const SectionStiffness& law,
                                 const Eigen::VectorXd& load,
                                 const SolveOptions& opt) {
  if (load.size() != 3 * (Eigen::Index)cell.vertices.size()) {
    throw std::invalid_argument("load size does not match the cell mesh");
  }
  const SpMat K = assemble_inplane_stiffness(cell, Region::Matrix, law);

  // Clamp the closure of the fiber disk and drop vertices the matrix never
  // touches; the periodic identification shares one column per folded pair.
  std::vector<char> fiber(cell.vertices.size(), 0);
  std::vector<char> matrix(cell.vertices.size(), 0);
  for (const Tri& t : cell.tris) {
    for (int v : t.v) (t.region == Region::Fiber ? fiber : matrix)[v] = 1;
  }
  std::vector<int> zeros;
  for (int v = 0; v < (int)cell.vertices.size(); ++v) {
    if (fiber[v] || !matrix[v]) {
      zeros.push_back(3 * v);
      zeros.push_back(3 * v + 1);
      zeros.push_back(3 * v + 2);
    }
  }
  if (3 * cell.vertices.size() == zeros.size()) {
    throw std::invalid_argument("cell mesh has no free matrix vertices");
  }
  std::vector<std::array<int, 2>> pairs;
  pairs.reserve(3 * cell.periodic.size());
  for (const std::array<int, 2>& p : cell.periodic) {
    for (int c = 0; c < 3; ++c) {
      pairs.push_back({3 * p[0] + c, 3 * p[1] + c});
    }
  }

  const DofElimination elim =
      DofElimination::build(3 * (int)cell.vertices.size(), zeros, pairs);
  const SolveResult res = solve_spd(elim.reduce(K), elim.reduce(load), opt);
  return elim.expand(res.x);
}

double matrix_axial_integral(const SectionMesh& cell,
                             const Eigen::VectorXd& z) {
  if (z.size() != 3 * (Eigen::Index)cell.vertices.size()) {
    throw std::invalid_argument("field size does not match the cell mesh");
  }
  double acc = 0;
  for (const Tri& t : cell.tris) {
    if (t.region != Region::Matrix) continue;
    const double area = tri_geometry(cell, t).area;
    acc += area / 3.0 *
           (z[3 * t.v[0] + 2] + z[3 * t.v[1] + 2] + z[3 * t.v[2] + 2]);
  }
  return acc;
}

double cell_m0(const SectionMesh& cell, const SectionStiffness& law,
               const SolveOptions& opt) {
  const Eigen::VectorXd z0 =
      solve_cell_corrector(cell, law, [](const Eigen::Vector2d&) { return 1.0; },
                           opt);
  return matrix_axial_integral(cell, z0);
}

}  // namespace fibrod
