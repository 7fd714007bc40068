#include "fibrod/cross_section.hpp"

#include <Eigen/Dense>
#include <sstream>
#include <stdexcept>

#include "fibrod/quadrature.hpp"

namespace fibrod {
namespace {

constexpr double kSqrtHalf = 0.70710678118654752440;

// Local column layout of one fiber triangle: 4 macro slots then 9 cell dofs,
// vertex-major (w1, w2, v3).
using LocalMat = Eigen::Matrix<double, 6, 13>;

// Mandel strain columns at one quadrature point p.  Cell gradients are the
// constant P1 gradients of the triangle.
LocalMat strain_columns(const TriGeometry& tg, const Eigen::Vector2d& p) {
  LocalMat B = LocalMat::Zero();
  B(2, 0) = 1.0;
  B(2, 1) = -p.x();
  B(2, 2) = -p.y();
  B(3, 3) = kSqrtHalf * p.x();
  B(4, 3) = -kSqrtHalf * p.y();
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector2d g = tg.grad.col(i);
    const int c = 4 + 3 * i;
    B(0, c) = g.x();
    B(5, c) = kSqrtHalf * g.y();
    B(1, c + 1) = g.y();
    B(5, c + 1) = kSqrtHalf * g.x();
    B(3, c + 2) = kSqrtHalf * g.y();
    B(4, c + 2) = kSqrtHalf * g.x();
  }
  return B;
}

TriGeometry checked_geometry(const SectionMesh& mesh, const Tri& t) {
  TriGeometry tg = tri_geometry(mesh, t);
  if (!(tg.area > 0.0)) {
    throw std::runtime_error(
        "fiber triangle is degenerate or negatively oriented");
  }
  return tg;
}

void check_map(const FiberDofMap& map) {
  if (map.num_vertices() == 0) {
    throw std::invalid_argument("section mesh has no fiber triangles");
  }
}

}  // namespace

Eigen::Matrix<double, 6, 9> inplane_columns(const TriGeometry& tg) {
  Eigen::Matrix<double, 6, 9> B = Eigen::Matrix<double, 6, 9>::Zero();
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector2d g = tg.grad.col(i);
    const int c = 3 * i;
    B(0, c) = g.x();
    B(5, c) = kSqrtHalf * g.y();
    B(1, c + 1) = g.y();
    B(5, c + 1) = kSqrtHalf * g.x();
    B(3, c + 2) = kSqrtHalf * g.y();
    B(4, c + 2) = kSqrtHalf * g.x();
  }
  return B;
}

FiberDofMap build_fiber_dof_map(const SectionMesh& mesh) {
  FiberDofMap map;
  map.local_of_vertex.assign(mesh.vertices.size(), -1);
  for (int t = 0; t < (int)mesh.tris.size(); ++t) {
    if (mesh.tris[t].region != Region::Fiber) continue;
    map.fiber_tris.push_back(t);
    for (int v : mesh.tris[t].v) map.local_of_vertex[v] = 0;
  }
  for (int v = 0; v < (int)map.local_of_vertex.size(); ++v) {
    if (map.local_of_vertex[v] < 0) continue;
    map.local_of_vertex[v] = (int)map.vertex_of_local.size();
    map.vertex_of_local.push_back(v);
  }
  return map;
}

SectionBlocks assemble_section_blocks(const SectionMesh& mesh,
                                      const FiberDofMap& map,
                                      const SectionStiffness& stiffness) {
  check_map(map);
  if (!stiffness) throw std::invalid_argument("section stiffness is empty");

  SectionBlocks blocks;
  const int n = map.num_dofs();
  blocks.K_Gc = Eigen::MatrixXd::Zero(4, n);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(81 * map.fiber_tris.size());

  for (int t : map.fiber_tris) {
    const Tri& tri = mesh.tris[t];
    const TriGeometry tg = checked_geometry(mesh, tri);
    Eigen::Matrix<double, 13, 13> Ke = Eigen::Matrix<double, 13, 13>::Zero();
    for (const TriPoint& qp : tri3) {
      const Eigen::Vector2d p = (1.0 - qp.a - qp.b) * mesh.vertices[tri.v[0]] +
                                qp.a * mesh.vertices[tri.v[1]] +
                                qp.b * mesh.vertices[tri.v[2]];
      const LocalMat B = strain_columns(tg, p);
      Ke += (qp.w * tg.area) * (B.transpose() * (stiffness(p) * B));
    }
    int dof[9];
    for (int i = 0; i < 3; ++i) {
      const int l = map.local_of_vertex[tri.v[i]];
      for (int c = 0; c < 3; ++c) dof[3 * i + c] = 3 * l + c;
    }
    blocks.K_GG += Ke.topLeftCorner<4, 4>();
    for (int j = 0; j < 9; ++j) {
      blocks.K_Gc.col(dof[j]) += Ke.block<4, 1>(0, 4 + j);
      for (int i = 0; i < 9; ++i) {
        trips.emplace_back(dof[i], dof[j], Ke(4 + i, 4 + j));
      }
    }
  }

  blocks.K_cc.resize(n, n);
  blocks.K_cc.setFromTriplets(trips.begin(), trips.end());
  return blocks;
}

std::vector<LinearConstraint> section_constraints(const SectionMesh& mesh,
                                                  const FiberDofMap& map) {
  check_map(map);
  const int nv = map.num_vertices();
  std::vector<double> mass(nv, 0.0), mx1(nv, 0.0), mx2(nv, 0.0);
  for (int t : map.fiber_tris) {
    const Tri& tri = mesh.tris[t];
    const TriGeometry tg = checked_geometry(mesh, tri);
    Eigen::Vector2d sum = Eigen::Vector2d::Zero();
    for (int i = 0; i < 3; ++i) sum += mesh.vertices[tri.v[i]];
    for (int i = 0; i < 3; ++i) {
      const int l = map.local_of_vertex[tri.v[i]];
      const Eigen::Vector2d m1 =
          tg.area / 12.0 * (sum + mesh.vertices[tri.v[i]]);
      mass[l] += tg.area / 3.0;
      mx1[l] += m1.x();
      mx2[l] += m1.y();
    }
  }

  std::vector<LinearConstraint> cs(4);
  for (int l = 0; l < nv; ++l) {
    cs[0].terms.emplace_back(3 * l + 0, mass[l]);
    cs[1].terms.emplace_back(3 * l + 1, mass[l]);
    cs[2].terms.emplace_back(3 * l + 2, mass[l]);
  }
  // Rotation moment int (x1 w2 - x2 w1) built from exact hat integrals.
  for (int l = 0; l < nv; ++l) {
    cs[3].terms.emplace_back(3 * l + 0, -mx2[l]);
    cs[3].terms.emplace_back(3 * l + 1, mx1[l]);
  }
  return cs;
}

CondensedSection condense_section(const SectionMesh& mesh,
                                  const SectionStiffness& stiffness) {
  CondensedSection cs;
  cs.map = build_fiber_dof_map(mesh);
  check_map(cs.map);

  const SectionBlocks blocks = assemble_section_blocks(mesh, cs.map, stiffness);
  const DofElimination elim = DofElimination::build(
      cs.map.num_dofs(), {}, {}, section_constraints(mesh, cs.map));
  const SpMat Kred = elim.reduce(blocks.K_cc);
  const Eigen::MatrixXd Gred = blocks.K_Gc * elim.prolongation();

  cs.generators.resize(cs.map.num_dofs(), 4);
  Eigen::Matrix4d schur = Eigen::Matrix4d::Zero();
  for (int k = 0; k < 4; ++k) {
    const SolveResult sol = solve_spd(Kred, -Gred.row(k).transpose());
    cs.generators.col(k) = elim.expand(sol.x);
    schur.col(k) = Gred * sol.x;
  }
  const Eigen::Matrix4d Q = blocks.K_GG + schur;
  cs.Q = 0.5 * (Q + Q.transpose());
  return cs;
}

Vec6 fiber_strain(const SectionMesh& mesh, const FiberDofMap& map, int tri,
                  const Eigen::Vector4d& G, const Eigen::VectorXd& c,
                  const Eigen::Vector2d& point) {
  if (tri < 0 || tri >= (int)mesh.tris.size()) {
    std::ostringstream os;
    os << "triangle index " << tri << " outside mesh with "
       << mesh.tris.size() << " triangles";
    throw std::invalid_argument(os.str());
  }
  const Tri& t = mesh.tris[tri];
  if (t.region != Region::Fiber) {
    throw std::invalid_argument("fiber strain requested on a matrix triangle");
  }
  if (c.size() != map.num_dofs()) {
    std::ostringstream os;
    os << "cell vector has " << c.size() << " entries, dof map expects "
       << map.num_dofs();
    throw std::invalid_argument(os.str());
  }

  const TriGeometry tg = checked_geometry(mesh, t);
  Vec6 e = Vec6::Zero();
  e[2] = G[0] - point.x() * G[1] - point.y() * G[2];
  e[3] = kSqrtHalf * G[3] * point.x();
  e[4] = -kSqrtHalf * G[3] * point.y();
  for (int i = 0; i < 3; ++i) {
    const int l = map.local_of_vertex[t.v[i]];
    if (l < 0) throw std::invalid_argument("dof map does not cover the mesh");
    const Eigen::Vector2d g = tg.grad.col(i);
    const double w1 = c[3 * l], w2 = c[3 * l + 1], v3 = c[3 * l + 2];
    e[0] += g.x() * w1;
    e[1] += g.y() * w2;
    e[5] += kSqrtHalf * (g.y() * w1 + g.x() * w2);
    e[3] += kSqrtHalf * g.y() * v3;
    e[4] += kSqrtHalf * g.x() * v3;
  }
  return e;
}

SpMat assemble_inplane_stiffness(const SectionMesh& mesh, Region region,
                                 const SectionStiffness& stiffness) {
  if (!stiffness) throw std::invalid_argument("section stiffness is empty");
  const int n = 3 * (int)mesh.vertices.size();
  std::vector<Eigen::Triplet<double>> trips;

  for (const Tri& tri : mesh.tris) {
    if (tri.region != region) continue;
    const TriGeometry tg = checked_geometry(mesh, tri);
    const Eigen::Matrix<double, 6, 9> B = inplane_columns(tg);
    Eigen::Matrix<double, 9, 9> Ke = Eigen::Matrix<double, 9, 9>::Zero();
    for (const TriPoint& qp : tri3) {
      const Eigen::Vector2d p = (1.0 - qp.a - qp.b) * mesh.vertices[tri.v[0]] +
                                qp.a * mesh.vertices[tri.v[1]] +
                                qp.b * mesh.vertices[tri.v[2]];
      Ke += (qp.w * tg.area) * (B.transpose() * (stiffness(p) * B));
    }
    for (int j = 0; j < 9; ++j) {
      for (int i = 0; i < 9; ++i) {
        trips.emplace_back(3 * tri.v[i / 3] + i % 3, 3 * tri.v[j / 3] + j % 3,
                           Ke(i, j));
      }
    }
  }

  SpMat K(n, n);
  K.setFromTriplets(trips.begin(), trips.end());
  return K;
}

Eigen::VectorXd assemble_inplane_axial_load(
    const SectionMesh& mesh, Region region,
    const std::function<double(const Eigen::Vector2d&)>& g) {
  if (!g) throw std::invalid_argument("in-plane load is empty");
  Eigen::VectorXd b = Eigen::VectorXd::Zero(3 * mesh.vertices.size());

  for (const Tri& tri : mesh.tris) {
    if (tri.region != region) continue;
    const TriGeometry tg = checked_geometry(mesh, tri);
    for (const TriPoint& qp : tri3) {
      const double lambda[3] = {1.0 - qp.a - qp.b, qp.a, qp.b};
      const Eigen::Vector2d p = lambda[0] * mesh.vertices[tri.v[0]] +
                                lambda[1] * mesh.vertices[tri.v[1]] +
                                lambda[2] * mesh.vertices[tri.v[2]];
      const double w = qp.w * tg.area * g(p);
      for (int i = 0; i < 3; ++i) b[3 * tri.v[i] + 2] += w * lambda[i];
    }
  }
  return b;
}

Vec6 inplane_strain(const SectionMesh& mesh, int tri,
                    const Eigen::VectorXd& z) {
  if (tri < 0 || tri >= (int)mesh.tris.size()) {
    std::ostringstream os;
    os << "triangle index " << tri << " outside mesh with "
       << mesh.tris.size() << " triangles";
    throw std::invalid_argument(os.str());
  }
  if (z.size() != 3 * (Eigen::Index)mesh.vertices.size()) {
    std::ostringstream os;
    os << "nodal vector has " << z.size() << " entries, mesh expects "
       << 3 * mesh.vertices.size();
    throw std::invalid_argument(os.str());
  }
  const Tri& t = mesh.tris[tri];
  const Eigen::Matrix<double, 6, 9> B =
      inplane_columns(checked_geometry(mesh, t));
  Eigen::Matrix<double, 9, 1> ze;
  for (int i = 0; i < 9; ++i) ze[i] = z[3 * t.v[i / 3] + i % 3];
  return B * ze;
}

}  // namespace fibrod
