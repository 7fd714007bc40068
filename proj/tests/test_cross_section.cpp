#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "fibrod/cross_section.hpp"
#include "fibrod/mesh.hpp"
#include "fibrod/quadrature.hpp"
#include "fibrod/tensors.hpp"

using namespace fibrod;

namespace {

SectionMesh disk_section(double h) {
  return build_section_mesh(SectionGeometry{}, h);  // outer disk 1, fiber 1/2
}

SectionStiffness constant_law(const Mandel6& C) {
  return [C](const Eigen::Vector2d&) { return C; };
}

// Energy of (G, c) by direct quadrature of the reconstructed strain through
// the 81-term contraction, sampling the stiffness at the same points as the
// assembly.
double direct_energy(const SectionMesh& mesh, const FiberDofMap& map,
                     const SectionStiffness& law, const Eigen::Vector4d& G,
                     const Eigen::VectorXd& c) {
  double energy = 0.0;
  for (int t : map.fiber_tris) {
    const Tri& tri = mesh.tris[t];
    const TriGeometry tg = tri_geometry(mesh, tri);
    for (const TriPoint& qp : tri3) {
      const Eigen::Vector2d p = (1.0 - qp.a - qp.b) * mesh.vertices[tri.v[0]] +
                                qp.a * mesh.vertices[tri.v[1]] +
                                qp.b * mesh.vertices[tri.v[2]];
      const Eigen::Matrix3d E =
          from_mandel(fiber_strain(mesh, map, t, G, c, p));
      energy += qp.w * tg.area * contract(law(p), E, E);
    }
  }
  return energy;
}

}  // namespace

TEST_CASE("circular fiber stiffness matches the rod formulas") {
  const double lambda = 1.5, mu = 1.0;
  const double young = mu * (3 * lambda + 2 * mu) / (lambda + mu);  // 2.6
  const double nu = lambda / (2 * (lambda + mu));                   // 0.3
  const double r = 0.5;

  const SectionMesh mesh = disk_section(0.05);
  const CondensedSection cs =
      condense_section(mesh, constant_law(make_isotropic(lambda, mu)));

  // Axial stiffness is exact against the polygon area: the linear Poisson
  // contraction w = -nu a x lies in the P1 space.
  const double area = mesh.fiber_area();
  CHECK(std::abs(cs.Q(0, 0) - young * area) <= 1e-9 * young * area);
  CHECK(std::abs(cs.Q(0, 0) - young * M_PI * r * r) <
        0.02 * young * M_PI * r * r);

  const double bend = young * M_PI * std::pow(r, 4) / 4.0;
  CHECK(std::abs(cs.Q(1, 1) - bend) < 0.02 * bend);
  CHECK(std::abs(cs.Q(2, 2) - bend) < 0.02 * bend);
  CHECK(std::abs(cs.Q(1, 1) - cs.Q(2, 2)) <= 1e-10 * cs.Q(1, 1));

  const double twist = mu * M_PI * std::pow(r, 4) / 2.0;
  CHECK(std::abs(cs.Q(3, 3) - twist) < 0.02 * twist);

  double coupling = 0.0;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      if (i != j) coupling = std::max(coupling, std::abs(cs.Q(i, j)));
    }
  }
  CHECK(coupling <= 1e-10 * cs.Q.norm());

  // The axial minimizer carries the uniform contraction E_ab = -nu delta_ab
  // and no shear or warping.
  const Eigen::Vector4d axial(1.0, 0.0, 0.0, 0.0);
  const Eigen::VectorXd c = cs.cell_field(axial);
  for (int t : cs.map.fiber_tris) {
    const Tri& tri = mesh.tris[t];
    const Eigen::Vector2d centroid = (mesh.vertices[tri.v[0]] +
                                      mesh.vertices[tri.v[1]] +
                                      mesh.vertices[tri.v[2]]) /
                                     3.0;
    const Vec6 e = fiber_strain(mesh, cs.map, t, axial, c, centroid);
    CHECK(e[2] == 1.0);
    CHECK(std::abs(e[0] + nu) <= 1e-8);
    CHECK(std::abs(e[1] + nu) <= 1e-8);
    CHECK(std::abs(e[3]) <= 1e-13);
    CHECK(std::abs(e[4]) <= 1e-13);
    CHECK(std::abs(e[5]) <= 1e-8);
  }
}

TEST_CASE("orthotropic constants equivalent to isotropy give the same form") {
  OrthotropicConstants oc;
  oc.E1 = oc.E2 = oc.E3 = 2.6;
  oc.nu12 = oc.nu13 = oc.nu23 = 0.3;
  oc.G23 = oc.G13 = oc.G12 = 1.0;

  const SectionMesh mesh = disk_section(0.12);
  const CondensedSection iso =
      condense_section(mesh, constant_law(make_isotropic(1.5, 1.0)));
  const CondensedSection ortho =
      condense_section(mesh, constant_law(make_orthotropic(oc)));
  CHECK((iso.Q - ortho.Q).norm() <= 1e-11 * iso.Q.norm());
}

TEST_CASE("condensed energy equals a direct quadrature of the strain") {
  const SectionMesh mesh = disk_section(0.1);
  std::mt19937 rng(42);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  const Mandel6 C0 = make_isotropic(1.3, 0.7);
  const SectionStiffness laws[] = {
      constant_law(C0),
      [C0](const Eigen::Vector2d& p) {
        return Mandel6((1.0 + p.squaredNorm()) * C0);
      },
  };

  for (const SectionStiffness& law : laws) {
    const CondensedSection cs = condense_section(mesh, law);
    const Eigen::Vector4d G(unit(rng), unit(rng), unit(rng), unit(rng));
    const Eigen::VectorXd c = cs.cell_field(G);

    const double direct = direct_energy(mesh, cs.map, law, G, c);
    const double condensed = G.dot(cs.Q * G);
    CHECK(direct == doctest::Approx(condensed).epsilon(1e-11));

    // Optimality: the cell residual lies in the span of the constraint
    // gradients (the Lagrange multipliers of the kernel constraints).
    const SectionBlocks blocks = assemble_section_blocks(mesh, cs.map, law);
    const Eigen::VectorXd rhs = blocks.K_Gc.transpose() * G;
    const Eigen::VectorXd res = blocks.K_cc * c + rhs;
    const auto constraints = section_constraints(mesh, cs.map);
    Eigen::MatrixXd N = Eigen::MatrixXd::Zero(4, cs.map.num_dofs());
    for (int k = 0; k < 4; ++k) {
      for (const auto& [dof, w] : constraints[k].terms) N(k, dof) += w;
    }
    const Eigen::Vector4d y =
        (N * N.transpose()).ldlt().solve(N * res);
    CHECK((res - N.transpose() * y).norm() <= 1e-9 * rhs.norm());
  }
}

TEST_CASE("kernel fields carry no strain and no stiffness") {
  const SectionMesh mesh = disk_section(0.15);
  const FiberDofMap map = build_fiber_dof_map(mesh);
  const SectionBlocks blocks =
      assemble_section_blocks(mesh, map, constant_law(make_isotropic(1, 1)));

  const int nv = map.num_vertices();
  Eigen::MatrixXd kernel = Eigen::MatrixXd::Zero(map.num_dofs(), 4);
  for (int l = 0; l < nv; ++l) {
    const Eigen::Vector2d x = mesh.vertices[map.vertex_of_local[l]];
    kernel(3 * l + 0, 0) = 1.0;  // translation of w1
    kernel(3 * l + 1, 1) = 1.0;  // translation of w2
    kernel(3 * l + 2, 2) = 1.0;  // constant of v3
    kernel(3 * l + 0, 3) = -x.y();  // in-plane rotation
    kernel(3 * l + 1, 3) = x.x();
  }

  const double scale = Eigen::MatrixXd(blocks.K_cc).cwiseAbs().maxCoeff();
  for (int k = 0; k < 4; ++k) {
    CHECK((blocks.K_cc * kernel.col(k)).cwiseAbs().maxCoeff() <=
          1e-12 * scale);
    const Vec6 e =
        fiber_strain(mesh, map, map.fiber_tris[3], Eigen::Vector4d::Zero(),
                     kernel.col(k), Eigen::Vector2d(0.05, -0.02));
    CHECK(e.cwiseAbs().maxCoeff() <= 1e-13);
  }
}

TEST_CASE("the form scales linearly with the stiffness law") {
  const SectionMesh mesh = disk_section(0.2);
  const Mandel6 C = make_isotropic(2.0, 0.9);
  const CondensedSection one = condense_section(mesh, constant_law(C));
  const CondensedSection three =
      condense_section(mesh, constant_law(Mandel6(3.0 * C)));
  CHECK((three.Q - 3.0 * one.Q).norm() <= 1e-12 * three.Q.norm());
}

TEST_CASE("the dof map covers exactly the fiber region") {
  const SectionMesh mesh = disk_section(0.15);
  const FiberDofMap map = build_fiber_dof_map(mesh);

  size_t fiber_tris = 0;
  for (const Tri& t : mesh.tris) fiber_tris += t.region == Region::Fiber;
  CHECK(map.fiber_tris.size() == fiber_tris);
  CHECK(map.num_vertices() > 0);
  CHECK(map.num_vertices() < (int)mesh.vertices.size());

  for (int l = 0; l < map.num_vertices(); ++l) {
    CHECK(map.local_of_vertex[map.vertex_of_local[l]] == l);
    if (l > 0) CHECK(map.vertex_of_local[l] > map.vertex_of_local[l - 1]);
  }
  for (int t : map.fiber_tris) {
    for (int v : mesh.tris[t].v) CHECK(map.local_of_vertex[v] >= 0);
  }
}

TEST_CASE("a unit-cell fiber disk condenses with the same exact axial law") {
  const SectionMesh mesh = build_cell_mesh(0.25, 16);
  const double lambda = 1.5, mu = 1.0;
  const double young = mu * (3 * lambda + 2 * mu) / (lambda + mu);
  const CondensedSection cs =
      condense_section(mesh, constant_law(make_isotropic(lambda, mu)));

  const double area = mesh.fiber_area();
  CHECK(std::abs(cs.Q(0, 0) - young * area) <= 1e-9 * young * area);
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(cs.Q);
  CHECK(es.eigenvalues().minCoeff() > 0.0);

  double coupling = 0.0;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      if (i != j) coupling = std::max(coupling, std::abs(cs.Q(i, j)));
    }
  }
  CHECK(coupling <= 1e-10 * cs.Q.norm());
}

TEST_CASE("the degenerate in-plane strain assembles and evaluates exactly") {
  const SectionMesh mesh = disk_section(0.15);
  const Mandel6 C = make_isotropic(1.2, 0.8);

  // Affine field: z_a = A x + c in-plane, z3 = d . x + e, constant strain.
  Eigen::Matrix2d A;
  A << 0.3, -0.7, 0.2, 0.5;
  const Eigen::Vector2d d(0.4, -0.9);
  Eigen::VectorXd z(3 * mesh.vertices.size());
  for (size_t v = 0; v < mesh.vertices.size(); ++v) {
    const Eigen::Vector2d x = mesh.vertices[v];
    z.segment<2>(3 * v) = A * x + Eigen::Vector2d(1.0, -2.0);
    z[3 * v + 2] = d.dot(x) + 0.5;
  }

  Eigen::Matrix3d E = Eigen::Matrix3d::Zero();
  E.topLeftCorner<2, 2>() = 0.5 * (A + A.transpose());
  E(0, 2) = E(2, 0) = 0.5 * d.x();
  E(1, 2) = E(2, 1) = 0.5 * d.y();

  for (const Region region : {Region::Matrix, Region::Fiber}) {
    const SpMat K = assemble_inplane_stiffness(
        mesh, region, [C](const Eigen::Vector2d&) { return C; });
    double area = region == Region::Matrix ? mesh.matrix_area()
                                           : mesh.fiber_area();
    const double expected = area * contract(C, E, E);
    CHECK(z.dot(K * z) == doctest::Approx(expected).epsilon(1e-12));
  }

  for (int t = 0; t < (int)mesh.tris.size(); ++t) {
    const Vec6 e = inplane_strain(mesh, t, z);
    CHECK((e - to_mandel(E)).cwiseAbs().maxCoeff() <= 1e-13);
  }

  // The load vector integrates g zbar_3 exactly for P1 data: with g = 1 the
  // pairing with z reduces to the integral of z3 over the region.
  const Eigen::VectorXd load = assemble_inplane_axial_load(
      mesh, Region::Matrix, [](const Eigen::Vector2d&) { return 1.0; });
  double int_z3 = 0.0;
  for (const Tri& t : mesh.tris) {
    if (t.region != Region::Matrix) continue;
    const TriGeometry tg = tri_geometry(mesh, t);
    double sum = 0.0;
    for (int v : t.v) sum += z[3 * v + 2];
    int_z3 += tg.area / 3.0 * sum;
  }
  CHECK(load.dot(z) == doctest::Approx(int_z3).epsilon(1e-12));
}

TEST_CASE("misuse of the strain evaluator is rejected") {
  const SectionMesh mesh = disk_section(0.2);
  const FiberDofMap map = build_fiber_dof_map(mesh);
  const Eigen::Vector4d G = Eigen::Vector4d::Ones();
  const Eigen::VectorXd c = Eigen::VectorXd::Zero(map.num_dofs());
  const Eigen::Vector2d p(0.1, 0.1);

  int matrix_tri = -1;
  for (int t = 0; t < (int)mesh.tris.size(); ++t) {
    if (mesh.tris[t].region == Region::Matrix) matrix_tri = t;
  }
  REQUIRE(matrix_tri >= 0);
  CHECK_THROWS_AS(fiber_strain(mesh, map, matrix_tri, G, c, p),
                  std::invalid_argument);
  CHECK_THROWS_AS(fiber_strain(mesh, map, -1, G, c, p),
                  std::invalid_argument);
  CHECK_THROWS_AS(fiber_strain(mesh, map, (int)mesh.tris.size(), G, c, p),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      fiber_strain(mesh, map, map.fiber_tris[0], G,
                   Eigen::VectorXd::Zero(map.num_dofs() + 1), p),
      std::invalid_argument);

  SectionMesh bare;
  bare.vertices = {{0, 0}, {1, 0}, {0, 1}};
  bare.tris = {{{0, 1, 2}, Region::Matrix}};
  CHECK_THROWS_AS(
      condense_section(bare, constant_law(make_isotropic(1, 1))),
      std::invalid_argument);
}
