#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "fibrod/rod_nonlocal.hpp"

using namespace fibrod;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kLambda = 1.5;
constexpr double kMu = 1.0;

RodLimitProblem make_problem(const SectionMesh& mesh,
                             std::function<double(const Eigen::Vector3d&)> f3,
                             int n3 = 8) {
  RodLimitProblem pb;
  pb.section = &mesh;
  pb.n3 = n3;
  pb.stiffness = [](const Eigen::Vector3d&, Region) {
    return make_isotropic(kLambda, kMu);
  };
  pb.load = [f3 = std::move(f3)](const Eigen::Vector3d& x, Region) {
    return Eigen::Vector3d(0.0, 0.0, f3(x));
  };
  return pb;
}

// For the unit disk section with fiber radius 1/2 and unit shear modulus the
// axial unit corrector is radial, z3(rho) = (R^2/2) log(rho/r) - (rho^2 -
// r^2)/4, and m0 is its matrix integral over the section area.
double annulus_m0() {
  const double R = 1.0;
  const double r = 0.5;
  const double I1 =
      0.5 * R * R * std::log(R / r) - 0.25 * (R * R - r * r);
  const double I2 =
      0.25 * (R * R * R * R - r * r * r * r) - 0.5 * r * r * (R * R - r * r);
  return 2.0 * kPi * (0.5 * R * R * I1 - 0.25 * I2) / (kPi * R * R);
}

}  // namespace

TEST_CASE("a uniform axial load shifts the section average everywhere") {
  const SectionMesh mesh = build_section_mesh(SectionGeometry{}, 0.05);
  const RodLimitProblem pb =
      make_problem(mesh, [](const Eigen::Vector3d&) { return 1.0; });
  const RodNonlocalResult res = solve_rod_nonlocal(pb);

  REQUIRE(res.slices.size() == static_cast<size_t>(pb.n3 + 1));
  const double m0_exact = annulus_m0();
  for (int i = 0; i <= pb.n3; ++i) {
    const NonlocalSlice& s = res.slices[i];
    CHECK(s.x3 == pb.length * i / pb.n3);
    CHECK(s.m0 > 0.0);
    CHECK(std::abs(s.m0 - m0_exact) <= 0.01 * m0_exact);
    CHECK(std::abs(s.mean_f3_matrix - 1.0) <= 1e-12);
    CHECK(std::abs(s.m00) <= 1e-13);
    CHECK(s.residual() <= 1e-13);
    // The beam average matches the nodal xi3 because the section centroid
    // sits at the origin.
    CHECK(std::abs(s.mean_u3 - res.limit.beam[6 * i + 4]) <= 1e-12);
  }
  // The load on the matrix moves the average axial displacement even at the
  // clamped ends, where the Bernoulli-Navier part vanishes.
  CHECK(res.slices.front().mean_u3 == 0.0);
  CHECK(res.slices.front().U > 0.5 * m0_exact);
  CHECK(res.slices.back().U > 0.5 * m0_exact);
  CHECK(res.slices[pb.n3 / 2].U > res.slices.front().U);
}

TEST_CASE("an axial load varying along the rod keeps the fluctuation empty") {
  const SectionMesh mesh = build_section_mesh(SectionGeometry{}, 0.08);
  const RodLimitProblem pb = make_problem(
      mesh, [](const Eigen::Vector3d& x) { return std::sin(kPi * x.z()); },
      6);
  const RodNonlocalResult res = solve_rod_nonlocal(pb);

  for (const NonlocalSlice& s : res.slices) {
    CHECK(std::abs(s.mean_f3_matrix - std::sin(kPi * s.x3)) <= 1e-12);
    CHECK(std::abs(s.m00) <= 1e-12 * (1.0 + s.m0));
    CHECK(s.m0 == res.slices.front().m0);
    CHECK(s.residual() <= 1e-12);
    CHECK(std::abs(s.U - s.mean_u3 - s.m0 * std::sin(kPi * s.x3)) <= 1e-12);
  }
}

TEST_CASE("an odd in-plane load enters only through the fluctuation") {
  const SectionMesh mesh = build_section_mesh(SectionGeometry{}, 0.08);
  const RodLimitProblem pb =
      make_problem(mesh, [](const Eigen::Vector3d& x) { return x.x(); }, 4);
  const RodNonlocalResult res = solve_rod_nonlocal(pb);

  for (const NonlocalSlice& s : res.slices) {
    CHECK(std::abs(s.mean_f3_matrix) <= 1e-12);
    CHECK(s.residual() <= 1e-12);
    CHECK(s.m0 > 0.0);
  }
}

TEST_CASE("a graded stiffness recomputes the unit corrector per slice") {
  const SectionMesh mesh = build_section_mesh(SectionGeometry{}, 0.1);
  RodLimitProblem pb =
      make_problem(mesh, [](const Eigen::Vector3d&) { return 1.0; }, 4);
  pb.stiffness = [](const Eigen::Vector3d& x, Region) {
    Mandel6 c = make_isotropic(kLambda, kMu);
    c *= 1.0 + x.z();
    return c;
  };
  pb.stiffness_x3_dependent = true;
  const RodNonlocalResult res = solve_rod_nonlocal(pb);

  const double base = res.slices.front().m0;
  CHECK(base > 0.0);
  for (const NonlocalSlice& s : res.slices) {
    // Scaling the law by (1 + x3) scales the unit corrector down by the same
    // factor, so m0 (1 + x3) is constant along the rod.
    CHECK(std::abs(s.m0 * (1.0 + s.x3) - base) <= 1e-10 * base);
    CHECK(std::abs(s.m00) <= 1e-13);
    CHECK(s.residual() <= 1e-12);
  }
  CHECK(res.slices.back().m0 < 0.75 * base);
}

TEST_CASE("decomposition residual stays solver grade for a general load") {
  const SectionMesh mesh = build_section_mesh(SectionGeometry{}, 0.08);
  const RodLimitProblem pb = make_problem(
      mesh,
      [](const Eigen::Vector3d& x) {
        return 1.0 + x.x() * x.x() + 0.5 * std::sin(2.0 * x.z()) * x.y();
      },
      6);
  const RodNonlocalResult res = solve_rod_nonlocal(pb);

  double max_m00 = 0.0;
  for (const NonlocalSlice& s : res.slices) {
    CHECK(s.residual() <= 1e-10 * std::max(1.0, std::abs(s.U_direct)));
    CHECK(s.m0 > 0.0);
    max_m00 = std::max(max_m00, std::abs(s.m00));
  }
  // The x' dependent part of the load leaves a genuine fluctuation term.
  CHECK(max_m00 > 1e-7);
}

TEST_CASE("invalid sampling points and sections are rejected") {
  const SectionMesh mesh = build_section_mesh(SectionGeometry{}, 0.12);
  const RodLimitProblem pb =
      make_problem(mesh, [](const Eigen::Vector3d&) { return 1.0; }, 4);
  CHECK_THROWS_AS(solve_rod_nonlocal(pb, {-0.1}), std::out_of_range);
  CHECK_THROWS_AS(solve_rod_nonlocal(pb, {1.2}), std::out_of_range);

  SectionMesh fiber_only;
  fiber_only.vertices = {Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0),
                         Eigen::Vector2d(0, 1)};
  fiber_only.tris = {Tri{{0, 1, 2}, Region::Fiber}};
  const RodLimitProblem bad =
      make_problem(fiber_only, [](const Eigen::Vector3d&) { return 1.0; }, 2);
  CHECK_THROWS_AS(solve_rod_nonlocal(bad), std::invalid_argument);
}
