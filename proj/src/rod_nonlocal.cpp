#include "fibrod/rod_nonlocal.hpp"

#include <stdexcept>
#include <utility>

#include "fibrod/cross_section.hpp"
#include "fibrod/quadrature.hpp"

namespace fibrod {

namespace {

// Matrix average of the axial load on one slice.  tri3 integrates the
// degree-2 hat products exactly; smoother loads inherit the mesh error.
double matrix_load_average(const SectionMesh& mesh,
                           const std::function<Eigen::Vector3d(
                               const Eigen::Vector3d&, Region)>& load,
                           double x3) {
  double integral = 0.0;
  for (const Tri& tri : mesh.tris) {
    if (tri.region != Region::Matrix) continue;
    const TriGeometry tg = tri_geometry(mesh, tri);
    const Eigen::Vector2d a = mesh.vertices[tri.v[0]];
    const Eigen::Vector2d b = mesh.vertices[tri.v[1]];
    const Eigen::Vector2d c = mesh.vertices[tri.v[2]];
    for (const TriPoint& qp : tri3) {
      const Eigen::Vector2d p =
          (1.0 - qp.a - qp.b) * a + qp.a * b + qp.b * c;
      const Eigen::Vector3d x(p.x(), p.y(), x3);
      integral += qp.w * tg.area * load(x, Region::Matrix).z();
    }
  }
  return integral / mesh.matrix_area();
}

// Lumped integral of the axial corrector component over the matrix region.
double matrix_z3_integral(const SectionMesh& mesh, const Eigen::VectorXd& z) {
  double integral = 0.0;
  for (const Tri& tri : mesh.tris) {
    if (tri.region != Region::Matrix) continue;
    const TriGeometry tg = tri_geometry(mesh, tri);
    for (int v : tri.v) integral += tg.area / 3.0 * z[3 * v + 2];
  }
  return integral;
}

// First moment of the whole section, needed because the Bernoulli-Navier
// average subtracts x_alpha xi_alpha'.
Eigen::Vector2d section_first_moment(const SectionMesh& mesh) {
  Eigen::Vector2d moment = Eigen::Vector2d::Zero();
  for (const Tri& tri : mesh.tris) {
    const TriGeometry tg = tri_geometry(mesh, tri);
    const Eigen::Vector2d a = mesh.vertices[tri.v[0]];
    const Eigen::Vector2d b = mesh.vertices[tri.v[1]];
    const Eigen::Vector2d c = mesh.vertices[tri.v[2]];
    for (const TriPoint& qp : tri3) {
      moment += qp.w * tg.area *
                ((1.0 - qp.a - qp.b) * a + qp.a * b + qp.b * c);
    }
  }
  return moment;
}

SectionStiffness matrix_law_at(const RodLimitProblem& pb, double x3) {
  return [stiffness = pb.stiffness, x3](const Eigen::Vector2d& p) {
    return stiffness(Eigen::Vector3d(p.x(), p.y(), x3), Region::Matrix);
  };
}

}  // namespace

RodNonlocalResult solve_rod_nonlocal(const RodLimitProblem& pb,
                                     std::vector<double> x3_samples,
                                     const SolveOptions& opt) {
  RodNonlocalResult result;
  result.limit = solve_rod_limit(pb, opt);

  const SectionMesh& mesh = *pb.section;
  if (mesh.matrix_area() <= 0.0) {
    throw std::invalid_argument(
        "solve_rod_nonlocal: the section has no matrix region");
  }
  if (x3_samples.empty()) {
    x3_samples.resize(pb.n3 + 1);
    for (int i = 0; i <= pb.n3; ++i) {
      x3_samples[i] = pb.length * static_cast<double>(i) / pb.n3;
    }
  }

  const double area = mesh.total_area();
  const Eigen::Vector2d moment = section_first_moment(mesh);
  const auto unit_load = [](const Eigen::Vector2d&) { return 1.0; };

  Eigen::VectorXd z0;
  double m0 = 0.0;
  bool have_z0 = false;

  result.slices.reserve(x3_samples.size());
  for (double x3 : x3_samples) {
    NonlocalSlice slice;
    slice.x3 = x3;
    slice.mean_f3_matrix = matrix_load_average(mesh, pb.load, x3);

    if (!have_z0 || pb.stiffness_x3_dependent) {
      z0 = solve_matrix_corrector(mesh, matrix_law_at(pb, x3), unit_load, opt);
      m0 = matrix_z3_integral(mesh, z0) / area;
      have_z0 = true;
    }
    slice.m0 = m0;

    const auto load3 = [load = pb.load, x3](const Eigen::Vector2d& p) {
      return load(Eigen::Vector3d(p.x(), p.y(), x3), Region::Matrix).z();
    };
    const double qbar = slice.mean_f3_matrix;
    const Eigen::VectorXd z00 = solve_matrix_corrector(
        mesh, matrix_law_at(pb, x3),
        [&load3, qbar](const Eigen::Vector2d& p) { return load3(p) - qbar; },
        opt);
    slice.m00 = matrix_z3_integral(mesh, z00) / area;

    const BeamSample beam = eval_beam(result.limit, x3);
    slice.mean_u3 =
        beam.xi3 - (moment.x() * beam.xi1p + moment.y() * beam.xi2p) / area;
    slice.U = slice.mean_u3 + slice.m0 * slice.mean_f3_matrix + slice.m00;

    const Eigen::VectorXd z_full =
        solve_matrix_corrector(mesh, matrix_law_at(pb, x3), load3, opt);
    slice.U_direct = slice.mean_u3 + matrix_z3_integral(mesh, z_full) / area;

    result.slices.push_back(slice);
  }
  return result;
}

}  // namespace fibrod
