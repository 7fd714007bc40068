#include "fibrod/hom_micro.hpp"

#include <cmath>
#include <stdexcept>

#include "fibrod/quadrature.hpp"

namespace fibrod {

namespace {

int lattice_count(double half_width, double eps) {
  if (!(eps > 0) || !(half_width > 0)) {
    throw std::invalid_argument("cell size and half width must be positive");
  }
  const double ratio = 2.0 * half_width / eps;
  const int k = (int)std::llround(ratio);
  if (k < 1 || std::abs(ratio - k) > 1e-9 * ratio) {
    throw std::invalid_argument("eps must tile (-l, l) an integer number of times");
  }
  return k;
}

int lattice_index(double coord, double half_width, double eps, int k) {
  int i = (int)std::floor((coord + half_width) / eps);
  return std::min(std::max(i, 0), k - 1);
}

}  // namespace

Eigen::Vector2d fold_to_cell(const Eigen::Vector2d& xp, double half_width,
                             double eps) {
  const int k = lattice_count(half_width, eps);
  Eigen::Vector2d y;
  for (int d = 0; d < 2; ++d) {
    const int i = lattice_index(xp[d], half_width, eps, k);
    const double center = -half_width + eps * (i + 0.5);
    y[d] = (xp[d] - center) / eps;
  }
  return y;
}

HomMicroSolution solve_hom_micro(const HomMicroProblem& pb,
                                 const SolveOptions& opt) {
  if (pb.mesh == nullptr || !pb.stiffness || !pb.load) {
    throw std::invalid_argument("problem needs a mesh, a stiffness and a load");
  }
  const int k = lattice_count(pb.half_width, pb.eps);
  if ((int)pb.mesh->section.fiber_centers.size() != k * k) {
    throw std::invalid_argument("mesh does not tile the section with this eps");
  }
  const double l = pb.half_width;
  const double eps = pb.eps;

  RodMicroProblem rp;
  rp.mesh = pb.mesh;
  rp.stiffness = [&pb, l, eps](const Eigen::Vector3d& x, Region r) {
    return pb.stiffness(x, fold_to_cell(x.head<2>(), l, eps), r);
  };
  rp.load = [&pb, l, eps](const Eigen::Vector3d& x, Region r) {
    return pb.load(x, fold_to_cell(x.head<2>(), l, eps), r);
  };
  rp.load_scaling = Eigen::Vector3d(eps, eps, 1.0);
  rp.matrix_weight = eps * eps;
  rp.stiffness_varies = pb.stiffness_varies;

  HomMicroSolution sol;
  sol.eps = eps;
  // eps = 1 keeps the physical strain; the matrix weight carries eps^2.
  sol.base = solve_rod_micro(rp, 1.0, opt);

  sol.u3_l2 = field_norm(*pb.mesh, sol.base.u, NormKind::kL2, 2);
  sol.eps_u_h1 = eps * field_norm(*pb.mesh, sol.base.u, NormKind::kH1);

  // J_eps reuses the weighted form with the identity contraction.
  RodMicroProblem ip = rp;
  ip.stiffness = [](const Eigen::Vector3d&, Region) {
    return Mandel6::Identity().eval();
  };
  ip.stiffness_varies = false;
  ip.load = [](const Eigen::Vector3d&, Region) {
    return Eigen::Vector3d::Zero().eval();
  };
  const AssembledSystem identity_form = assemble_rod_micro(ip, 1.0);
  sol.strain_energy = sol.base.u.dot(identity_form.A * sol.base.u);

  const std::vector<double>& planes = pb.mesh->planes;
  sol.fiber_volume =
      pb.mesh->section.fiber_area() * (planes.back() - planes.front());
  return sol;
}

double two_scale_pairing(
    const ExtrudedMesh& m, double half_width, double eps,
    const Eigen::VectorXd& u, int component,
    const std::function<double(const Eigen::Vector3d&, const Eigen::Vector2d&)>&
        phi) {
  if (u.size() != 3 * (Eigen::Index)m.section.vertices.size() *
                      (Eigen::Index)m.planes.size()) {
    throw std::invalid_argument("field size does not match the mesh");
  }
  const int npp = (int)m.section.vertices.size();
  double acc = 0;
  for (int layer = 0; layer + 1 < (int)m.planes.size(); ++layer) {
    const double z0 = m.planes[layer];
    const double dz = m.planes[layer + 1] - z0;
    for (const Tri& t : m.section.tris) {
      const TriGeometry geo = tri_geometry(m.section, t);
      for (const TriPoint& q : tri3) {
        const double lam[3] = {1.0 - q.a - q.b, q.a, q.b};
        Eigen::Vector2d xp = Eigen::Vector2d::Zero();
        for (int i = 0; i < 3; ++i) xp += lam[i] * m.section.vertices[t.v[i]];
        const Eigen::Vector2d y = fold_to_cell(xp, half_width, eps);
        for (const SegPoint& s : gauss2) {
          double val = 0;
          for (int i = 0; i < 3; ++i) {
            const int lo = 3 * (layer * npp + t.v[i]) + component;
            const int hi = 3 * ((layer + 1) * npp + t.v[i]) + component;
            val += lam[i] * ((1.0 - s.t) * u[lo] + s.t * u[hi]);
          }
          const Eigen::Vector3d x(xp.x(), xp.y(), z0 + s.t * dz);
          acc += geo.area * q.w * dz * s.w * val * phi(x, y);
        }
      }
    }
  }
  return acc;
}

CellTwistCurves hom_twist_curves(const HomMicroSolution& sol,
                                 double half_width) {
  const ExtrudedMesh& m = *sol.base.mesh;
  const int k = lattice_count(half_width, sol.eps);
  const int ncells = k * k;
  const int nlayers = (int)m.planes.size() - 1;
  const int npp = (int)m.section.vertices.size();

  CellTwistCurves out;
  out.x3.resize(nlayers);
  for (int l = 0; l < nlayers; ++l) {
    out.x3[l] = 0.5 * (m.planes[l] + m.planes[l + 1]);
  }
  out.centers.resize(ncells);
  for (int iy = 0; iy < k; ++iy) {
    for (int ix = 0; ix < k; ++ix) {
      out.centers[iy * k + ix] = Eigen::Vector2d(
          -half_width + sol.eps * (ix + 0.5), -half_width + sol.eps * (iy + 0.5));
    }
  }
  out.theta = Eigen::MatrixXd::Zero(nlayers, ncells);

  // Cell of a fiber triangle from the lattice index of its centroid.
  std::vector<int> cell_of_tri(m.section.tris.size(), -1);
  std::vector<double> tri_area(m.section.tris.size(), 0.0);
  Eigen::VectorXd cell_area = Eigen::VectorXd::Zero(ncells);
  for (int ti = 0; ti < (int)m.section.tris.size(); ++ti) {
    const Tri& t = m.section.tris[ti];
    if (t.region != Region::Fiber) continue;
    const Eigen::Vector2d c = (m.section.vertices[t.v[0]] +
                               m.section.vertices[t.v[1]] +
                               m.section.vertices[t.v[2]]) / 3.0;
    const int ix = lattice_index(c.x(), half_width, sol.eps, k);
    const int iy = lattice_index(c.y(), half_width, sol.eps, k);
    cell_of_tri[ti] = iy * k + ix;
    tri_area[ti] = tri_geometry(m.section, t).area;
    cell_area[cell_of_tri[ti]] += tri_area[ti];
  }

  // d1 u_2 is constant per prism for P1 fields; average the two planes.
  // The eps factor turns the physical gradient into the quantity whose
  // fiber average approximates the limit rotation.
  for (int layer = 0; layer < nlayers; ++layer) {
    for (int ti = 0; ti < (int)m.section.tris.size(); ++ti) {
      if (cell_of_tri[ti] < 0) continue;
      const Tri& t = m.section.tris[ti];
      const TriGeometry geo = tri_geometry(m.section, t);
      double d1u2 = 0;
      for (int i = 0; i < 3; ++i) {
        const double lo = sol.base.u[3 * (layer * npp + t.v[i]) + 1];
        const double hi = sol.base.u[3 * ((layer + 1) * npp + t.v[i]) + 1];
        d1u2 += geo.grad(0, i) * 0.5 * (lo + hi);
      }
      out.theta(layer, cell_of_tri[ti]) += sol.eps * tri_area[ti] * d1u2;
    }
    for (int c = 0; c < ncells; ++c) {
      out.theta(layer, c) /= cell_area[c];
    }
  }
  return out;
}

}  // namespace fibrod
