#include "fibrod/rod_limit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "fibrod/quadrature.hpp"

namespace fibrod {
namespace {

// Hermite and P1 shapes on one element of size h at local zeta in [0, 1].
// Slope dofs are physical derivatives, so the Hermite pair carries h.
struct BeamShapes {
  double v[4], d1[4], d2[4];  // Hermite value, first and second derivative
  double p[2], dp[2];         // P1 value and derivative
};

BeamShapes beam_shapes(double zeta, double h) {
  const double z = zeta, z2 = z * z, z3 = z2 * z;
  BeamShapes s;
  s.v[0] = 1 - 3 * z2 + 2 * z3;
  s.v[1] = h * (z - 2 * z2 + z3);
  s.v[2] = 3 * z2 - 2 * z3;
  s.v[3] = h * (z3 - z2);
  s.d1[0] = (6 * z2 - 6 * z) / h;
  s.d1[1] = 1 - 4 * z + 3 * z2;
  s.d1[2] = (6 * z - 6 * z2) / h;
  s.d1[3] = 3 * z2 - 2 * z;
  s.d2[0] = (12 * z - 6) / (h * h);
  s.d2[1] = (6 * z - 4) / h;
  s.d2[2] = (6 - 12 * z) / (h * h);
  s.d2[3] = (6 * z - 2) / h;
  s.p[0] = 1 - z;
  s.p[1] = z;
  s.dp[0] = -1 / h;
  s.dp[1] = 1 / h;
  return s;
}

// G = D u_e for the 12 local dofs, two nodes of (xi1, xi1', xi2, xi2',
// xi3, theta).
Eigen::Matrix<double, 4, 12> slot_matrix(const BeamShapes& s) {
  Eigen::Matrix<double, 4, 12> D = Eigen::Matrix<double, 4, 12>::Zero();
  for (int n = 0; n < 2; ++n) {
    const int c = 6 * n;
    D(0, c + 4) = s.dp[n];
    D(1, c + 0) = s.d2[2 * n];
    D(1, c + 1) = s.d2[2 * n + 1];
    D(2, c + 2) = s.d2[2 * n];
    D(2, c + 3) = s.d2[2 * n + 1];
    D(3, c + 5) = s.dp[n];
  }
  return D;
}

struct SectionLoads {
  Eigen::Vector3d P = Eigen::Vector3d::Zero();  // int_omega f
  Eigen::Vector2d S = Eigen::Vector2d::Zero();  // int_omega x_a f3
};

SectionLoads section_loads(
    const SectionMesh& mesh,
    const std::function<Eigen::Vector3d(const Eigen::Vector3d&, Region)>& load,
    double x3) {
  SectionLoads out;
  for (const Tri& tri : mesh.tris) {
    const TriGeometry tg = tri_geometry(mesh, tri);
    for (const TriPoint& qp : tri3) {
      const Eigen::Vector2d p = (1.0 - qp.a - qp.b) * mesh.vertices[tri.v[0]] +
                                qp.a * mesh.vertices[tri.v[1]] +
                                qp.b * mesh.vertices[tri.v[2]];
      const Eigen::Vector3d f = load({p.x(), p.y(), x3}, tri.region);
      const double w = qp.w * tg.area;
      out.P += w * f;
      out.S += (w * f.z()) * p;
    }
  }
  return out;
}

void check_problem(const RodLimitProblem& pb) {
  if (pb.section == nullptr || !pb.stiffness || !pb.load) {
    throw std::invalid_argument(
        "rod limit problem needs a section mesh, a stiffness and a load");
  }
  if (!(pb.length > 0.0)) {
    throw std::invalid_argument("rod length must be positive");
  }
  if (pb.n3 < 1) {
    throw std::invalid_argument("rod needs at least one element");
  }
}

SectionStiffness fiber_law_at(const RodLimitProblem& pb, double x3) {
  const auto law = pb.stiffness;
  return [law, x3](const Eigen::Vector2d& p) {
    return law({p.x(), p.y(), x3}, Region::Fiber);
  };
}

std::vector<int> clamped_beam_dofs(int n3) {
  std::vector<int> zeros;
  for (int s = 0; s < 6; ++s) {
    zeros.push_back(s);
    zeros.push_back(6 * n3 + s);
  }
  return zeros;
}

// Element load vector from the section resultants at one quadrature point.
void add_element_load(const BeamShapes& s, const SectionLoads& L, double w,
                      Eigen::Matrix<double, 12, 1>& fe) {
  for (int n = 0; n < 2; ++n) {
    const int c = 6 * n;
    fe[c + 0] += w * (L.P.x() * s.v[2 * n] - L.S.x() * s.d1[2 * n]);
    fe[c + 1] += w * (L.P.x() * s.v[2 * n + 1] - L.S.x() * s.d1[2 * n + 1]);
    fe[c + 2] += w * (L.P.y() * s.v[2 * n] - L.S.y() * s.d1[2 * n]);
    fe[c + 3] += w * (L.P.y() * s.v[2 * n + 1] - L.S.y() * s.d1[2 * n + 1]);
    fe[c + 4] += w * L.P.z() * s.p[n];
  }
}

}  // namespace

RodLimitSolution solve_rod_limit(const RodLimitProblem& pb,
                                 const SolveOptions& opt) {
  check_problem(pb);
  RodLimitSolution sol;
  sol.section = pb.section;
  sol.length = pb.length;
  sol.n3 = pb.n3;

  const double h = pb.length / pb.n3;
  if (pb.stiffness_x3_dependent) {
    sol.sections.reserve(3 * pb.n3);
    sol.slice_x3.reserve(3 * pb.n3);
    for (int e = 0; e < pb.n3; ++e) {
      for (const SegPoint& qp : gauss3) {
        const double x3 = (e + qp.t) * h;
        sol.sections.push_back(
            condense_section(*pb.section, fiber_law_at(pb, x3)));
        sol.slice_x3.push_back(x3);
      }
    }
  } else {
    sol.sections.push_back(
        condense_section(*pb.section, fiber_law_at(pb, 0.5 * pb.length)));
  }

  const int nb = 6 * (pb.n3 + 1);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(144 * pb.n3);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(nb);

  for (int e = 0; e < pb.n3; ++e) {
    Eigen::Matrix<double, 12, 12> Ke = Eigen::Matrix<double, 12, 12>::Zero();
    Eigen::Matrix<double, 12, 1> fe = Eigen::Matrix<double, 12, 1>::Zero();
    for (int q = 0; q < 3; ++q) {
      const double x3 = (e + gauss3[q].t) * h;
      const double w = gauss3[q].w * h;
      const BeamShapes s = beam_shapes(gauss3[q].t, h);
      const Eigen::Matrix<double, 4, 12> D = slot_matrix(s);
      const Eigen::Matrix4d& Q = pb.stiffness_x3_dependent
                                     ? sol.sections[3 * e + q].Q
                                     : sol.sections[0].Q;
      Ke += w * (D.transpose() * Q * D);
      add_element_load(s, section_loads(*pb.section, pb.load, x3), w, fe);
    }
    for (int j = 0; j < 12; ++j) {
      for (int i = 0; i < 12; ++i) {
        trips.emplace_back(6 * e + i, 6 * e + j, Ke(i, j));
      }
    }
    b.segment<12>(6 * e) += fe;
  }

  SpMat A(nb, nb);
  A.setFromTriplets(trips.begin(), trips.end());
  const DofElimination elim =
      DofElimination::build(nb, clamped_beam_dofs(pb.n3));
  const SpMat Ared = elim.reduce(A);
  const Eigen::VectorXd bred = elim.reduce(b);
  const SolveResult res = solve_spd(Ared, bred, opt);

  sol.beam = elim.expand(res.x);
  sol.energy = res.x.dot(Ared * res.x);
  sol.work = bred.dot(res.x);
  sol.solver_path = res.path;
  sol.iterations = res.iterations;
  return sol;
}

Eigen::VectorXd solve_rod_limit_monolithic(const RodLimitProblem& pb,
                                           const SolveOptions& opt) {
  check_problem(pb);
  const FiberDofMap map = build_fiber_dof_map(*pb.section);
  const auto base = section_constraints(*pb.section, map);
  const double h = pb.length / pb.n3;
  const int nb = 6 * (pb.n3 + 1);
  const int nc = map.num_dofs();
  const int n = nb + 3 * pb.n3 * nc;

  SectionBlocks shared;
  if (!pb.stiffness_x3_dependent) {
    shared = assemble_section_blocks(*pb.section, map,
                                     fiber_law_at(pb, 0.5 * pb.length));
  }

  std::vector<Eigen::Triplet<double>> trips;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  std::vector<LinearConstraint> constraints;
  constraints.reserve(12 * pb.n3);

  for (int e = 0; e < pb.n3; ++e) {
    for (int q = 0; q < 3; ++q) {
      const double x3 = (e + gauss3[q].t) * h;
      const double w = gauss3[q].w * h;
      const int off = nb + (3 * e + q) * nc;
      const BeamShapes s = beam_shapes(gauss3[q].t, h);
      const Eigen::Matrix<double, 4, 12> D = slot_matrix(s);

      SectionBlocks local;
      if (pb.stiffness_x3_dependent) {
        local = assemble_section_blocks(*pb.section, map,
                                        fiber_law_at(pb, x3));
      }
      const SectionBlocks& blk = pb.stiffness_x3_dependent ? local : shared;

      const Eigen::Matrix<double, 12, 12> Kbb =
          w * (D.transpose() * blk.K_GG * D);
      const Eigen::MatrixXd Kbc = w * (D.transpose() * blk.K_Gc);
      for (int j = 0; j < 12; ++j) {
        for (int i = 0; i < 12; ++i) {
          trips.emplace_back(6 * e + i, 6 * e + j, Kbb(i, j));
        }
      }
      for (int j = 0; j < nc; ++j) {
        for (int i = 0; i < 12; ++i) {
          trips.emplace_back(6 * e + i, off + j, Kbc(i, j));
          trips.emplace_back(off + j, 6 * e + i, Kbc(i, j));
        }
      }
      for (int k = 0; k < blk.K_cc.outerSize(); ++k) {
        for (SpMat::InnerIterator it(blk.K_cc, k); it; ++it) {
          trips.emplace_back(off + (int)it.row(), off + (int)it.col(),
                             w * it.value());
        }
      }

      Eigen::Matrix<double, 12, 1> fe = Eigen::Matrix<double, 12, 1>::Zero();
      add_element_load(s, section_loads(*pb.section, pb.load, x3), w, fe);
      b.segment<12>(6 * e) += fe;

      for (const LinearConstraint& c : base) {
        LinearConstraint shifted;
        shifted.terms.reserve(c.terms.size());
        for (const auto& [dof, weight] : c.terms) {
          shifted.terms.emplace_back(dof + off, weight);
        }
        constraints.push_back(std::move(shifted));
      }
    }
  }

  SpMat A(n, n);
  A.setFromTriplets(trips.begin(), trips.end());
  const DofElimination elim =
      DofElimination::build(n, clamped_beam_dofs(pb.n3), {}, constraints);
  const SolveResult res = solve_spd(elim.reduce(A), elim.reduce(b), opt);
  return elim.expand(res.x).head(nb);
}

BeamSample eval_beam(const RodLimitSolution& sol, double x3) {
  if (sol.n3 < 1 || sol.beam.size() != 6 * (sol.n3 + 1)) {
    throw std::invalid_argument("beam solution is empty");
  }
  const double tol = 1e-9 * std::max(1.0, sol.length);
  if (x3 < -tol || x3 > sol.length + tol) {
    std::ostringstream os;
    os << "axial position " << x3 << " outside the rod [0, " << sol.length
       << "]";
    throw std::out_of_range(os.str());
  }

  const double h = sol.length / sol.n3;
  const int e = std::clamp((int)(x3 / h), 0, sol.n3 - 1);
  const double zeta = std::clamp((x3 - e * h) / h, 0.0, 1.0);
  const BeamShapes s = beam_shapes(zeta, h);
  const Eigen::Matrix<double, 12, 1> u = sol.beam.segment<12>(6 * e);

  BeamSample out;
  const int h1[4] = {0, 1, 6, 7}, h2[4] = {2, 3, 8, 9};
  for (int k = 0; k < 4; ++k) {
    out.xi1 += s.v[k] * u[h1[k]];
    out.xi1p += s.d1[k] * u[h1[k]];
    out.xi1pp += s.d2[k] * u[h1[k]];
    out.xi2 += s.v[k] * u[h2[k]];
    out.xi2p += s.d1[k] * u[h2[k]];
    out.xi2pp += s.d2[k] * u[h2[k]];
  }
  for (int nn = 0; nn < 2; ++nn) {
    out.xi3 += s.p[nn] * u[6 * nn + 4];
    out.xi3p += s.dp[nn] * u[6 * nn + 4];
    out.theta += s.p[nn] * u[6 * nn + 5];
    out.thetap += s.dp[nn] * u[6 * nn + 5];
  }
  return out;
}

Eigen::Vector4d macro_slots(const BeamSample& s) {
  return {s.xi3p, s.xi1pp, s.xi2pp, s.thetap};
}

Vec6 fiber_limit_strain(const RodLimitSolution& sol, int tri,
                        const Eigen::Vector2d& point, double x3) {
  if (sol.section == nullptr || sol.sections.empty()) {
    throw std::invalid_argument("rod limit solution has no section data");
  }
  const Eigen::Vector4d G = macro_slots(eval_beam(sol, x3));

  const CondensedSection* cs = &sol.sections[0];
  if (!sol.slice_x3.empty()) {
    cs = nullptr;
    const double tol = 1e-9 * std::max(1.0, sol.length);
    for (size_t i = 0; i < sol.slice_x3.size(); ++i) {
      if (std::abs(sol.slice_x3[i] - x3) <= tol) {
        cs = &sol.sections[i];
        break;
      }
    }
    if (cs == nullptr) {
      std::ostringstream os;
      os << "x3 dependent law stores sections only at quadrature slices; "
         << x3 << " is not one of them";
      throw std::invalid_argument(os.str());
    }
  }
  return fiber_strain(*sol.section, cs->map, tri, G, cs->cell_field(G),
                      point);
}

Eigen::VectorXd solve_matrix_corrector(
    const SectionMesh& mesh, const SectionStiffness& stiffness,
    const std::function<double(const Eigen::Vector2d&)>& g,
    const SolveOptions& opt) {
  const SpMat K = assemble_inplane_stiffness(mesh, Region::Matrix, stiffness);
  const Eigen::VectorXd b =
      assemble_inplane_axial_load(mesh, Region::Matrix, g);

  // Clamp the closure of the fiber region and drop vertices the matrix
  // region never touches; what remains is definite.
  std::vector<char> fiber(mesh.vertices.size(), 0);
  std::vector<char> matrix(mesh.vertices.size(), 0);
  for (const Tri& t : mesh.tris) {
    for (int v : t.v) (t.region == Region::Fiber ? fiber : matrix)[v] = 1;
  }
  std::vector<int> zeros;
  for (int v = 0; v < (int)mesh.vertices.size(); ++v) {
    if (fiber[v] || !matrix[v]) {
      zeros.push_back(3 * v);
      zeros.push_back(3 * v + 1);
      zeros.push_back(3 * v + 2);
    }
  }
  if (3 * mesh.vertices.size() == zeros.size()) {
    throw std::invalid_argument("section mesh has no free matrix vertices");
  }

  const DofElimination elim =
      DofElimination::build(3 * (int)mesh.vertices.size(), zeros);
  const SolveResult res = solve_spd(elim.reduce(K), elim.reduce(b), opt);
  return elim.expand(res.x);
}

}  // namespace fibrod
