#include "fibrod/rod_micro.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fibrod/quadrature.hpp"

namespace fibrod {

namespace {

// Geometry of one prism: triangle footprint and the two bounding planes.
struct PrismFrame {
  const Tri* tri = nullptr;
  std::array<int, 6> nodes{};  // lower plane first, then upper
  TriGeometry tg;
  double z0 = 0, dz = 0;
  Region region = Region::Fiber;
};

PrismFrame prism_frame(const ExtrudedMesh& m, int p) {
  const int ntris = (int)m.section.tris.size();
  const int layer = p / ntris;
  const Tri& t = m.section.tris[p % ntris];
  PrismFrame f;
  f.tri = &t;
  f.tg = tri_geometry(m.section, t);
  f.z0 = m.planes[layer];
  f.dz = m.planes[layer + 1] - f.z0;
  f.region = t.region;
  for (int i = 0; i < 3; ++i) {
    f.nodes[i] = m.node(t.v[i], layer);
    f.nodes[i + 3] = m.node(t.v[i], layer + 1);
  }
  return f;
}

// P1 shape values and unscaled gradients at barycentric (a, b) and axial
// fraction t.
struct ShapeEval {
  std::array<double, 6> N{};
  std::array<Eigen::Vector3d, 6> g{};
  Eigen::Vector3d x{0, 0, 0};
};

ShapeEval shape_eval(const ExtrudedMesh& m, const PrismFrame& f, double a,
                     double b, double t) {
  const double lambda[3] = {1 - a - b, a, b};
  const double sigma[2] = {1 - t, t};
  const double dsigma[2] = {-1 / f.dz, 1 / f.dz};
  ShapeEval s;
  Eigen::Vector2d xp = Eigen::Vector2d::Zero();
  for (int i = 0; i < 3; ++i)
    xp += lambda[i] * m.section.vertices[f.tri->v[i]];
  s.x = {xp.x(), xp.y(), f.z0 + t * f.dz};
  for (int lev = 0; lev < 2; ++lev)
    for (int i = 0; i < 3; ++i) {
      const int k = 3 * lev + i;
      s.N[k] = lambda[i] * sigma[lev];
      s.g[k] = {f.tg.grad(0, i) * sigma[lev], f.tg.grad(1, i) * sigma[lev],
                lambda[i] * dsigma[lev]};
    }
  return s;
}

Eigen::Vector3d eval_value(const Eigen::VectorXd& u, const PrismFrame& f,
                           const ShapeEval& s) {
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  for (int k = 0; k < 6; ++k) v += s.N[k] * u.segment<3>(3 * f.nodes[k]);
  return v;
}

Eigen::Matrix3d eval_gradient(const Eigen::VectorXd& u, const PrismFrame& f,
                              const ShapeEval& s) {
  Eigen::Matrix3d g = Eigen::Matrix3d::Zero();
  for (int k = 0; k < 6; ++k)
    g += u.segment<3>(3 * f.nodes[k]) * s.g[k].transpose();
  return g;
}

// Mandel strain columns of one shape gradient; ie2 and ie are the factors on
// the in-plane and mixed slots (1 for the unscaled strain).
void fill_strain_columns(Eigen::Matrix<double, 6, 18>& B, int k,
                         const Eigen::Vector3d& g, double ie2, double ie) {
  const double h = std::sqrt(2.0) / 2;
  const int col = 3 * k;
  B(0, col) = ie2 * g[0];
  B(4, col) = ie * h * g[2];
  B(5, col) = ie2 * h * g[1];
  B(1, col + 1) = ie2 * g[1];
  B(3, col + 1) = ie * h * g[2];
  B(5, col + 1) = ie2 * h * g[0];
  B(2, col + 2) = g[2];
  B(3, col + 2) = ie * h * g[1];
  B(4, col + 2) = ie * h * g[0];
}

void check_problem(const RodMicroProblem& pb) {
  if (!pb.mesh || !pb.stiffness || !pb.load)
    throw std::invalid_argument("rod micro problem is incomplete");
}

PrismFrame checked_frame(const ExtrudedMesh& m, const PrismPoint& p) {
  if (p.prism < 0 || p.prism >= m.num_prisms())
    throw std::out_of_range("prism index out of range");
  return prism_frame(m, p.prism);
}

void check_nodal(const ExtrudedMesh& m, const Eigen::VectorXd& u) {
  if (u.size() != 3 * m.num_nodes())
    throw std::invalid_argument("nodal vector size does not match the mesh");
}

const ExtrudedMesh& solution_mesh(const RodMicroSolution& sol) {
  if (!sol.mesh) throw std::invalid_argument("solution has no mesh");
  return *sol.mesh;
}

// Per-region stiffness sampler; homogeneous laws are evaluated once.
struct StiffnessCache {
  const RodMicroProblem* pb = nullptr;
  bool cached[2] = {false, false};
  Mandel6 value[2] = {Mandel6::Zero(), Mandel6::Zero()};

  const Mandel6& at(const Eigen::Vector3d& x, Region reg) {
    const int r = (int)reg;
    if (pb->stiffness_varies) {
      value[r] = pb->stiffness(x, reg);
      return value[r];
    }
    if (!cached[r]) {
      value[r] = pb->stiffness(x, reg);
      cached[r] = true;
    }
    return value[r];
  }
};

}  // namespace

Eigen::Matrix3d scaled_strain(const Eigen::Matrix3d& grad, double eps) {
  const Eigen::Matrix3d H = scaled_gradient(grad, eps);
  return 0.5 * (H + H.transpose());
}

Eigen::Matrix3d scaled_gradient(const Eigen::Matrix3d& grad, double eps) {
  const double ie = 1 / eps, ie2 = ie * ie;
  Eigen::Matrix3d H;
  H << ie2 * grad(0, 0), ie2 * grad(0, 1), ie * grad(0, 2),  //
      ie2 * grad(1, 0), ie2 * grad(1, 1), ie * grad(1, 2),   //
      ie * grad(2, 0), ie * grad(2, 1), grad(2, 2);
  return H;
}

Eigen::Vector3d prism_location(const ExtrudedMesh& m, const PrismPoint& p) {
  const PrismFrame f = checked_frame(m, p);
  return shape_eval(m, f, p.a, p.b, p.t).x;
}

Eigen::Vector3d field_value(const ExtrudedMesh& m, const Eigen::VectorXd& u,
                            const PrismPoint& p) {
  const PrismFrame f = checked_frame(m, p);
  check_nodal(m, u);
  return eval_value(u, f, shape_eval(m, f, p.a, p.b, p.t));
}

Eigen::Matrix3d field_gradient(const ExtrudedMesh& m, const Eigen::VectorXd& u,
                               const PrismPoint& p) {
  const PrismFrame f = checked_frame(m, p);
  check_nodal(m, u);
  return eval_gradient(u, f, shape_eval(m, f, p.a, p.b, p.t));
}

Eigen::VectorXd interpolate_nodal(
    const ExtrudedMesh& m,
    const std::function<Eigen::Vector3d(const Eigen::Vector3d&)>& f) {
  Eigen::VectorXd u(3 * m.num_nodes());
  for (int l = 0; l < m.num_planes(); ++l)
    for (int i = 0; i < m.nodes_per_plane(); ++i) {
      const Eigen::Vector2d& v = m.section.vertices[i];
      u.segment<3>(3 * m.node(i, l)) =
          f(Eigen::Vector3d(v.x(), v.y(), m.planes[l]));
    }
  return u;
}

double field_norm(const ExtrudedMesh& m, const Eigen::VectorXd& u,
                  NormKind kind, int component, std::optional<Region> region) {
  check_nodal(m, u);
  if (component < -1 || component > 2)
    throw std::invalid_argument("component must be 0..2 or -1");
  double acc = 0;
  for (int p = 0; p < m.num_prisms(); ++p) {
    const PrismFrame f = prism_frame(m, p);
    if (region && f.region != *region) continue;
    for (const auto& tq : tri3)
      for (const auto& sq : gauss2) {
        const ShapeEval s = shape_eval(m, f, tq.a, tq.b, sq.t);
        const double w = tq.w * sq.w * f.tg.area * f.dz;
        const Eigen::Vector3d val = eval_value(u, f, s);
        const Eigen::Matrix3d g = eval_gradient(u, f, s);
        double d = 0;
        for (int c = 0; c < 3; ++c) {
          if (component >= 0 && c != component) continue;
          d += val[c] * val[c];
          if (kind == NormKind::kH1) d += g.row(c).squaredNorm();
          if (kind == NormKind::kSliceH1)
            d += g(c, 0) * g(c, 0) + g(c, 1) * g(c, 1);
        }
        acc += w * d;
      }
  }
  return std::sqrt(acc);
}

RodMicroProblem make_rod_micro_problem(const ExtrudedMesh& mesh,
                                       const ElasticityTensorField& C,
                                       const LoadField& f) {
  Eigen::Vector2d lo = mesh.section.vertices.front(), hi = lo;
  for (const auto& v : mesh.section.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  const TensorReport rep =
      check_admissible(C, {lo.x(), lo.y(), mesh.planes.front()},
                       {hi.x(), hi.y(), mesh.planes.back()});
  if (!rep.ok()) {
    std::string msg = "stiffness law rejected";
    for (const auto& v : rep.violations) msg += "; " + v;
    throw std::invalid_argument(msg);
  }
  RodMicroProblem pb;
  pb.mesh = &mesh;
  pb.stiffness = [C](const Eigen::Vector3d& x, Region reg) {
    return C.eval(x, Eigen::Vector2d::Zero(), reg);
  };
  pb.load = [f](const Eigen::Vector3d& x, Region reg) {
    return f.eval(x, Eigen::Vector2d::Zero(), reg);
  };
  pb.stiffness_varies = C.x_dependent() || C.x3_dependent();
  return pb;
}

AssembledSystem assemble_rod_micro(const RodMicroProblem& pb, double eps) {
  check_problem(pb);
  if (!(eps > 0)) throw std::invalid_argument("eps must be positive");
  const ExtrudedMesh& m = *pb.mesh;
  const int n = 3 * m.num_nodes();
  const double wM = pb.matrix_weight.value_or(eps * eps);
  const double ie = 1 / eps, ie2 = ie * ie;

  StiffnessCache C{&pb};
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve((size_t)m.num_prisms() * 18 * 18);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);

  for (int p = 0; p < m.num_prisms(); ++p) {
    const PrismFrame f = prism_frame(m, p);
    const double weight = f.region == Region::Fiber ? 1.0 : wM;
    Eigen::Matrix<double, 18, 18> Ke;
    Ke.setZero();
    Eigen::Matrix<double, 18, 1> fe;
    fe.setZero();
    for (const auto& tq : tri3)
      for (const auto& sq : gauss2) {
        const ShapeEval s = shape_eval(m, f, tq.a, tq.b, sq.t);
        const double w = tq.w * sq.w * f.tg.area * f.dz;
        Eigen::Matrix<double, 6, 18> B;
        B.setZero();
        for (int k = 0; k < 6; ++k) fill_strain_columns(B, k, s.g[k], ie2, ie);
        Ke.noalias() += (w * weight) * B.transpose() * (C.at(s.x, f.region) * B);
        const Eigen::Vector3d fv = pb.load(s.x, f.region);
        for (int k = 0; k < 6; ++k)
          for (int c = 0; c < 3; ++c)
            fe[3 * k + c] += w * s.N[k] * pb.load_scaling[c] * fv[c];
      }
    for (int i = 0; i < 18; ++i) {
      const int gi = 3 * f.nodes[i / 3] + i % 3;
      b[gi] += fe[i];
      for (int j = 0; j < 18; ++j)
        trips.emplace_back(gi, 3 * f.nodes[j / 3] + j % 3, Ke(i, j));
    }
  }
  AssembledSystem sys;
  sys.A.resize(n, n);
  sys.A.setFromTriplets(trips.begin(), trips.end());
  sys.b = std::move(b);
  return sys;
}

RodMicroSolution solve_rod_micro(const RodMicroProblem& pb, double eps,
                                 const SolveOptions& opt) {
  AssembledSystem sys = assemble_rod_micro(pb, eps);
  const ExtrudedMesh& m = *pb.mesh;
  std::vector<int> zero;
  const int top = m.num_planes() - 1;
  zero.reserve(6 * m.nodes_per_plane());
  for (int i = 0; i < m.nodes_per_plane(); ++i)
    for (int c = 0; c < 3; ++c) {
      zero.push_back(3 * m.node(i, 0) + c);
      zero.push_back(3 * m.node(i, top) + c);
    }
  const DofElimination elim =
      DofElimination::build(3 * m.num_nodes(), zero);
  const SpMat A = elim.reduce(sys.A);
  const Eigen::VectorXd b = elim.reduce(sys.b);
  const SolveResult res = solve_spd(A, b, opt);

  RodMicroSolution sol;
  sol.eps = eps;
  sol.mesh = pb.mesh;
  sol.u = elim.expand(res.x);
  sol.energy = res.x.dot(A * res.x);
  sol.work = b.dot(res.x);
  sol.residual = res.relative_residual;
  sol.solver_path = res.path;
  sol.iterations = res.iterations;
  return sol;
}

PhysicalFieldView::PhysicalFieldView(const RodMicroSolution& sol)
    : mesh_(sol.mesh), u_(&sol.u), eps_(sol.eps) {
  if (!mesh_) throw std::invalid_argument("solution has no mesh");
  check_nodal(*mesh_, sol.u);
  if (!(eps_ > 0)) throw std::invalid_argument("eps must be positive");
}

Eigen::Vector3d PhysicalFieldView::map_point(
    const Eigen::Vector3d& fixed_point) const {
  return {eps_ * fixed_point.x(), eps_ * fixed_point.y(), fixed_point.z()};
}

Eigen::Vector3d PhysicalFieldView::value(
    const Eigen::Vector3d& physical_point) const {
  const SectionMesh& sec = mesh_->section;
  const Eigen::Vector2d xp(physical_point.x() / eps_,
                           physical_point.y() / eps_);
  const auto& planes = mesh_->planes;
  const double ztol = 1e-12 * std::max(1.0, mesh_->length());
  const double z = physical_point.z();
  if (z < planes.front() - ztol || z > planes.back() + ztol)
    throw std::out_of_range("point is outside the rod axially");
  int layer =
      (int)(std::upper_bound(planes.begin(), planes.end(), z) - planes.begin()) -
      1;
  layer = std::clamp(layer, 0, mesh_->num_planes() - 2);
  const double t = (z - planes[layer]) / (planes[layer + 1] - planes[layer]);

  const int ntris = (int)sec.tris.size();
  const double tol = 1e-9;
  for (int k = 0; k < ntris; ++k) {
    const int ti = (hint_tri_ + k) % ntris;
    const Tri& tri = sec.tris[ti];
    const Eigen::Vector2d &q0 = sec.vertices[tri.v[0]],
                          &q1 = sec.vertices[tri.v[1]],
                          &q2 = sec.vertices[tri.v[2]];
    const Eigen::Vector2d e1 = q1 - q0, e2 = q2 - q0, r = xp - q0;
    const double det = e1.x() * e2.y() - e1.y() * e2.x();
    const double a = (r.x() * e2.y() - r.y() * e2.x()) / det;
    const double b = (e1.x() * r.y() - e1.y() * r.x()) / det;
    if (a < -tol || b < -tol || a + b > 1 + tol) continue;
    hint_tri_ = ti;
    const PrismPoint pp{layer * ntris + ti, a, b, t};
    const Eigen::Vector3d v = field_value(*mesh_, *u_, pp);
    return {v.x() / eps_, v.y() / eps_, v.z()};
  }
  throw std::out_of_range("point is outside the rod cross section");
}

PhysicalFieldView::Sample PhysicalFieldView::sample(const PrismPoint& p) const {
  const PrismFrame f = checked_frame(*mesh_, p);
  const SectionMesh& sec = mesh_->section;

  // Physical footprint of the triangle and its own P1 gradients; nothing
  // here reuses the fixed-domain element geometry.
  std::array<Eigen::Vector2d, 3> q;
  for (int i = 0; i < 3; ++i) q[i] = eps_ * sec.vertices[f.tri->v[i]];
  const double det = (q[1] - q[0]).x() * (q[2] - q[0]).y() -
                     (q[1] - q[0]).y() * (q[2] - q[0]).x();
  std::array<Eigen::Vector2d, 3> gp;
  for (int i = 0; i < 3; ++i) {
    const Eigen::Vector2d &qa = q[(i + 1) % 3], &qb = q[(i + 2) % 3];
    gp[i] = Eigen::Vector2d(qa.y() - qb.y(), qb.x() - qa.x()) / det;
  }

  const double lambda[3] = {1 - p.a - p.b, p.a, p.b};
  const double sigma[2] = {1 - p.t, p.t};
  const double dsigma[2] = {-1 / f.dz, 1 / f.dz};

  Sample out;
  Eigen::Vector2d xp = Eigen::Vector2d::Zero();
  for (int i = 0; i < 3; ++i) xp += lambda[i] * q[i];
  out.point = {xp.x(), xp.y(), f.z0 + p.t * f.dz};
  out.value.setZero();
  out.gradient.setZero();
  for (int lev = 0; lev < 2; ++lev)
    for (int i = 0; i < 3; ++i) {
      const Eigen::Vector3d un = u_->segment<3>(3 * f.nodes[3 * lev + i]);
      const Eigen::Vector3d uhat(un.x() / eps_, un.y() / eps_, un.z());
      const Eigen::Vector3d g(gp[i].x() * sigma[lev], gp[i].y() * sigma[lev],
                              lambda[i] * dsigma[lev]);
      out.value += lambda[i] * sigma[lev] * uhat;
      out.gradient += uhat * g.transpose();
    }
  return out;
}

double physical_residual(const RodMicroSolution& sol,
                         const RodMicroProblem& pb) {
  check_problem(pb);
  const ExtrudedMesh& m = *pb.mesh;
  check_nodal(m, sol.u);
  const double eps = sol.eps;
  const double wM = pb.matrix_weight.value_or(eps * eps);
  const int n = 3 * m.num_nodes();

  StiffnessCache C{&pb};
  Eigen::VectorXd r = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);

  for (int p = 0; p < m.num_prisms(); ++p) {
    const PrismFrame f = prism_frame(m, p);
    const double weight = f.region == Region::Fiber ? 1.0 : wM;

    // Element geometry in physical coordinates.
    std::array<Eigen::Vector2d, 3> q;
    for (int i = 0; i < 3; ++i)
      q[i] = eps * m.section.vertices[f.tri->v[i]];
    const double det = (q[1] - q[0]).x() * (q[2] - q[0]).y() -
                       (q[1] - q[0]).y() * (q[2] - q[0]).x();
    const double area_hat = 0.5 * det;
    std::array<Eigen::Vector2d, 3> gp;
    for (int i = 0; i < 3; ++i) {
      const Eigen::Vector2d &qa = q[(i + 1) % 3], &qb = q[(i + 2) % 3];
      gp[i] = Eigen::Vector2d(qa.y() - qb.y(), qb.x() - qa.x()) / det;
    }

    Eigen::Matrix<double, 18, 1> ue;
    for (int k = 0; k < 6; ++k) {
      const Eigen::Vector3d un = sol.u.segment<3>(3 * f.nodes[k]);
      ue.segment<3>(3 * k) = Eigen::Vector3d(un.x() / eps, un.y() / eps,
                                             un.z());
    }

    Eigen::Matrix<double, 18, 18> Ke;
    Ke.setZero();
    Eigen::Matrix<double, 18, 1> fe;
    fe.setZero();
    const double dsigma[2] = {-1 / f.dz, 1 / f.dz};
    for (const auto& tq : tri3)
      for (const auto& sq : gauss2) {
        const double lambda[3] = {1 - tq.a - tq.b, tq.a, tq.b};
        const double sigma[2] = {1 - sq.t, sq.t};
        Eigen::Matrix<double, 6, 18> B;
        B.setZero();
        // Coefficients are evaluated at the fixed-domain image of the point.
        const ShapeEval s = shape_eval(m, f, tq.a, tq.b, sq.t);
        for (int lev = 0; lev < 2; ++lev)
          for (int i = 0; i < 3; ++i) {
            const Eigen::Vector3d g(gp[i].x() * sigma[lev],
                                    gp[i].y() * sigma[lev],
                                    lambda[i] * dsigma[lev]);
            fill_strain_columns(B, 3 * lev + i, g, 1.0, 1.0);
          }
        const double w = tq.w * sq.w * area_hat * f.dz;
        Ke.noalias() += (w * weight) * B.transpose() * (C.at(s.x, f.region) * B);
        const Eigen::Vector3d fv = pb.load(s.x, f.region);
        const Eigen::Vector3d fhat(eps * pb.load_scaling[0] * fv[0],
                                   eps * pb.load_scaling[1] * fv[1],
                                   pb.load_scaling[2] * fv[2]);
        for (int lev = 0; lev < 2; ++lev)
          for (int i = 0; i < 3; ++i)
            for (int c = 0; c < 3; ++c)
              fe[3 * (3 * lev + i) + c] += w * lambda[i] * sigma[lev] * fhat[c];
      }

    const Eigen::Matrix<double, 18, 1> re = Ke * ue - fe;
    for (int i = 0; i < 18; ++i) {
      const int gi = 3 * f.nodes[i / 3] + i % 3;
      r[gi] += re[i];
      b[gi] += fe[i];
    }
  }

  // Mapped test fields vanish on the clamped planes.
  const int top = m.num_planes() - 1;
  for (int i = 0; i < m.nodes_per_plane(); ++i)
    for (int c = 0; c < 3; ++c) {
      r[3 * m.node(i, 0) + c] = 0;
      r[3 * m.node(i, top) + c] = 0;
      b[3 * m.node(i, 0) + c] = 0;
      b[3 * m.node(i, top) + c] = 0;
    }
  const double bn = b.norm();
  return bn > 0 ? r.norm() / bn : r.norm();
}

SectionCurves cross_section_averages(const RodMicroSolution& sol) {
  const ExtrudedMesh& m = solution_mesh(sol);
  check_nodal(m, sol.u);
  const SectionMesh& sec = m.section;
  const int ntris = (int)sec.tris.size();
  const int nl = m.num_planes() - 1;
  const double areaF = sec.fiber_area();
  const double areaM = sec.matrix_area();
  const double areaT = sec.total_area();
  const double eps = sol.eps;

  SectionCurves c;
  c.x3.resize(nl);
  c.fiber_strain.assign(nl, Vec6::Zero());
  c.matrix_strain.assign(nl, Vec6::Zero());
  c.mean_u12.assign(nl, Eigen::Vector2d::Zero());
  c.mean_u3.assign(nl, 0.0);
  c.fiber_twist.assign(nl, 0.0);

  for (int l = 0; l < nl; ++l) {
    c.x3[l] = 0.5 * (m.planes[l] + m.planes[l + 1]);
    Eigen::Matrix3d EF = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d EM = Eigen::Matrix3d::Zero();
    Eigen::Vector2d u12 = Eigen::Vector2d::Zero();
    double u3 = 0, twist = 0;
    for (int tt = 0; tt < ntris; ++tt) {
      const PrismFrame f = prism_frame(m, l * ntris + tt);
      for (const auto& tq : tri3) {
        const ShapeEval s = shape_eval(m, f, tq.a, tq.b, 0.5);
        const double w = tq.w * f.tg.area;
        const Eigen::Vector3d val = eval_value(sol.u, f, s);
        const Eigen::Matrix3d g = eval_gradient(sol.u, f, s);
        const Eigen::Matrix3d E = scaled_strain(g, eps);
        if (f.region == Region::Fiber) {
          EF += w * E;
          twist += w * (g(1, 0) - g(0, 1)) / (2 * eps);
        } else {
          EM += w * E;
        }
        u12 += w * val.head<2>();
        u3 += w * val.z();
      }
    }
    if (areaF > 0) {
      c.fiber_strain[l] = to_mandel(EF / areaF);
      c.fiber_twist[l] = twist / areaF;
    }
    if (areaM > 0) c.matrix_strain[l] = to_mandel(EM / areaM);
    c.mean_u12[l] = u12 / areaT;
    c.mean_u3[l] = u3 / areaT;
  }
  return c;
}

const std::array<const char*, 6>& AprioriNorms::names() {
  static const std::array<const char*, 6> n = {
      "strain_fiber",  "grad_fiber",        "h1_fiber",
      "grad_matrix",   "h1_inplane_matrix", "u3_slice_matrix"};
  return n;
}

AprioriNorms apriori_norms(const RodMicroSolution& sol) {
  const ExtrudedMesh& m = solution_mesh(sol);
  check_nodal(m, sol.u);
  const double eps = sol.eps;
  double sF = 0, gF = 0, hF = 0, gM = 0, hM = 0, uM = 0;
  for (int p = 0; p < m.num_prisms(); ++p) {
    const PrismFrame f = prism_frame(m, p);
    for (const auto& tq : tri3)
      for (const auto& sq : gauss2) {
        const ShapeEval s = shape_eval(m, f, tq.a, tq.b, sq.t);
        const double w = tq.w * sq.w * f.tg.area * f.dz;
        const Eigen::Vector3d val = eval_value(sol.u, f, s);
        const Eigen::Matrix3d g = eval_gradient(sol.u, f, s);
        const Eigen::Matrix3d H = scaled_gradient(g, eps);
        const double h2 = eps * eps * H.squaredNorm();
        if (f.region == Region::Fiber) {
          sF += w * (0.5 * (H + H.transpose())).squaredNorm();
          gF += w * h2;
          hF += w * (val.squaredNorm() + g.squaredNorm());
        } else {
          gM += w * h2;
          hM += w * (val.head<2>().squaredNorm() + g.row(0).squaredNorm() +
                     g.row(1).squaredNorm());
          uM += w * (val.z() * val.z() + g(2, 0) * g(2, 0) +
                     g(2, 1) * g(2, 1));
        }
      }
  }
  AprioriNorms out;
  out.strain_fiber = std::sqrt(sF);
  out.grad_fiber = std::sqrt(gF);
  out.h1_fiber = std::sqrt(hF);
  out.grad_matrix = std::sqrt(gM);
  out.h1_inplane_matrix = std::sqrt(hM);
  out.u3_slice_matrix = std::sqrt(uM);
  return out;
}

GradientControlTerms gradient_control_terms(const RodMicroSolution& sol) {
  const ExtrudedMesh& m = solution_mesh(sol);
  check_nodal(m, sol.u);
  GradientControlTerms t;
  for (int p = 0; p < m.num_prisms(); ++p) {
    const PrismFrame f = prism_frame(m, p);
    for (const auto& tq : tri3)
      for (const auto& sq : gauss2) {
        const ShapeEval s = shape_eval(m, f, tq.a, tq.b, sq.t);
        const double w = tq.w * sq.w * f.tg.area * f.dz;
        const Eigen::Matrix3d H =
            scaled_gradient(eval_gradient(sol.u, f, s), sol.eps);
        if (f.region == Region::Fiber) {
          t.h_fiber_sq += w * H.squaredNorm();
        } else {
          t.h_matrix_sq += w * H.squaredNorm();
          t.e_matrix_sq += w * (0.5 * (H + H.transpose())).squaredNorm();
        }
      }
  }
  return t;
}

GradientControlEstimate estimate_gradient_control(const ExtrudedMesh& m,
                                                  double eps) {
  if (!(eps > 0)) throw std::invalid_argument("eps must be positive");
  const int npp = m.nodes_per_plane();
  const int top = m.num_planes() - 1;
  std::vector<int> red(3 * m.num_nodes(), -1);
  int nred = 0;
  for (int dof = 0; dof < 3 * m.num_nodes(); ++dof) {
    const int layer = (dof / 3) / npp;
    if (layer != 0 && layer != top) red[dof] = nred++;
  }
  if (nred > 3000)
    throw std::invalid_argument(
        "gradient control estimate needs a coarse mesh; got " +
        std::to_string(nred) + " free unknowns");
  if (nred == 0)
    throw std::invalid_argument("mesh has no free unknowns between the ends");

  const double ie = 1 / eps, ie2 = ie * ie;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(nred, nred);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(nred, nred);

  for (int p = 0; p < m.num_prisms(); ++p) {
    const PrismFrame f = prism_frame(m, p);
    Eigen::Matrix<double, 18, 18> Aloc, Bloc;
    Aloc.setZero();
    Bloc.setZero();
    for (const auto& tq : tri3)
      for (const auto& sq : gauss2) {
        const ShapeEval s = shape_eval(m, f, tq.a, tq.b, sq.t);
        const double w = tq.w * sq.w * f.tg.area * f.dz;
        // Rows of HB are the nine scaled-gradient entries per unit dof.
        Eigen::Matrix<double, 9, 18> HB;
        HB.setZero();
        for (int k = 0; k < 6; ++k)
          for (int c = 0; c < 3; ++c) {
            const double scale[3] = {c < 2 ? ie2 : ie, c < 2 ? ie2 : ie,
                                     c < 2 ? ie : 1.0};
            for (int j = 0; j < 3; ++j)
              HB(3 * c + j, 3 * k + c) = scale[j] * s.g[k][j];
          }
        if (f.region == Region::Fiber) {
          Aloc.noalias() += w * HB.transpose() * HB;
        } else {
          Bloc.noalias() += w * HB.transpose() * HB;
          Eigen::Matrix<double, 6, 18> EB;
          EB.setZero();
          for (int k = 0; k < 6; ++k)
            fill_strain_columns(EB, k, s.g[k], ie2, ie);
          Aloc.noalias() += w * EB.transpose() * EB;
        }
      }
    for (int i = 0; i < 18; ++i) {
      const int gi = red[3 * f.nodes[i / 3] + i % 3];
      if (gi < 0) continue;
      for (int j = 0; j < 18; ++j) {
        const int gj = red[3 * f.nodes[j / 3] + j % 3];
        if (gj < 0) continue;
        A(gi, gj) += Aloc(i, j);
        B(gi, gj) += Bloc(i, j);
      }
    }
  }

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges;
  ges.compute(B, A, Eigen::EigenvaluesOnly | Eigen::Ax_lBx);
  if (ges.info() != Eigen::Success)
    throw SolverError("generalized eigensolve for the gradient control "
                      "constant failed");
  const double lmax = ges.eigenvalues().maxCoeff();
  GradientControlEstimate out;
  out.ratio_bound = lmax;
  out.constant = std::sqrt(std::max(lmax, 0.0));
  out.dofs = nred;
  return out;
}

}  // namespace fibrod
