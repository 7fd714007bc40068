#include "fibrod/hom_limit.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fibrod/hom_cell.hpp"
#include "fibrod/quadrature.hpp"

namespace fibrod {
namespace {

constexpr double kSqrtHalf = 0.70710678118654752440;
constexpr double kSqrtTwo = 1.4142135623730950488;

// Macro slots carrying the axial driver G = (d3 c, d3 s1, d3 s2, d3 theta).
constexpr int kGSlot[4] = {5, 1, 3, 4};

// Reduced dof count above which the automatic solver policy switches to the
// iterative path.  The tensorized operator is far denser per row than the
// extruded meshes, so the global direct cap would overcommit memory here.
constexpr int kDenseDirectCap = 12000;

// Injection of the macro strain slots
// p = (d1 u1, d2 u2, (d2 u1 + d1 u2)/2, d3 u1, d3 u2) into a Mandel strain.
Eigen::Matrix<double, 6, 5> macro_strain_injection() {
  Eigen::Matrix<double, 6, 5> P = Eigen::Matrix<double, 6, 5>::Zero();
  P(0, 0) = 1.0;
  P(1, 1) = 1.0;
  P(5, 2) = kSqrtTwo;
  P(4, 3) = kSqrtHalf;
  P(3, 4) = kSqrtHalf;
  return P;
}

void validate_problem(const HomLimitProblem& pb) {
  if (!(pb.half_width > 0.0) || !(pb.length > 0.0))
    throw std::invalid_argument("domain extents must be positive");
  if (pb.nx < 1 || pb.ny < 1)
    throw std::invalid_argument("need at least one macro element per in-plane direction");
  if (pb.n3 < 2)
    throw std::invalid_argument("need at least two macro elements along x3");
  if (!pb.stiffness) throw std::invalid_argument("limit problem stiffness is empty");
  if (!pb.load) throw std::invalid_argument("limit problem load is empty");
}

// Shape values of one macro element at a reference point (xi, eta, zeta).
// Corners are numbered k = 4 * kz + k2 with the in-plane cycle
// (0,0), (1,0), (1,1), (0,1).
struct ShapeVals {
  double W = 0;  // quadrature weight times element volume
  double xi = 0, eta = 0, zeta = 0;
  std::array<double, 4> N2{}, d1{}, d2{};
  std::array<double, 8> Nt{}, dNt{};   // trilinear value and d3
  std::array<double, 8> HV{}, HS{};    // Hermite value/slope shapes
  std::array<double, 8> HVd{}, HSd{};  // their d3
  std::array<double, 8> HV1{}, HS1{};  // in-plane gradients
  std::array<double, 8> HV2{}, HS2{};
};

ShapeVals eval_shapes(const HomLimitSpace& sp, double xi, double eta,
                      double zeta) {
  ShapeVals s;
  s.xi = xi;
  s.eta = eta;
  s.zeta = zeta;
  s.N2 = {(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta};
  s.d1 = {-(1 - eta) / sp.hx, (1 - eta) / sp.hx, eta / sp.hx, -eta / sp.hx};
  s.d2 = {-(1 - xi) / sp.hy, -xi / sp.hy, xi / sp.hy, (1 - xi) / sp.hy};
  const double z = zeta, z2 = z * z, z3 = z2 * z;
  const double Lv[2] = {1 - z, z};
  const double Hv[2] = {2 * z3 - 3 * z2 + 1, -2 * z3 + 3 * z2};
  const double Hs[2] = {sp.hz * (z3 - 2 * z2 + z), sp.hz * (z3 - z2)};
  const double Hvd[2] = {(6 * z2 - 6 * z) / sp.hz, (-6 * z2 + 6 * z) / sp.hz};
  const double Hsd[2] = {3 * z2 - 4 * z + 1, 3 * z2 - 2 * z};
  for (int k = 0; k < 8; ++k) {
    const int k2 = k & 3, kz = k >> 2;
    s.Nt[k] = s.N2[k2] * Lv[kz];
    s.dNt[k] = s.N2[k2] * (kz ? 1.0 : -1.0) / sp.hz;
    s.HV[k] = s.N2[k2] * Hv[kz];
    s.HS[k] = s.N2[k2] * Hs[kz];
    s.HVd[k] = s.N2[k2] * Hvd[kz];
    s.HSd[k] = s.N2[k2] * Hsd[kz];
    s.HV1[k] = s.d1[k2] * Hv[kz];
    s.HS1[k] = s.d1[k2] * Hs[kz];
    s.HV2[k] = s.d2[k2] * Hv[kz];
    s.HS2[k] = s.d2[k2] * Hs[kz];
  }
  return s;
}

std::vector<ShapeVals> quad_shapes(const HomLimitSpace& sp) {
  std::vector<ShapeVals> out;
  out.reserve(12);
  for (const SegPoint& qa : gauss2)
    for (const SegPoint& qb : gauss2)
      for (const SegPoint& qc : gauss3) {
        ShapeVals s = eval_shapes(sp, qa.t, qb.t, qc.t);
        s.W = qa.w * qb.w * qc.w * sp.hx * sp.hy * sp.hz;
        out.push_back(s);
      }
  return out;
}

// Local macro dof 6 * k + slot over the 8 element corners.
Eigen::Matrix<double, 4, 48> axial_driver_rows(const ShapeVals& s) {
  Eigen::Matrix<double, 4, 48> A = Eigen::Matrix<double, 4, 48>::Zero();
  for (int k = 0; k < 8; ++k)
    for (int r = 0; r < 4; ++r) A(r, 6 * k + kGSlot[r]) = s.dNt[k];
  return A;
}

Eigen::Matrix<double, 5, 48> macro_strain_rows(const ShapeVals& s) {
  Eigen::Matrix<double, 5, 48> A = Eigen::Matrix<double, 5, 48>::Zero();
  for (int k = 0; k < 8; ++k) {
    const int c = 6 * k;
    A(0, c + 0) = s.HV1[k];
    A(0, c + 1) = s.HS1[k];
    A(1, c + 2) = s.HV2[k];
    A(1, c + 3) = s.HS2[k];
    A(2, c + 0) = 0.5 * s.HV2[k];
    A(2, c + 1) = 0.5 * s.HS2[k];
    A(2, c + 2) = 0.5 * s.HV1[k];
    A(2, c + 3) = 0.5 * s.HS1[k];
    A(3, c + 0) = s.HVd[k];
    A(3, c + 1) = s.HSd[k];
    A(4, c + 2) = s.HVd[k];
    A(4, c + 3) = s.HSd[k];
  }
  return A;
}

// Cell-level operator blocks shared by every macro quadrature point when the
// stiffness does not depend on x.  Matrix dofs are folded onto canonical free
// vertices; interface columns stay separate for the substitution.
struct CellBlocks {
  Eigen::Matrix4d K_GG = Eigen::Matrix4d::Zero();
  Eigen::MatrixXd K_Gc;
  SpMat K_cc;
  SpMat Kff;
  Eigen::MatrixXd Kfi, Kii;
  Eigen::MatrixXd Kfp, Kip;
  Eigen::Matrix<double, 5, 5> Kpp = Eigen::Matrix<double, 5, 5>::Zero();
};

CellBlocks build_cell_blocks(const HomLimitSpace& sp, const SectionStiffness& lawF,
                             const SectionStiffness& lawM) {
  CellBlocks cb;
  const SectionBlocks sb = assemble_section_blocks(sp.cell, sp.fiber, lawF);
  cb.K_GG = sb.K_GG;
  cb.K_Gc = sb.K_Gc;
  cb.K_cc = sb.K_cc;

  const int nm3 = 3 * sp.nm, ni3 = 3 * sp.ni;
  cb.Kfi = Eigen::MatrixXd::Zero(nm3, ni3);
  cb.Kii = Eigen::MatrixXd::Zero(ni3, ni3);
  const SpMat Kzz = assemble_inplane_stiffness(sp.cell, Region::Matrix, lawM);
  std::vector<Eigen::Triplet<double>> ft;
  ft.reserve(Kzz.nonZeros());
  for (int k = 0; k < Kzz.outerSize(); ++k) {
    for (SpMat::InnerIterator it(Kzz, k); it; ++it) {
      const int vr = (int)it.row() / 3, cr = (int)it.row() % 3;
      const int vc = (int)it.col() / 3, cc = (int)it.col() % 3;
      const int rf = sp.ridx[vr], cf = sp.ridx[vc];
      const int ri = sp.ifc[vr], ci = sp.ifc[vc];
      if (rf >= 0 && cf >= 0)
        ft.emplace_back(3 * rf + cr, 3 * cf + cc, it.value());
      else if (rf >= 0 && ci >= 0)
        cb.Kfi(3 * rf + cr, 3 * ci + cc) += it.value();
      else if (ri >= 0 && ci >= 0)
        cb.Kii(3 * ri + cr, 3 * ci + cc) += it.value();
      // (interface, free) entries mirror (free, interface) by symmetry
    }
  }
  cb.Kff.resize(nm3, nm3);
  cb.Kff.setFromTriplets(ft.begin(), ft.end());

  cb.Kfp = Eigen::MatrixXd::Zero(nm3, 5);
  cb.Kip = Eigen::MatrixXd::Zero(ni3, 5);
  const Eigen::Matrix<double, 6, 5> P = macro_strain_injection();
  for (int t = 0; t < (int)sp.cell.tris.size(); ++t) {
    const Tri& tri = sp.cell.tris[t];
    if (tri.region != Region::Matrix) continue;
    const TriGeometry tg = tri_geometry(sp.cell, tri);
    const Eigen::Matrix<double, 6, 9> B = inplane_columns(tg);
    for (const TriPoint& qp : tri3) {
      const Eigen::Vector2d p =
          (1.0 - qp.a - qp.b) * sp.cell.vertices[tri.v[0]] +
          qp.a * sp.cell.vertices[tri.v[1]] + qp.b * sp.cell.vertices[tri.v[2]];
      const Mandel6 C = lawM(p);
      const double w = qp.w * tg.area;
      const Eigen::Matrix<double, 9, 5> E = w * (B.transpose() * (C * P));
      cb.Kpp += w * (P.transpose() * C * P);
      for (int i = 0; i < 3; ++i) {
        const int rf = sp.ridx[tri.v[i]], ri = sp.ifc[tri.v[i]];
        for (int c = 0; c < 3; ++c) {
          if (rf >= 0)
            cb.Kfp.row(3 * rf + c) += E.row(3 * i + c);
          else if (ri >= 0)
            cb.Kip.row(3 * ri + c) += E.row(3 * i + c);
        }
      }
    }
  }
  return cb;
}

// One-dimensional difference quotient along a grid direction.
struct StencilEntry {
  int index;
  double coef;
};

std::array<StencilEntry, 2> quotient_stencil(int i, int last, double h) {
  if (i == 0) return {{{0, -1.0 / h}, {1, 1.0 / h}}};
  if (i == last) return {{{last - 1, -1.0 / h}, {last, 1.0 / h}}};
  return {{{i - 1, -0.5 / h}, {i + 1, 0.5 / h}}};
}

// Substitution map of one node's interface values: rows are the three cell
// components per interface vertex, columns the coupled global macro dofs.
struct NodeIfc {
  std::vector<int> cols;
  Eigen::MatrixXd T;
};

NodeIfc build_node_ifc(const HomLimitSpace& sp, int ix, int iy, int iz) {
  const int n = sp.node(ix, iy, iz);
  NodeIfc out;
  out.cols = {sp.macro_dof(n, 1), sp.macro_dof(n, 3), sp.macro_dof(n, 5),
              sp.macro_dof(n, 4)};
  auto col_of = [&out](int dof) {
    for (int i = 0; i < (int)out.cols.size(); ++i)
      if (out.cols[i] == dof) return i;
    out.cols.push_back(dof);
    return (int)out.cols.size() - 1;
  };
  struct Term {
    int alpha, beta, ci;
    double coef;
  };
  std::vector<Term> terms;
  for (int alpha = 0; alpha < 2; ++alpha) {
    for (int beta = 0; beta < 2; ++beta) {
      const auto st = beta == 0 ? quotient_stencil(ix, sp.nxn - 1, sp.hx)
                                : quotient_stencil(iy, sp.nyn - 1, sp.hy);
      for (const StencilEntry& e : st) {
        const int ns = beta == 0 ? sp.node(e.index, iy, iz)
                                 : sp.node(ix, e.index, iz);
        terms.push_back({alpha, beta, col_of(sp.macro_dof(ns, 2 * alpha)), e.coef});
      }
    }
  }
  out.T = Eigen::MatrixXd::Zero(3 * sp.ni, (int)out.cols.size());
  for (int q = 0; q < sp.ni; ++q) {
    const Eigen::Vector2d y = sp.cell.vertices[sp.ifc_verts[q]];
    for (const Term& t : terms) out.T(3 * q + t.alpha, t.ci) -= y[t.beta] * t.coef;
    out.T(3 * q + 0, 3) -= y.y();
    out.T(3 * q + 1, 3) += y.x();
    out.T(3 * q + 2, 0) -= y.x();
    out.T(3 * q + 2, 1) -= y.y();
    out.T(3 * q + 2, 2) += 1.0;
  }
  return out;
}

// Load data aggregated per macro node.  Lmat and Lfib hold the nodal axial
// cell loads of the two regions, bmac the in-plane load on (u1, s1, u2, s2),
// bq the mass-weighted matrix mean of f3, and M the macro mass matrix.
struct AggregatedLoads {
  Eigen::MatrixXd Lmat, Lfib;
  Eigen::MatrixXd bmac;
  Eigen::VectorXd bq;
  SpMat M;
};

// Cached cell quadrature: one entry per (triangle, tri3 point).
struct TriQ {
  double wa;
  Eigen::Vector2d p;
  std::array<int, 3> v;
  std::array<double, 3> lam;
  Region region;
};

std::vector<TriQ> cell_quadrature(const SectionMesh& cell) {
  std::vector<TriQ> out;
  out.reserve(3 * cell.tris.size());
  for (int t = 0; t < (int)cell.tris.size(); ++t) {
    const Tri& tri = cell.tris[t];
    const TriGeometry tg = tri_geometry(cell, tri);
    for (const TriPoint& qp : tri3) {
      TriQ e;
      e.wa = qp.w * tg.area;
      e.p = (1.0 - qp.a - qp.b) * cell.vertices[tri.v[0]] +
            qp.a * cell.vertices[tri.v[1]] + qp.b * cell.vertices[tri.v[2]];
      e.v = tri.v;
      e.lam = {1.0 - qp.a - qp.b, qp.a, qp.b};
      e.region = tri.region;
      out.push_back(e);
    }
  }
  return out;
}

void element_nodes(const HomLimitSpace& sp, int ex, int ey, int ez,
                   int (&gn)[8]) {
  static constexpr int ox[4] = {0, 1, 1, 0};
  static constexpr int oy[4] = {0, 0, 1, 1};
  for (int k = 0; k < 8; ++k)
    gn[k] = sp.node(ex + ox[k & 3], ey + oy[k & 3], ez + (k >> 2));
}

AggregatedLoads aggregate_loads(
    const HomLimitSpace& sp,
    const std::function<Eigen::Vector3d(const Eigen::Vector3d&,
                                        const Eigen::Vector2d&)>& load,
    const std::vector<ShapeVals>& qps) {
  const int nodes = sp.num_nodes();
  const int nv = (int)sp.cell.vertices.size();
  AggregatedLoads agg;
  agg.Lmat = Eigen::MatrixXd::Zero(nodes, nv);
  agg.Lfib = Eigen::MatrixXd::Zero(nodes, nv);
  agg.bmac = Eigen::MatrixXd::Zero(nodes, 4);
  agg.bq = Eigen::VectorXd::Zero(nodes);
  const std::vector<TriQ> tq = cell_quadrature(sp.cell);
  const double mat_area = sp.cell.matrix_area();
  std::vector<Eigen::Triplet<double>> mt;
  mt.reserve((size_t)64 * 12 * sp.pb.nx * sp.pb.ny * sp.pb.n3);
  Eigen::VectorXd lm(nv), lf(nv);
  for (int ez = 0; ez < sp.pb.n3; ++ez) {
    for (int ey = 0; ey < sp.pb.ny; ++ey) {
      for (int ex = 0; ex < sp.pb.nx; ++ex) {
        int gn[8];
        element_nodes(sp, ex, ey, ez, gn);
        const Eigen::Vector3d x0 = sp.node_point(ex, ey, ez);
        for (const ShapeVals& s : qps) {
          const Eigen::Vector3d x(x0.x() + s.xi * sp.hx, x0.y() + s.eta * sp.hy,
                                  x0.z() + s.zeta * sp.hz);
          lm.setZero();
          lf.setZero();
          double F1 = 0, F2 = 0, qsum = 0;
          for (const TriQ& e : tq) {
            const Eigen::Vector3d f = load(x, e.p);
            F1 += e.wa * f.x();
            F2 += e.wa * f.y();
            const double gl = e.wa * f.z();
            if (e.region == Region::Matrix) {
              qsum += gl;
              for (int i = 0; i < 3; ++i) lm[e.v[i]] += gl * e.lam[i];
            } else {
              for (int i = 0; i < 3; ++i) lf[e.v[i]] += gl * e.lam[i];
            }
          }
          const double qbar = qsum / mat_area;
          for (int k = 0; k < 8; ++k) {
            const double wk = s.W * s.Nt[k];
            agg.Lmat.row(gn[k]) += wk * lm.transpose();
            agg.Lfib.row(gn[k]) += wk * lf.transpose();
            agg.bq(gn[k]) += wk * qbar;
            agg.bmac(gn[k], 0) += s.W * s.HV[k] * F1;
            agg.bmac(gn[k], 1) += s.W * s.HS[k] * F1;
            agg.bmac(gn[k], 2) += s.W * s.HV[k] * F2;
            agg.bmac(gn[k], 3) += s.W * s.HS[k] * F2;
            for (int l = 0; l < 8; ++l)
              mt.emplace_back(gn[k], gn[l], s.W * s.Nt[k] * s.Nt[l]);
          }
        }
      }
    }
  }
  agg.M.resize(nodes, nodes);
  agg.M.setFromTriplets(mt.begin(), mt.end());
  return agg;
}

Eigen::VectorXd scatter_loads(const HomLimitSpace& sp,
                              const AggregatedLoads& agg) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(sp.num_dofs());
  const int nv = (int)sp.cell.vertices.size();
  for (int n = 0; n < sp.num_nodes(); ++n) {
    b[sp.macro_dof(n, 0)] += agg.bmac(n, 0);
    b[sp.macro_dof(n, 1)] += agg.bmac(n, 1);
    b[sp.macro_dof(n, 2)] += agg.bmac(n, 2);
    b[sp.macro_dof(n, 3)] += agg.bmac(n, 3);
    for (int v = 0; v < nv; ++v) {
      const double Lm = agg.Lmat(n, v);
      if (sp.ridx[v] >= 0) {
        if (Lm != 0.0) b[sp.matrix_dof(n, sp.ridx[v], 2)] += Lm;
        continue;
      }
      if (!sp.in_fiber[v]) continue;
      const double L = Lm + agg.Lfib(n, v);
      if (L == 0.0) continue;
      const Eigen::Vector2d y = sp.cell.vertices[v];
      b[sp.macro_dof(n, 1)] -= y.x() * L;
      b[sp.macro_dof(n, 3)] -= y.y() * L;
      b[sp.macro_dof(n, 5)] += L;
    }
  }
  return b;
}

// Scalar couplings of one ordered macro node pair, integrated over the shared
// elements: mass, value-gradient and value-times-macro-shape products.
struct PairOps {
  double M = 0, D3 = 0;
  double PV1 = 0, PS1 = 0, PV2 = 0, PS2 = 0;
  double DV = 0, DS = 0;
  void accumulate(const ShapeVals& s, int k, int l) {
    const double w = s.W * s.Nt[k];
    M += w * s.Nt[l];
    D3 += w * s.dNt[l];
    PV1 += w * s.HV1[l];
    PS1 += w * s.HS1[l];
    PV2 += w * s.HV2[l];
    PS2 += w * s.HS2[l];
    DV += w * s.HVd[l];
    DS += w * s.HSd[l];
  }
  void add(const PairOps& o) {
    M += o.M;
    D3 += o.D3;
    PV1 += o.PV1;
    PS1 += o.PS1;
    PV2 += o.PV2;
    PS2 += o.PS2;
    DV += o.DV;
    DS += o.DS;
  }
};

// Macro-dof weights of the strain slots p for the n side of a pair.
Eigen::Matrix<double, 5, 6> strain_slot_weights(const PairOps& o) {
  Eigen::Matrix<double, 5, 6> Op = Eigen::Matrix<double, 5, 6>::Zero();
  Op(0, 0) = o.PV1;
  Op(0, 1) = o.PS1;
  Op(1, 2) = o.PV2;
  Op(1, 3) = o.PS2;
  Op(2, 0) = 0.5 * o.PV2;
  Op(2, 1) = 0.5 * o.PS2;
  Op(2, 2) = 0.5 * o.PV1;
  Op(2, 3) = 0.5 * o.PS1;
  Op(3, 0) = o.DV;
  Op(3, 1) = o.DS;
  Op(4, 2) = o.DV;
  Op(4, 3) = o.DS;
  return Op;
}

// Emits the cell-level couplings of one ordered node pair (m, n).  Square
// blocks appear once per ordered pair; cross blocks between different dof
// families are emitted together with their transpose.
template <typename Sink>
void emit_pair(const HomLimitSpace& sp, const CellBlocks& cb,
               const NodeIfc& Im, const NodeIfc& In,
               const Eigen::MatrixXd& FIm, const Eigen::MatrixXd& FIn,
               const Eigen::MatrixXd& KITn, int m, int n, const PairOps& o,
               Sink&& sink) {
  const int bm = m * sp.node_block + 6, bn = n * sp.node_block + 6;
  for (int k = 0; k < cb.K_cc.outerSize(); ++k)
    for (SpMat::InnerIterator it(cb.K_cc, k); it; ++it)
      sink(sp.fiber_dof(m, (int)it.row()), sp.fiber_dof(n, (int)it.col()),
           o.M * it.value());
  for (int k = 0; k < cb.Kff.outerSize(); ++k)
    for (SpMat::InnerIterator it(cb.Kff, k); it; ++it)
      sink(bm + (int)it.row(), bn + (int)it.col(), o.M * it.value());
  for (int c = 0; c < FIn.cols(); ++c)
    for (int r = 0; r < FIn.rows(); ++r) {
      const double v = FIn(r, c);
      if (v != 0.0) sink(bm + r, In.cols[c], o.M * v);
    }
  for (int c = 0; c < FIm.cols(); ++c)
    for (int r = 0; r < FIm.rows(); ++r) {
      const double v = FIm(r, c);
      if (v != 0.0) sink(Im.cols[c], bn + r, o.M * v);
    }
  const Eigen::MatrixXd W = Im.T.transpose() * KITn;
  for (int a = 0; a < W.rows(); ++a)
    for (int c = 0; c < W.cols(); ++c) sink(Im.cols[a], In.cols[c], o.M * W(a, c));
  for (int r = 0; r < 4; ++r) {
    const int col = sp.macro_dof(n, kGSlot[r]);
    for (int j = 0; j < cb.K_Gc.cols(); ++j) {
      const double v = o.D3 * cb.K_Gc(r, j);
      if (v == 0.0) continue;
      sink(sp.fiber_dof(m, j), col, v);
      sink(col, sp.fiber_dof(m, j), v);
    }
  }
  const Eigen::Matrix<double, 5, 6> Op = strain_slot_weights(o);
  const Eigen::MatrixXd Bf = cb.Kfp * Op;
  for (int r = 0; r < Bf.rows(); ++r)
    for (int c = 0; c < 6; ++c) {
      const double v = Bf(r, c);
      if (v == 0.0) continue;
      sink(bm + r, sp.macro_dof(n, c), v);
      sink(sp.macro_dof(n, c), bm + r, v);
    }
  const Eigen::MatrixXd Bi = Im.T.transpose() * (cb.Kip * Op);
  for (int a = 0; a < Bi.rows(); ++a)
    for (int c = 0; c < 6; ++c) {
      const double v = Bi(a, c);
      if (v == 0.0) continue;
      sink(Im.cols[a], sp.macro_dof(n, c), v);
      sink(sp.macro_dof(n, c), Im.cols[a], v);
    }
}

std::vector<int> essential_dofs(const HomLimitSpace& sp) {
  std::vector<int> zeros;
  for (int iy = 0; iy < sp.nyn; ++iy) {
    for (int ix = 0; ix < sp.nxn; ++ix) {
      const int n0 = sp.node(ix, iy, 0);
      const int n1 = sp.node(ix, iy, sp.nzn - 1);
      for (int s = 0; s < 6; ++s) {
        zeros.push_back(sp.macro_dof(n0, s));
        zeros.push_back(sp.macro_dof(n1, s));
      }
      for (int r = 0; r < sp.nm; ++r) {
        zeros.push_back(sp.matrix_dof(n0, r, 2));
        zeros.push_back(sp.matrix_dof(n1, r, 2));
        // gauge for the additive in-plane cell motion
        zeros.push_back(sp.matrix_dof(n0, r, 0));
        zeros.push_back(sp.matrix_dof(n0, r, 1));
      }
    }
  }
  return zeros;
}

std::vector<LinearConstraint> kernel_constraints(const HomLimitSpace& sp) {
  const std::vector<LinearConstraint> base =
      section_constraints(sp.cell, sp.fiber);
  std::vector<LinearConstraint> out;
  out.reserve((size_t)sp.num_nodes() * base.size());
  for (int n = 0; n < sp.num_nodes(); ++n) {
    for (const LinearConstraint& c : base) {
      LinearConstraint shifted;
      shifted.terms.reserve(c.terms.size());
      for (const auto& t : c.terms)
        shifted.terms.emplace_back(sp.fiber_dof(n, t.first), t.second);
      out.push_back(std::move(shifted));
    }
  }
  return out;
}

struct MacroLocate {
  int ex, ey, ez;
  double xi, eta, zeta;
};

MacroLocate locate_element(const HomLimitSpace& sp, const Eigen::Vector3d& x) {
  auto place = [](double s, int n) {
    int e = (int)std::floor(s);
    e = std::max(0, std::min(n - 1, e));
    return e;
  };
  const double sx = (x.x() + sp.pb.half_width) / sp.hx;
  const double sy = (x.y() + sp.pb.half_width) / sp.hy;
  const double sz = x.z() / sp.hz;
  MacroLocate loc;
  loc.ex = place(sx, sp.pb.nx);
  loc.ey = place(sy, sp.pb.ny);
  loc.ez = place(sz, sp.pb.n3);
  loc.xi = sx - loc.ex;
  loc.eta = sy - loc.ey;
  loc.zeta = sz - loc.ez;
  return loc;
}

}  // namespace

Eigen::Vector3d HomLimitSpace::node_point(int ix, int iy, int iz) const {
  return {-pb.half_width + ix * hx, -pb.half_width + iy * hy, iz * hz};
}

HomLimitSpace build_hom_limit_space(const HomLimitProblem& pb) {
  validate_problem(pb);
  HomLimitSpace sp;
  sp.pb = pb;
  sp.cell = build_cell_mesh(pb.fiber_radius, pb.n_per_cell);
  sp.fiber = build_fiber_dof_map(sp.cell);
  sp.nxn = pb.nx + 1;
  sp.nyn = pb.ny + 1;
  sp.nzn = pb.n3 + 1;
  sp.hx = 2.0 * pb.half_width / pb.nx;
  sp.hy = 2.0 * pb.half_width / pb.ny;
  sp.hz = pb.length / pb.n3;

  const int nv = (int)sp.cell.vertices.size();
  std::vector<char> fib(nv, 0), mat(nv, 0);
  for (const Tri& t : sp.cell.tris)
    for (int v : t.v) (t.region == Region::Fiber ? fib : mat)[v] = 1;
  sp.canon.resize(nv);
  for (int v = 0; v < nv; ++v) sp.canon[v] = v;
  for (const std::array<int, 2>& p : sp.cell.periodic) sp.canon[p[0]] = p[1];
  for (int v = 0; v < nv; ++v) {
    int w = sp.canon[v];
    while (sp.canon[w] != w) w = sp.canon[w];
    sp.canon[v] = w;
  }
  sp.in_fiber.assign(fib.begin(), fib.end());
  sp.ridx.assign(nv, -1);
  sp.ifc.assign(nv, -1);
  for (int v = 0; v < nv; ++v) {
    if (fib[v] && mat[v]) {
      sp.ifc[v] = (int)sp.ifc_verts.size();
      sp.ifc_verts.push_back(v);
    } else if (!fib[v] && mat[v] && sp.canon[v] == v) {
      sp.ridx[v] = (int)sp.free_verts.size();
      sp.free_verts.push_back(v);
    }
  }
  for (int v = 0; v < nv; ++v)
    if (sp.ridx[v] < 0 && !fib[v] && mat[v]) sp.ridx[v] = sp.ridx[sp.canon[v]];
  sp.nm = (int)sp.free_verts.size();
  sp.ni = (int)sp.ifc_verts.size();
  sp.node_block = 6 + 3 * sp.nm + sp.fiber.num_dofs();
  return sp;
}

HomLimitSystem assemble_hom_limit(const HomLimitProblem& pb) {
  HomLimitSystem sys;
  sys.space = build_hom_limit_space(pb);
  const HomLimitSpace& sp = sys.space;
  const std::vector<ShapeVals> qps = quad_shapes(sp);
  const int nodes = sp.num_nodes();

  std::vector<NodeIfc> ifcs(nodes);
  for (int iz = 0; iz < sp.nzn; ++iz)
    for (int iy = 0; iy < sp.nyn; ++iy)
      for (int ix = 0; ix < sp.nxn; ++ix)
        ifcs[sp.node(ix, iy, iz)] = build_node_ifc(sp, ix, iy, iz);

  const AggregatedLoads agg = aggregate_loads(sp, pb.load, qps);
  sys.b = scatter_loads(sp, agg);

  std::vector<Eigen::Triplet<double>> trips;
  auto law_at = [&pb](const Eigen::Vector3d& x, Region r) {
    return SectionStiffness(
        [&pb, x, r](const Eigen::Vector2d& y) { return pb.stiffness(x, y, r); });
  };

  if (!pb.stiffness_x_dependent) {
    const Eigen::Vector3d xref(0.0, 0.0, 0.5 * pb.length);
    const CellBlocks cb =
        build_cell_blocks(sp, law_at(xref, Region::Fiber), law_at(xref, Region::Matrix));
    std::vector<Eigen::MatrixXd> FI(nodes), KIT(nodes);
    for (int n = 0; n < nodes; ++n) {
      FI[n] = cb.Kfi * ifcs[n].T;
      KIT[n] = cb.Kii * ifcs[n].T;
    }
    std::array<std::array<PairOps, 8>, 8> ops{};
    Eigen::Matrix<double, 48, 48> Kmac = Eigen::Matrix<double, 48, 48>::Zero();
    for (const ShapeVals& s : qps) {
      for (int k = 0; k < 8; ++k)
        for (int l = 0; l < 8; ++l) ops[k][l].accumulate(s, k, l);
      const Eigen::Matrix<double, 4, 48> AG = axial_driver_rows(s);
      const Eigen::Matrix<double, 5, 48> AP = macro_strain_rows(s);
      Kmac += s.W * (AG.transpose() * cb.K_GG * AG +
                     AP.transpose() * cb.Kpp * AP);
    }
    std::vector<std::map<int, PairOps>> gops(nodes);
    for (int ez = 0; ez < pb.n3; ++ez)
      for (int ey = 0; ey < pb.ny; ++ey)
        for (int ex = 0; ex < pb.nx; ++ex) {
          int gn[8];
          element_nodes(sp, ex, ey, ez, gn);
          for (int k = 0; k < 8; ++k)
            for (int l = 0; l < 8; ++l) gops[gn[k]][gn[l]].add(ops[k][l]);
        }
    size_t count = (size_t)pb.nx * pb.ny * pb.n3 * 48 * 48;
    for (int m = 0; m < nodes; ++m)
      for (const auto& [n, o] : gops[m])
        emit_pair(sp, cb, ifcs[m], ifcs[n], FI[m], FI[n], KIT[n], m, n, o,
                  [&count](int, int, double) { ++count; });
    trips.reserve(count);
    for (int m = 0; m < nodes; ++m)
      for (const auto& [n, o] : gops[m])
        emit_pair(sp, cb, ifcs[m], ifcs[n], FI[m], FI[n], KIT[n], m, n, o,
                  [&trips](int r, int c, double v) { trips.emplace_back(r, c, v); });
    for (int ez = 0; ez < pb.n3; ++ez)
      for (int ey = 0; ey < pb.ny; ++ey)
        for (int ex = 0; ex < pb.nx; ++ex) {
          int gn[8];
          element_nodes(sp, ex, ey, ez, gn);
          for (int k = 0; k < 8; ++k)
            for (int l = 0; l < 8; ++l)
              for (int a = 0; a < 6; ++a)
                for (int c = 0; c < 6; ++c) {
                  const double v = Kmac(6 * k + a, 6 * l + c);
                  if (v != 0.0)
                    trips.emplace_back(sp.macro_dof(gn[k], a),
                                       sp.macro_dof(gn[l], c), v);
                }
        }
  } else {
    // Per-quadrature-point cell blocks; meant for small grids.
    auto sink = [&trips](int r, int c, double v) { trips.emplace_back(r, c, v); };
    for (int ez = 0; ez < pb.n3; ++ez)
      for (int ey = 0; ey < pb.ny; ++ey)
        for (int ex = 0; ex < pb.nx; ++ex) {
          int gn[8];
          element_nodes(sp, ex, ey, ez, gn);
          const Eigen::Vector3d x0 = sp.node_point(ex, ey, ez);
          for (const ShapeVals& s : qps) {
            const Eigen::Vector3d x(x0.x() + s.xi * sp.hx,
                                    x0.y() + s.eta * sp.hy,
                                    x0.z() + s.zeta * sp.hz);
            const CellBlocks cb = build_cell_blocks(
                sp, law_at(x, Region::Fiber), law_at(x, Region::Matrix));
            std::array<Eigen::MatrixXd, 8> FIk, KITk;
            for (int k = 0; k < 8; ++k) {
              FIk[k] = cb.Kfi * ifcs[gn[k]].T;
              KITk[k] = cb.Kii * ifcs[gn[k]].T;
            }
            const Eigen::Matrix<double, 4, 48> AG = axial_driver_rows(s);
            const Eigen::Matrix<double, 5, 48> AP = macro_strain_rows(s);
            const Eigen::Matrix<double, 48, 48> Kmac =
                s.W * (AG.transpose() * cb.K_GG * AG +
                       AP.transpose() * cb.Kpp * AP);
            for (int k = 0; k < 8; ++k)
              for (int l = 0; l < 8; ++l) {
                PairOps o;
                o.accumulate(s, k, l);
                emit_pair(sp, cb, ifcs[gn[k]], ifcs[gn[l]], FIk[k], FIk[l],
                          KITk[l], gn[k], gn[l], o, sink);
                for (int a = 0; a < 6; ++a)
                  for (int c = 0; c < 6; ++c) {
                    const double v = Kmac(6 * k + a, 6 * l + c);
                    if (v != 0.0)
                      trips.emplace_back(sp.macro_dof(gn[k], a),
                                         sp.macro_dof(gn[l], c), v);
                  }
              }
          }
        }
  }

  sys.K.resize(sp.num_dofs(), sp.num_dofs());
  sys.K.setFromTriplets(trips.begin(), trips.end());
  trips.clear();
  trips.shrink_to_fit();
  sys.elim = DofElimination::build(sp.num_dofs(), essential_dofs(sp), {},
                                   kernel_constraints(sp));
  return sys;
}

HomLimitSolution solve_hom_limit(const HomLimitProblem& pb,
                                 const SolveOptions& opt) {
  HomLimitSystem sys = assemble_hom_limit(pb);
  SpMat Kred = sys.elim.reduce(sys.K);
  const Eigen::VectorXd bred = sys.elim.reduce(sys.b);
  sys.K.resize(0, 0);
  sys.K.data().squeeze();
  SolveOptions o2 = opt;
  if (o2.method == SolveOptions::Method::Auto && Kred.rows() > kDenseDirectCap)
    o2.method = SolveOptions::Method::Cg;
  const SolveResult res = solve_spd(Kred, bred, o2);

  HomLimitSolution sol;
  sol.space = std::move(sys.space);
  sol.energy = res.x.dot(Kred * res.x);
  sol.work = bred.dot(res.x);
  sol.solver_path = res.path;
  sol.iterations = res.iterations;
  const Eigen::VectorXd x = sys.elim.expand(res.x);

  const HomLimitSpace& sp = sol.space;
  const int nodes = sp.num_nodes();
  const int nv = (int)sp.cell.vertices.size();
  sol.macro.resize(nodes, 6);
  sol.u3_cell.setZero(nodes, nv);
  sol.u1_cell[0].setZero(nodes, nv);
  sol.u1_cell[1].setZero(nodes, nv);
  sol.fiber_cell.resize(nodes, sp.fiber.num_dofs());
  for (int n = 0; n < nodes; ++n) {
    for (int s = 0; s < 6; ++s) sol.macro(n, s) = x[sp.macro_dof(n, s)];
    for (int j = 0; j < sp.fiber.num_dofs(); ++j)
      sol.fiber_cell(n, j) = x[sp.fiber_dof(n, j)];
  }
  for (int iz = 0; iz < sp.nzn; ++iz)
    for (int iy = 0; iy < sp.nyn; ++iy)
      for (int ix = 0; ix < sp.nxn; ++ix) {
        const int n = sp.node(ix, iy, iz);
        const Eigen::Matrix2d G = macro_quotients(sp, sol.macro, ix, iy, iz);
        const double theta = sol.macro(n, 4);
        for (int v = 0; v < nv; ++v) {
          if (sp.ridx[v] >= 0) {
            sol.u3_cell(n, v) = x[sp.matrix_dof(n, sp.ridx[v], 2)];
            sol.u1_cell[0](n, v) = x[sp.matrix_dof(n, sp.ridx[v], 0)];
            sol.u1_cell[1](n, v) = x[sp.matrix_dof(n, sp.ridx[v], 1)];
          } else if (sp.in_fiber[v]) {
            const Eigen::Vector2d y = sp.cell.vertices[v];
            sol.u3_cell(n, v) =
                -y.x() * sol.macro(n, 1) - y.y() * sol.macro(n, 3) + sol.macro(n, 5);
            sol.u1_cell[0](n, v) =
                -y.x() * G(0, 0) - y.y() * G(0, 1) - theta * y.y();
            sol.u1_cell[1](n, v) =
                -y.x() * G(1, 0) - y.y() * G(1, 1) + theta * y.x();
          }
        }
      }
  return sol;
}

Eigen::Matrix2d macro_quotients(const HomLimitSpace& space,
                                const Eigen::MatrixXd& macro, int ix, int iy,
                                int iz) {
  Eigen::Matrix2d G = Eigen::Matrix2d::Zero();
  for (int alpha = 0; alpha < 2; ++alpha)
    for (int beta = 0; beta < 2; ++beta) {
      const auto st = beta == 0
                          ? quotient_stencil(ix, space.nxn - 1, space.hx)
                          : quotient_stencil(iy, space.nyn - 1, space.hy);
      for (const StencilEntry& e : st) {
        const int ns = beta == 0 ? space.node(e.index, iy, iz)
                                 : space.node(ix, e.index, iz);
        G(alpha, beta) += e.coef * macro(ns, 2 * alpha);
      }
    }
  return G;
}

Eigen::VectorXd macro_mean_u3(const HomLimitSolution& sol) {
  const HomLimitSpace& sp = sol.space;
  Eigen::VectorXd U = Eigen::VectorXd::Zero(sp.num_nodes());
  for (int t = 0; t < (int)sp.cell.tris.size(); ++t) {
    const Tri& tri = sp.cell.tris[t];
    const double w = tri_geometry(sp.cell, tri).area / 3.0;
    for (int n = 0; n < sp.num_nodes(); ++n)
      U[n] += w * (sol.u3_cell(n, tri.v[0]) + sol.u3_cell(n, tri.v[1]) +
                   sol.u3_cell(n, tri.v[2]));
  }
  return U;
}

double pairing_u3(
    const HomLimitSolution& sol,
    const std::function<double(const Eigen::Vector3d&, const Eigen::Vector2d&)>&
        phi) {
  if (!phi) throw std::invalid_argument("pairing test function is empty");
  const HomLimitSpace& sp = sol.space;
  const std::vector<ShapeVals> qps = quad_shapes(sp);
  const std::vector<TriQ> tq = cell_quadrature(sp.cell);
  const int nv = (int)sp.cell.vertices.size();
  Eigen::VectorXd us(nv);
  double acc = 0;
  for (int ez = 0; ez < sp.pb.n3; ++ez)
    for (int ey = 0; ey < sp.pb.ny; ++ey)
      for (int ex = 0; ex < sp.pb.nx; ++ex) {
        int gn[8];
        element_nodes(sp, ex, ey, ez, gn);
        const Eigen::Vector3d x0 = sp.node_point(ex, ey, ez);
        for (const ShapeVals& s : qps) {
          const Eigen::Vector3d x(x0.x() + s.xi * sp.hx, x0.y() + s.eta * sp.hy,
                                  x0.z() + s.zeta * sp.hz);
          us.setZero();
          for (int k = 0; k < 8; ++k) us += s.Nt[k] * sol.u3_cell.row(gn[k]).transpose();
          double cell = 0;
          for (const TriQ& e : tq)
            cell += e.wa *
                    (e.lam[0] * us[e.v[0]] + e.lam[1] * us[e.v[1]] +
                     e.lam[2] * us[e.v[2]]) *
                    phi(x, e.p);
          acc += s.W * cell;
        }
      }
  return acc;
}

Vec6 fiber_block_strain(const HomLimitSolution& sol, const Eigen::Vector3d& x,
                        int tri, const Eigen::Vector2d& y) {
  const HomLimitSpace& sp = sol.space;
  if (tri < 0 || tri >= (int)sp.cell.tris.size() ||
      sp.cell.tris[tri].region != Region::Fiber)
    throw std::invalid_argument("strain point is not in a fiber triangle");
  const MacroLocate loc = locate_element(sp, x);
  const ShapeVals s = eval_shapes(sp, loc.xi, loc.eta, loc.zeta);
  int gn[8];
  element_nodes(sp, loc.ex, loc.ey, loc.ez, gn);
  Eigen::Vector4d G = Eigen::Vector4d::Zero();
  Eigen::VectorXd cf = Eigen::VectorXd::Zero(sp.fiber.num_dofs());
  for (int k = 0; k < 8; ++k) {
    for (int r = 0; r < 4; ++r) G[r] += s.dNt[k] * sol.macro(gn[k], kGSlot[r]);
    cf += s.Nt[k] * sol.fiber_cell.row(gn[k]).transpose();
  }
  return fiber_strain(sp.cell, sp.fiber, tri, G, cf, y);
}

Vec6 matrix_block_strain(const HomLimitSolution& sol, const Eigen::Vector3d& x,
                         int tri, const Eigen::Vector2d&) {
  const HomLimitSpace& sp = sol.space;
  if (tri < 0 || tri >= (int)sp.cell.tris.size() ||
      sp.cell.tris[tri].region != Region::Matrix)
    throw std::invalid_argument("strain point is not in a matrix triangle");
  const MacroLocate loc = locate_element(sp, x);
  const ShapeVals s = eval_shapes(sp, loc.xi, loc.eta, loc.zeta);
  int gn[8];
  element_nodes(sp, loc.ex, loc.ey, loc.ez, gn);
  const Tri& t = sp.cell.tris[tri];
  Eigen::VectorXd z = Eigen::VectorXd::Zero(3 * sp.cell.vertices.size());
  for (int i = 0; i < 3; ++i) {
    const int v = t.v[i];
    for (int k = 0; k < 8; ++k) {
      z[3 * v + 0] += s.Nt[k] * sol.u1_cell[0](gn[k], v);
      z[3 * v + 1] += s.Nt[k] * sol.u1_cell[1](gn[k], v);
      z[3 * v + 2] += s.Nt[k] * sol.u3_cell(gn[k], v);
    }
  }
  Eigen::Matrix<double, 5, 1> p = Eigen::Matrix<double, 5, 1>::Zero();
  for (int k = 0; k < 8; ++k) {
    const double u1 = sol.macro(gn[k], 0), s1 = sol.macro(gn[k], 1);
    const double u2 = sol.macro(gn[k], 2), s2 = sol.macro(gn[k], 3);
    p[0] += s.HV1[k] * u1 + s.HS1[k] * s1;
    p[1] += s.HV2[k] * u2 + s.HS2[k] * s2;
    p[2] += 0.5 * (s.HV2[k] * u1 + s.HS2[k] * s1 + s.HV1[k] * u2 + s.HS1[k] * s2);
    p[3] += s.HVd[k] * u1 + s.HSd[k] * s1;
    p[4] += s.HVd[k] * u2 + s.HSd[k] * s2;
  }
  return inplane_strain(sp.cell, tri, z) + macro_strain_injection() * p;
}

HomNonlocalDecomposition decompose_U_hom(const HomLimitSolution& sol,
                                         const SolveOptions& opt) {
  const HomLimitSpace& sp = sol.space;
  const int nodes = sp.num_nodes();
  const int nv = (int)sp.cell.vertices.size();
  if (sol.macro.rows() != nodes || sol.u3_cell.rows() != nodes ||
      sol.u3_cell.cols() != nv)
    throw std::invalid_argument("solution fields do not match their space");

  const std::vector<ShapeVals> qps = quad_shapes(sp);
  const AggregatedLoads agg = aggregate_loads(sp, sp.pb.load, qps);

  std::vector<int> interior;
  std::vector<int> intid(nodes, -1);
  for (int iz = 1; iz + 1 < sp.nzn; ++iz)
    for (int iy = 0; iy < sp.nyn; ++iy)
      for (int ix = 0; ix < sp.nxn; ++ix) {
        intid[sp.node(ix, iy, iz)] = (int)interior.size();
        interior.push_back(sp.node(ix, iy, iz));
      }
  const int nint = (int)interior.size();

  std::vector<Eigen::Triplet<double>> mt;
  for (int k = 0; k < agg.M.outerSize(); ++k)
    for (SpMat::InnerIterator it(agg.M, k); it; ++it)
      if (intid[it.row()] >= 0 && intid[it.col()] >= 0)
        mt.emplace_back(intid[it.row()], intid[it.col()], it.value());
  SpMat Mint(nint, nint);
  Mint.setFromTriplets(mt.begin(), mt.end());
  Eigen::SimplicialLDLT<SpMat> mass;
  mass.compute(Mint);
  if (mass.info() != Eigen::Success)
    throw std::runtime_error("interior mass projection failed");

  Eigen::VectorXd bq_int(nint);
  for (int i = 0; i < nint; ++i) bq_int[i] = agg.bq[interior[i]];
  const Eigen::VectorXd Qh = mass.solve(bq_int);

  const Eigen::VectorXd l1 = assemble_inplane_axial_load(
      sp.cell, Region::Matrix, [](const Eigen::Vector2d&) { return 1.0; });
  Eigen::VectorXd l1f = Eigen::VectorXd::Zero(sp.nm);
  for (int v = 0; v < nv; ++v)
    if (sp.ridx[v] >= 0) l1f[sp.ridx[v]] += l1[3 * v + 2];

  Eigen::MatrixXd B(nint, sp.nm);
  for (int i = 0; i < nint; ++i) {
    const int n = interior[i];
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(sp.nm);
    for (int v = 0; v < nv; ++v)
      if (sp.ridx[v] >= 0) row[sp.ridx[v]] += agg.Lmat(n, v);
    B.row(i) = row - agg.bq[n] * l1f.transpose();
  }
  const Eigen::MatrixXd Btilde = mass.solve(B);

  HomNonlocalDecomposition out;
  out.z0_cell.setZero(nodes, 3 * nv);
  out.z00_cell.setZero(nodes, 3 * nv);
  out.m0.setZero(nodes);
  out.m00.setZero(nodes);
  out.mean_f3.setZero(nodes);
  out.mean_u3_D = sol.macro.col(5);
  out.U = macro_mean_u3(sol);

  auto matrix_law = [&sp](const Eigen::Vector3d& x) {
    return SectionStiffness([&sp, x](const Eigen::Vector2d& y) {
      return sp.pb.stiffness(x, y, Region::Matrix);
    });
  };
  const bool xdep = sp.pb.stiffness_x_dependent;
  SectionStiffness law0;
  Eigen::VectorXd z0_shared;
  double m0_shared = 0;
  if (!xdep) {
    law0 = matrix_law(Eigen::Vector3d(0.0, 0.0, 0.5 * sp.pb.length));
    z0_shared = solve_cell_corrector(sp.cell, law0,
                                     [](const Eigen::Vector2d&) { return 1.0; }, opt);
    m0_shared = matrix_axial_integral(sp.cell, z0_shared);
  }

  for (int iz = 0; iz < sp.nzn; ++iz)
    for (int iy = 0; iy < sp.nyn; ++iy)
      for (int ix = 0; ix < sp.nxn; ++ix) {
        const int n = sp.node(ix, iy, iz);
        SectionStiffness law = xdep ? matrix_law(sp.node_point(ix, iy, iz)) : law0;
        if (xdep) {
          const Eigen::VectorXd z0 = solve_cell_corrector(
              sp.cell, law, [](const Eigen::Vector2d&) { return 1.0; }, opt);
          out.z0_cell.row(n) = z0.transpose();
          out.m0[n] = matrix_axial_integral(sp.cell, z0);
        } else {
          out.z0_cell.row(n) = z0_shared.transpose();
          out.m0[n] = m0_shared;
        }
        if (intid[n] < 0) continue;
        out.mean_f3[n] = Qh[intid[n]];
        Eigen::VectorXd lf = Eigen::VectorXd::Zero(3 * nv);
        for (int r = 0; r < sp.nm; ++r)
          lf[3 * sp.free_verts[r] + 2] = Btilde(intid[n], r);
        const Eigen::VectorXd z00 = solve_cell_axial(sp.cell, law, lf, opt);
        out.z00_cell.row(n) = z00.transpose();
        out.m00[n] = matrix_axial_integral(sp.cell, z00);
      }

  double num = 0, den = 1;
  for (int n = 0; n < nodes; ++n) {
    num = std::max(num, std::abs(out.U[n] - (out.mean_u3_D[n] +
                                             out.m0[n] * out.mean_f3[n] +
                                             out.m00[n])));
    den = std::max(den, std::abs(out.U[n]));
  }
  out.residual = num / den;
  return out;
}

}  // namespace fibrod
