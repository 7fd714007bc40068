#include "fibrod/tensors.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace fibrod {

namespace {

const double kSqrt2 = std::sqrt(2.0);

}  // namespace

Vec6 to_mandel(const Eigen::Matrix3d& T) {
  Vec6 v;
  v << T(0, 0), T(1, 1), T(2, 2), kSqrt2 * T(1, 2), kSqrt2 * T(0, 2),
      kSqrt2 * T(0, 1);
  return v;
}

Eigen::Matrix3d from_mandel(const Vec6& v) {
  Eigen::Matrix3d T;
  const double s = 1.0 / kSqrt2;
  T << v(0), s * v(5), s * v(4),
      s * v(5), v(1), s * v(3),
      s * v(4), s * v(3), v(2);
  return T;
}

double contract(const Mandel6& C, const Eigen::Matrix3d& E,
                const Eigen::Matrix3d& K) {
  return to_mandel(E).dot(C * to_mandel(K));
}

Mandel6 make_isotropic(double lambda, double mu) {
  if (!(mu > 0.0) || !(3.0 * lambda + 2.0 * mu > 0.0)) {
    std::ostringstream os;
    os << "isotropic law requires mu > 0 and 3*lambda + 2*mu > 0, got lambda="
       << lambda << " mu=" << mu;
    throw std::invalid_argument(os.str());
  }
  Vec6 e = to_mandel(Eigen::Matrix3d::Identity());
  return 2.0 * mu * Mandel6::Identity() + lambda * (e * e.transpose());
}

Mandel6 make_orthotropic(const OrthotropicConstants& c) {
  for (double m : {c.E1, c.E2, c.E3, c.G23, c.G13, c.G12}) {
    if (!(m > 0.0)) {
      throw std::invalid_argument(
          "orthotropic law requires positive moduli E1..E3, G23, G13, G12");
    }
  }
  // Engineering compliance: eps = S sigma with shear rows carrying 1/G on
  // engineering shear strains gamma = 2 eps.
  Mandel6 S = Mandel6::Zero();
  S(0, 0) = 1.0 / c.E1;
  S(1, 1) = 1.0 / c.E2;
  S(2, 2) = 1.0 / c.E3;
  S(0, 1) = S(1, 0) = -c.nu12 / c.E1;
  S(0, 2) = S(2, 0) = -c.nu13 / c.E1;
  S(1, 2) = S(2, 1) = -c.nu23 / c.E2;
  S(3, 3) = 1.0 / c.G23;
  S(4, 4) = 1.0 / c.G13;
  S(5, 5) = 1.0 / c.G12;
  // Mandel compliance has the same 3x3 normal block and half the engineering
  // shear compliance: mandel strain sqrt(2) eps = (1/(2G)) sqrt(2) sigma.
  Mandel6 Sm = S;
  Sm.block<3, 3>(3, 3) *= 0.5;
  Eigen::LLT<Mandel6> llt(Sm);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument(
        "orthotropic constants give a non positive definite compliance");
  }
  return llt.solve(Mandel6::Identity());
}

ElasticityTensorField ElasticityTensorField::constant(const Mandel6& C) {
  ElasticityTensorField f;
  f.fiber_ = C;
  f.matrix_ = C;
  return f;
}

ElasticityTensorField ElasticityTensorField::piecewise(const Mandel6& fiber,
                                                       const Mandel6& matrix) {
  ElasticityTensorField f;
  f.fiber_ = fiber;
  f.matrix_ = matrix;
  return f;
}

ElasticityTensorField ElasticityTensorField::from_function(Evaluator f,
                                                           bool x3_dependent,
                                                           bool x_dependent,
                                                           bool y_dependent) {
  ElasticityTensorField field;
  field.f_ = std::move(f);
  field.has_function_ = true;
  field.x3_dep_ = x3_dependent;
  field.x_dep_ = x_dependent || x3_dependent;
  field.y_dep_ = y_dependent;
  return field;
}

Mandel6 ElasticityTensorField::eval(const Eigen::Vector3d& x,
                                    const Eigen::Vector2d& y, Region r) const {
  if (has_function_) return f_(x, y, r);
  return r == Region::Fiber ? fiber_ : matrix_;
}

Mandel6 ElasticityTensorField::eval_section(const Eigen::Vector2d& xprime,
                                            double x3, Region r) const {
  return eval(Eigen::Vector3d(xprime.x(), xprime.y(), x3),
              Eigen::Vector2d::Zero(), r);
}

TensorReport check_admissible(const ElasticityTensorField& C,
                              const Eigen::Vector3d& x_lo,
                              const Eigen::Vector3d& x_hi) {
  TensorReport rep;
  rep.m_est = std::numeric_limits<double>::infinity();
  rep.sup_est = -std::numeric_limits<double>::infinity();

  std::vector<Eigen::Vector3d> xs;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) {
        Eigen::Vector3d t(i / 2.0, j / 2.0, k / 2.0);
        xs.emplace_back(x_lo + t.cwiseProduct(x_hi - x_lo));
      }
  std::mt19937 rng(991604);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (int s = 0; s < 40; ++s) {
    Eigen::Vector3d t(uni(rng), uni(rng), uni(rng));
    xs.emplace_back(x_lo + t.cwiseProduct(x_hi - x_lo));
  }

  std::vector<Eigen::Vector2d> ys;
  ys.emplace_back(0.0, 0.0);
  if (C.y_dependent()) {
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        ys.emplace_back(-0.5 + i / 3.0, -0.5 + j / 3.0);
    for (int s = 0; s < 20; ++s) ys.emplace_back(uni(rng) - 0.5, uni(rng) - 0.5);
  }

  int sample = 0;
  for (const auto& x : xs) {
    for (const auto& y : ys) {
      for (Region r : {Region::Fiber, Region::Matrix}) {
        Mandel6 M = C.eval(x, y, r);
        double defect = (M - M.transpose()).cwiseAbs().maxCoeff();
        rep.symmetry_defect = std::max(rep.symmetry_defect, defect);
        if (defect > 1e-10 * std::max(1.0, M.cwiseAbs().maxCoeff())) {
          std::ostringstream os;
          os << "not symmetric at sample " << sample << " (defect " << defect
             << ")";
          rep.violations.push_back(os.str());
        }
        Eigen::SelfAdjointEigenSolver<Mandel6> es(
            0.5 * (M + M.transpose()).eval(), Eigen::EigenvaluesOnly);
        double lo = es.eigenvalues().minCoeff();
        double hi = es.eigenvalues().maxCoeff();
        rep.m_est = std::min(rep.m_est, lo);
        rep.sup_est = std::max(rep.sup_est, hi);
        if (!(lo > 0.0)) {
          std::ostringstream os;
          os << "not coercive at sample " << sample << " (min eigenvalue "
             << lo << ")";
          rep.violations.push_back(os.str());
        }
        if (C.y_dependent()) {
          for (int axis = 0; axis < 2; ++axis) {
            Eigen::Vector2d shift = y;
            shift[axis] += 1.0;
            double pd =
                (M - C.eval(x, shift, r)).cwiseAbs().maxCoeff();
            rep.periodicity_defect = std::max(rep.periodicity_defect, pd);
            if (pd > 1e-10 * std::max(1.0, M.cwiseAbs().maxCoeff())) {
              std::ostringstream os;
              os << "not y-periodic at sample " << sample << " (defect " << pd
                 << ")";
              rep.violations.push_back(os.str());
            }
          }
        }
        ++sample;
      }
    }
  }
  return rep;
}

}  // namespace fibrod
