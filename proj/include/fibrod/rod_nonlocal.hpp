#pragma once

#include <cmath>
#include <vector>

#include "fibrod/rod_limit.hpp"

// Nonlocal representation of the limit axial displacement.
//
// The section average of the limit axial displacement splits into three
// parts,
//
//   U(x3) = mean_omega(u3) + m0(x3) mean_matrix(f3) + m00(x3),
//
// where u3 is the Bernoulli-Navier component, m0 is built from the matrix
// corrector z0 with unit axial load, and m00 from the corrector z00 loaded
// by the fluctuation of f3 about its matrix average.  The m0 term is the
// nonlocal one: loads applied on the matrix move the average displacement
// even where the fiber itself carries no load.  Each slice also solves the
// corrector with the full load independently, so the reported residual
// |U - U_direct| checks the decomposition rather than restating it.

namespace fibrod {

struct NonlocalSlice {
  double x3 = 0;
  double m0 = 0;               // (1 / |omega|) int_matrix z0_3
  double m00 = 0;              // (1 / |omega|) int_matrix z00_3
  double mean_u3 = 0;          // section average of the Bernoulli-Navier part
  double mean_f3_matrix = 0;   // matrix average of the axial load
  double U = 0;                // decomposed: mean_u3 + m0 mean_f3 + m00
  double U_direct = 0;         // from the corrector solved with the full load
  double residual() const { return std::abs(U - U_direct); }
};

struct RodNonlocalResult {
  RodLimitSolution limit;  // beam solve behind mean_u3
  std::vector<NonlocalSlice> slices;
};

// Solves the limit problem and evaluates the decomposition at the given
// axial positions (the beam grid nodes when empty).  The unit corrector is
// solved once unless the stiffness law depends on x3.
RodNonlocalResult solve_rod_nonlocal(const RodLimitProblem& pb,
                                     std::vector<double> x3_samples = {},
                                     const SolveOptions& opt = {});

}  // namespace fibrod
