#pragma once

#include <array>

// Quadrature tables.  Triangle rules are given in barycentric coordinates
// (a, b) with weights summing to 1 (multiply by the physical area), segment
// rules on [0, 1] with weights summing to 1 (multiply by the length).
//
// tri3 integrates degree 2 exactly, which makes every P1 stiffness integrand
// with constant coefficients exact.  tri6 (degree 4) and gauss3 (degree 5)
// cover the mixed Hermite/P1 forms of the one dimensional limit problems.

namespace fibrod {

struct TriPoint {
  double a, b, w;
};

struct SegPoint {
  double t, w;
};

inline constexpr std::array<TriPoint, 3> tri3{{
    {1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0},
    {2.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0},
    {1.0 / 6.0, 2.0 / 3.0, 1.0 / 3.0},
}};

inline constexpr std::array<TriPoint, 6> tri6{{
    {0.445948490915965, 0.445948490915965, 0.223381589678011},
    {0.108103018168070, 0.445948490915965, 0.223381589678011},
    {0.445948490915965, 0.108103018168070, 0.223381589678011},
    {0.091576213509771, 0.091576213509771, 0.109951743655322},
    {0.816847572980459, 0.091576213509771, 0.109951743655322},
    {0.091576213509771, 0.816847572980459, 0.109951743655322},
}};

inline constexpr std::array<SegPoint, 2> gauss2{{
    {0.21132486540518713, 0.5},
    {0.78867513459481287, 0.5},
}};

inline constexpr std::array<SegPoint, 3> gauss3{{
    {0.11270166537925831, 5.0 / 18.0},
    {0.5, 4.0 / 9.0},
    {0.88729833462074169, 5.0 / 18.0},
}};

}  // namespace fibrod
