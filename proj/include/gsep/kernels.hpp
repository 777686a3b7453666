#pragma once

// Scalar boundary kernels of the rate functional. `rho` is a reservoir
// density, `u` the boundary density, `m` the boundary value of the tilt.

#include <cmath>

namespace gsep::kernels {

// Boundary flux: p_rho(u, m) = (1-u) rho e^m - u (1-rho) e^-m.
inline double boundary_flux(double rho, double u, double m) {
  return (1.0 - u) * rho * std::exp(m) - u * (1.0 - rho) * std::exp(-m);
}

// d/dm of boundary_flux; strictly positive for u, rho in (0,1).
inline double boundary_flux_slope(double rho, double u, double m) {
  return (1.0 - u) * rho * std::exp(m) + u * (1.0 - rho) * std::exp(-m);
}

// Boundary cost: c_rho(u, m) = (1-u) rho [1 - e^m + m e^m] + u (1-rho) [1 - e^-m - m e^-m].
inline double boundary_cost(double rho, double u, double m) {
  const double ep = std::exp(m);
  const double em = std::exp(-m);
  // 1 - e^m + m e^m = 1 + e^m (m - 1); expm1 keeps small |m| accurate.
  const double plus = m * ep - std::expm1(m);
  const double minus = -std::expm1(-m) - m * em;
  return (1.0 - u) * rho * plus + u * (1.0 - rho) * minus;
}

// One reservoir's share of B(u, H): u (1-rho)(e^-m - 1) + rho (1-u)(e^m - 1).
inline double boundary_term(double rho, double u, double m) {
  return u * (1.0 - rho) * std::expm1(-m) + rho * (1.0 - u) * std::expm1(m);
}

inline double boundary_term_slope(double rho, double u, double m) { return boundary_flux(rho, u, m); }
inline double boundary_term_curvature(double rho, double u, double m) {
  return boundary_flux_slope(rho, u, m);
}

// One reservoir's share of Psi:
//   4 rho (1-r)(e^x - x - 1) + 4 r (1-rho)(e^-x + x - 1).
inline double psi(double rho, double r, double x) {
  const double ep = std::expm1(x) - x;
  const double em = std::expm1(-x) + x;
  return 4.0 * rho * (1.0 - r) * ep + 4.0 * r * (1.0 - rho) * em;
}
inline double psi_slope(double rho, double r, double x) {
  return 4.0 * rho * (1.0 - r) * std::expm1(x) - 4.0 * r * (1.0 - rho) * std::expm1(-x);
}
inline double psi_curvature(double rho, double r, double x) {
  return 4.0 * rho * (1.0 - r) * std::exp(x) + 4.0 * r * (1.0 - rho) * std::exp(-x);
}

}  // namespace gsep::kernels
