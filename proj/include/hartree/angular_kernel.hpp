#ifndef HARTREE_ANGULAR_KERNEL_HPP
#define HARTREE_ANGULAR_KERNEL_HPP

#include "hartree/quadrature.hpp"

namespace hartree {

/// Sphere average of the Riesz kernel |rho e_1 - y'|^{-gamma} over the unit
/// sphere:
///
///   V_gamma(rho) = omega_{d-2} int_{-1}^{1} (1-s^2)^{(d-3)/2}
///                                (rho^2 - 2 rho s + 1)^{-gamma/2} ds.
///
/// Radial convolutions against |x|^{-gamma} reduce to 1-d integrals against
/// this kernel. V is smooth away from rho = 1; at rho = 1 it diverges
/// (logarithmically when gamma = d-1) whenever gamma >= d-1.
///
/// Useful exact facts, used by the tests:
///   V(0) = |S^{d-1}|,  V(rho) rho^gamma -> |S^{d-1}| as rho -> inf,
///   V(1/rho) = rho^gamma V(rho).
inline bool angular_kernel_diverges_on_diagonal(int d, double gamma) {
  return gamma >= d - 1;
}

inline double angular_kernel(int d, double gamma, double rho,
                             double tol = 1e-12) {
  if (d < 5) throw error("invalid-dimension", "need d >= 5");
  if (!(rho >= 0.0)) throw error("degenerate-range", "need rho >= 0");
  constexpr double exclusion = 1e-9;
  if (angular_kernel_diverges_on_diagonal(d, gamma) &&
      std::abs(rho - 1.0) < exclusion)
    throw error("diagonal-singularity",
                "angular kernel diverges at rho = 1 for this (d, gamma)");

  // Inversion symmetry: fold rho > 1 into (0, 1]; keeps the integrand peak
  // location fixed and the large-rho branch well scaled.
  if (rho > 1.0) return std::pow(rho, -gamma) * angular_kernel(d, gamma, 1.0 / rho, tol);

  const double omega = sphere_area(d - 1);  // area of S^{d-2} in R^{d-1}
  if (rho == 0.0) return sphere_area(d);

  // Substitution s = cos(psi): the distance factor becomes
  // (1-rho)^2 + 4 rho sin^2(psi/2), smallest at psi = 0. The peak width
  // is |1-rho|, so geometrically graded panels anchored at that scale
  // resolve it at bounded cost however close rho is to 1.
  const auto f = [&](double psi) {
    const double sn = std::sin(0.5 * psi);
    const double q = (1.0 - rho) * (1.0 - rho) + 4.0 * rho * sn * sn;
    return std::pow(std::sin(psi), d - 2) * std::pow(q, -0.5 * gamma);
  };
  const double scale = std::max(std::abs(1.0 - rho), 1e-12);
  return omega * detail::graded_panels(f, pi, scale, tol);
}

/// Sphere average behind the localized virial cross terms: for the weight
/// x.(x-y)/|x-y|^6 the angular reduction is r^{-5} U(rho/r) with
///
///   U(t) = omega_{d-2} int_{-1}^{1} (1-s^2)^{(d-3)/2} (1 - t s)
///                                   (1 - 2 t s + t^2)^{-3} ds.
///
/// Same diagonal behavior class as the gamma = d-1 Riesz kernel.
inline double angular_kernel_virial(int d, double t, double tol = 1e-12) {
  if (d < 5) throw error("invalid-dimension", "need d >= 5");
  if (!(t >= 0.0)) throw error("degenerate-range", "need t >= 0");
  constexpr double exclusion = 1e-9;
  if (std::abs(t - 1.0) < exclusion)
    throw error("diagonal-singularity", "virial angular kernel diverges at t = 1");
  const double omega = sphere_area(d - 1);
  const auto f = [&](double psi) {
    const double sn = std::sin(0.5 * psi);
    const double q = (1.0 - t) * (1.0 - t) + 4.0 * t * sn * sn;
    return std::pow(std::sin(psi), d - 2) * (1.0 - t * std::cos(psi)) / (q * q * q);
  };
  const double scale = std::max(std::abs(1.0 - t), 1e-12);
  return omega * detail::graded_panels(f, pi, scale, tol);
}

}  // namespace hartree

#endif
