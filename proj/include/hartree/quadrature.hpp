#ifndef HARTREE_QUADRATURE_HPP
#define HARTREE_QUADRATURE_HPP

#include <array>

#include "hartree/common.hpp"

namespace hartree {
namespace detail {

/// Nodes and weights of the 7-point Gauss-Legendre rule on [-1, 1].
struct Gauss7 {
  static constexpr std::array<double, 7> x = {
      -0.9491079123427585, -0.7415311855993945, -0.4058451513773972,
      0.0,                  0.4058451513773972,  0.7415311855993945,
      0.9491079123427585};
  static constexpr std::array<double, 7> w = {
      0.1294849661688697, 0.2797053914892766, 0.3818300505051189,
      0.4179591836734694, 0.3818300505051189, 0.2797053914892766,
      0.1294849661688697};
};

/// Adaptive Gauss bisection of int_a^b f, comparing one 7-point panel
/// against its two halves. Singular endpoints are handled by grading:
/// every Gauss node stays strictly inside, and the depth cap keeps
/// evaluation points off the singularity itself.
template <class F>
double adaptive_panel(const F& f, double a, double b, double tol, int depth = 0) {
  auto panel = [&](double lo, double hi) {
    double s = 0.0;
    for (int q = 0; q < 7; ++q) {
      const double x = 0.5 * (lo + hi) + 0.5 * (hi - lo) * Gauss7::x[q];
      s += 0.5 * (hi - lo) * Gauss7::w[q] * f(x);
    }
    return s;
  };
  const double mid = 0.5 * (a + b);
  const double coarse = panel(a, b);
  const double fine = panel(a, mid) + panel(mid, b);
  if (depth >= 24 || std::abs(fine - coarse) <= tol * (1.0 + std::abs(fine)))
    return fine;
  return adaptive_panel(f, a, mid, 0.5 * tol, depth + 1) +
         adaptive_panel(f, mid, b, 0.5 * tol, depth + 1);
}

/// Vector-valued variant: int_a^b v(x) * p_m(x) for a family of cheap
/// polynomial factors p_m sharing one expensive scalar factor v. The
/// adaptivity is driven jointly so v is evaluated once per node for the
/// whole family.
template <std::size_t M, class V, class P>
std::array<double, M> adaptive_panel_family(const V& v, const P& p, double a,
                                            double b, double tol, int depth = 0) {
  auto panel = [&](double lo, double hi) {
    std::array<double, M> s{};
    for (int q = 0; q < 7; ++q) {
      const double x = 0.5 * (lo + hi) + 0.5 * (hi - lo) * Gauss7::x[q];
      const double vv = 0.5 * (hi - lo) * Gauss7::w[q] * v(x);
      const std::array<double, M> pm = p(x);
      for (std::size_t m = 0; m < M; ++m) s[m] += vv * pm[m];
    }
    return s;
  };
  const double mid = 0.5 * (a + b);
  const std::array<double, M> coarse = panel(a, b);
  std::array<double, M> fine = panel(a, mid);
  {
    const std::array<double, M> right = panel(mid, b);
    for (std::size_t m = 0; m < M; ++m) fine[m] += right[m];
  }
  double err = 0.0, mag = 0.0;
  for (std::size_t m = 0; m < M; ++m) {
    err = std::max(err, std::abs(fine[m] - coarse[m]));
    mag = std::max(mag, std::abs(fine[m]));
  }
  if (depth >= 24 || err <= tol * (1.0 + mag)) return fine;
  std::array<double, M> out = adaptive_panel_family<M>(v, p, a, mid, 0.5 * tol, depth + 1);
  const std::array<double, M> rr = adaptive_panel_family<M>(v, p, mid, b, 0.5 * tol, depth + 1);
  for (std::size_t m = 0; m < M; ++m) out[m] += rr[m];
  return out;
}

/// Integral of f over [0, b] with an integrable singularity (or sharp
/// peak of width `scale`) at 0: geometrically graded panels anchored at
/// the peak scale, each resolved by a lightly adaptive Gauss rule. Cost
/// is bounded independently of how small `scale` is.
template <class F>
double graded_panels(const F& f, double b, double scale, double tol) {
  double lo = 0.0;
  double hi = std::min(b, std::max(scale, 1e-14));
  double s = 0.0;
  while (lo < b) {
    s += adaptive_panel(f, lo, hi, tol, 20);  // start near the depth cap:
    lo = hi;                                  // at most a few refinements
    hi = std::min(b, 2.0 * hi);
  }
  return s;
}

}  // namespace detail
}  // namespace hartree

#endif
