#ifndef HARTREE_MODULATION_HPP
#define HARTREE_MODULATION_HPP

#include "hartree/ground_state.hpp"

namespace hartree {

/// Phase/scale group action u_{theta,mu}(x) = e^{i theta} mu^{-(d-2)/2}
/// u(x/mu). Identity at (0,1); composition law (th1,mu1) then (th2,mu2)
/// = (th1+th2, mu1*mu2). Off-node values come from the field
/// interpolator (cubic in the grading coordinate, r^{-(d-2)} tail law).
inline RadialField scale_phase_apply(const RadialField& u, double theta,
                                     double mu) {
  if (!(mu > 0.0) || !std::isfinite(mu) || !std::isfinite(theta))
    throw error("scale-out-of-range", "need finite theta and mu > 0");
  const int d = u.grid().d;
  const FieldInterpolator interp(u);
  const complexd phase = std::polar(1.0, theta);
  const double amp = std::pow(mu, -0.5 * (d - 2));
  RadialField out(u.grid_ptr());
  for (std::size_t i = 0; i < u.size(); ++i)
    out[i] = phase * amp * interp(u.grid().nodes[i] / mu);
  return out;
}

/// Result of the orthogonality-based fit u_{theta,mu} = (1+alpha) W + h
/// with h H1-orthogonal to iW and Wtilde.
struct ModulationFit {
  double theta = 0.0;        // in [0, 2 pi)
  double mu = 1.0;           // > 0
  double alpha = 0.0;        // W-component minus one
  RadialField h;             // remainder, in H-perp
  double delta = 0.0;        // | |grad u|^2 - |grad W|^2 |
  double residual_iW = 0.0;  // |<u_{theta,mu}, iW>_{H1}| (by-parts form)
  double residual_Wt = 0.0;  // |<u_{theta,mu}, Wtilde>_{H1}| (by-parts form)
  int newton_iterations = 0;
};

namespace detail {

/// The two orthogonality functionals, written without interpolation.
/// Integrating <u_{theta,mu}, iW>_{H1} by parts and substituting
/// y = x/mu gives
///   F1 = mu^{(d+2)/2} sum_i w_i G1(mu r_i) Im(e^{i theta} u_i),
///   F2 = mu^{(d+2)/2} sum_i w_i G2(mu r_i) Re(e^{i theta} u_i),
/// where G1 = -Delta W and G2 = -Delta Wtilde are closed forms:
///   G1(s) = c0 d(d-2) (1+s^2)^{-(d+2)/2},
///   G2(s) = (d+2)/2 G1 + s G1'   (Wtilde is the scaling generator of W).
/// Roots in (theta, mu) are exactly the orthogonality conditions; the
/// Jacobian is available in the same closed form.
struct ModulationFunctionals {
  const RadialGrid& g;
  const VectorXcd& u;
  double c0;

  double G1(double s) const {
    const int d = g.d;
    return c0 * d * (d - 2.0) * std::pow(1.0 + s * s, -0.5 * (d + 2));
  }
  double dG1(double s) const {
    const int d = g.d;
    return -c0 * d * (d - 2.0) * (d + 2.0) * s * std::pow(1.0 + s * s, -0.5 * (d + 4));
  }
  double G2(double s) const { return 0.5 * (g.d + 2) * G1(s) + s * dG1(s); }
  double dG2(double s) const {
    // derivative of G2 via d/ds [ (d+2)/2 G1 + s G1' ]
    const int d = g.d;
    const double ddG1 = -c0 * d * (d - 2.0) * (d + 2.0) *
                        (std::pow(1.0 + s * s, -0.5 * (d + 4)) -
                         (d + 4.0) * s * s * std::pow(1.0 + s * s, -0.5 * (d + 6)));
    return 0.5 * (d + 2) * dG1(s) + dG1(s) + s * ddG1;
  }

  /// F = (F1, F2), J = d(F1,F2)/d(theta, log mu).
  void eval(double theta, double mu, Eigen::Vector2d& F,
            Eigen::Matrix2d* J) const {
    const double c = std::cos(theta), s = std::sin(theta);
    const double pw = 0.5 * (g.d + 2);
    const double pref = std::pow(mu, pw);
    double f1 = 0, f2 = 0, f1_th = 0, f2_th = 0, f1_mu = 0, f2_mu = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double re = u[i].real() * c - u[i].imag() * s;   // Re(e^{i th} u)
      const double im = u[i].real() * s + u[i].imag() * c;   // Im(e^{i th} u)
      const double x = mu * g.nodes[i];
      const double w = g.weights[i];
      f1 += w * G1(x) * im;
      f2 += w * G2(x) * re;
      if (J) {
        f1_th += w * G1(x) * re;
        f2_th -= w * G2(x) * im;
        f1_mu += w * dG1(x) * g.nodes[i] * im;
        f2_mu += w * dG2(x) * g.nodes[i] * re;
      }
    }
    F[0] = pref * f1;
    F[1] = pref * f2;
    if (J) {
      (*J)(0, 0) = pref * f1_th;
      (*J)(1, 0) = pref * f2_th;
      // d/d(log mu) = mu d/dmu
      (*J)(0, 1) = pw * F[0] + pref * mu * f1_mu;
      (*J)(1, 1) = pw * F[1] + pref * mu * f2_mu;
    }
  }
};

}  // namespace detail

/// Fit (theta, mu) so that u_{theta,mu} - W is H1-orthogonal to iW and
/// Wtilde, then split off the W component. A 16 x 16 scan over
/// theta in [0, 2 pi), log mu in [-1, 1] initializes a damped Newton
/// iteration on the closed-form functionals above. Callers outside the
/// basin delta(u) <= delta0 get no-convergence and should fall back to
/// raw delta tracking.
inline ModulationFit fit_modulation(const RadialField& u, const GroundState& gs,
                                    const RadialOperators& ops,
                                    double delta0 = -1.0) {
  if (u.grid_ptr() != gs.W.grid_ptr())
    throw error("grid-mismatch", "state and calibration live on different grids");
  if (delta0 < 0.0) delta0 = 0.3 * gs.grad_norm_sq;
  const double delta = delta_value(ops, u, gs.grad_norm_sq);
  if (delta > delta0)
    throw error("no-convergence", "state outside the modulation basin");

  const detail::ModulationFunctionals fn{u.grid(), u.values(), gs.c0};
  Eigen::Vector2d F;
  Eigen::Matrix2d J;

  // coarse scan for the Newton initializer
  double best = std::numeric_limits<double>::infinity();
  double th0 = 0.0, nu0 = 0.0;
  for (int a = 0; a < 16; ++a)
    for (int b = 0; b < 16; ++b) {
      const double th = 2.0 * pi * a / 16.0;
      const double nu = -1.0 + 2.0 * (b + 0.5) / 16.0;
      fn.eval(th, std::exp(nu), F, nullptr);
      const double q = F.squaredNorm();
      if (q < best) {
        best = q;
        th0 = th;
        nu0 = nu;
      }
    }

  double th = th0, nu = nu0;
  int iters = 0;
  for (; iters < 60; ++iters) {
    fn.eval(th, std::exp(nu), F, &J);
    const Eigen::Vector2d step = J.fullPivLu().solve(F);
    if (!step.allFinite())
      throw error("no-convergence", "singular modulation Jacobian");
    double lam = 1.0;
    const double q0 = F.squaredNorm();
    Eigen::Vector2d Ft;
    for (int halve = 0; halve < 12; ++halve) {
      fn.eval(th - lam * step[0], std::exp(nu - lam * step[1]), Ft, nullptr);
      if (Ft.squaredNorm() < q0) break;
      lam *= 0.5;
    }
    th -= lam * step[0];
    nu -= lam * step[1];
    if (lam * step.cwiseAbs().maxCoeff() < 1e-14) break;
  }
  const double mu = std::exp(nu);
  fn.eval(th, mu, F, nullptr);
  const double h1u = std::sqrt(ops.h1_norm_sq(u));
  if (F.cwiseAbs().maxCoeff() > 1e-8 * std::max(h1u, 1e-30))
    throw error("no-convergence", "orthogonality residual did not vanish");

  ModulationFit fit;
  fit.theta = th - 2.0 * pi * std::floor(th / (2.0 * pi));
  fit.mu = mu;
  fit.delta = delta;
  fit.residual_iW = std::abs(F[0]);
  fit.residual_Wt = std::abs(F[1]);
  fit.newton_iterations = iters + 1;
  const RadialField v = scale_phase_apply(u, fit.theta, fit.mu);
  fit.alpha = ops.h1_inner(v, gs.W) / gs.grad_norm_sq - 1.0;
  fit.h = v - (1.0 + fit.alpha) * gs.W;
  return fit;
}

}  // namespace hartree

#endif
