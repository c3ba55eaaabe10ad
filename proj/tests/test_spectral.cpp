#include <catch_amalgamated.hpp>

#include "hartree/io.hpp"

using namespace hartree;

namespace {

struct Spectral {
  std::shared_ptr<RadialGrid> grid;
  NonlocalKernelMatrix K4;
  GroundState gs;
  RadialOperators ops;
  LinearizedSystem sys;
  EigenPair pair;
  Spectral()
      : grid(std::make_shared<RadialGrid>(build_grid(5, 0.02, 100.0, 512))),
        K4(assemble_kernel(grid, 4.0)),
        gs(calibrate_ground_state(grid, K4, 1.0)),
        ops(grid),
        sys(assemble_linearized(gs, K4)),
        pair(compute_eigenpair(sys)) {}
};

const Spectral& lab() {
  static Spectral s;
  return s;
}

}  // namespace

TEST_CASE("linearized operators are self-adjoint in the cell measure") {
  CHECK(lab().sys.weighted_asymmetry() <= 1e-12);
}

TEST_CASE("discrete null modes shrink with resolution") {
  const auto& s = lab();
  auto nm = [&](const MatrixXd& L, const VectorXd& v) {
    return s.sys.norm_m((L * v).cast<complexd>()) /
           s.sys.norm_m(v.cast<complexd>());
  };
  // frozen references: 6.2e-4 and 1.0e-3 at this resolution
  CHECK(nm(s.sys.Lm, s.gs.W.real()) <= 2e-3);
  CHECK(nm(s.sys.Lp, s.gs.Wtilde.real()) <= 2e-3);
}

TEST_CASE("unstable eigenvalue matches the frozen cross-checked value") {
  const auto& p = lab().pair;
  CHECK(p.e0 == Catch::Approx(3.816511).margin(1e-4));  // frozen
  CHECK(p.eigen_residual <= 1e-5);
  CHECK(std::abs(p.e0 - p.e0_pencil) / p.e0 <= 1e-4);
  CHECK(std::abs(p.e0 - p.e0_sqrt) / p.e0 <= 1e-4);
  CHECK(p.real_positive_count == 1);
}

TEST_CASE("eigenfunction pair is normalized and sign-fixed") {
  const auto& s = lab();
  CHECK(s.sys.bilinear_B(s.pair.Yplus(), s.pair.Yminus()) ==
        Catch::Approx(1.0).margin(1e-10));
  // the raw pairing before the sign flip is negative on this family
  CHECK(s.pair.B_prenorm < 0.0);
  CHECK(s.pair.Y1.real().dot(s.sys.F * s.gs.W.real()) > 0.0);
}

TEST_CASE("eigenfunctions decay at the predicted exponential rate") {
  const auto& p = lab().pair;
  const double target = std::sqrt(p.e0 / 2.0);
  for (const RadialField& y : {p.Yplus(), p.Yminus()}) {
    const auto [rate, r2] = exponential_tail_fit(y);
    CHECK(-rate == Catch::Approx(target).epsilon(0.01));
    CHECK(r2 >= 0.999);
  }
}

TEST_CASE("coercivity constants match frozen values") {
  const auto& s = lab();
  // frozen references at this resolution: 0.2618 and 0.2061
  CHECK(coercivity_constant(s.sys, Subspace::Hperp) ==
        Catch::Approx(0.2618).epsilon(0.05));
  CHECK(coercivity_constant(s.sys, Subspace::Gperp, &s.pair) ==
        Catch::Approx(0.2061).epsilon(0.05));
  CHECK(coercivity_constant(s.sys, Subspace::unconstrained) ==
        Catch::Approx(-1.0).epsilon(1e-3));
  CHECK(s.sys.phi(s.gs.W) ==
        Catch::Approx(-s.gs.grad_norm_sq).epsilon(1e-3));
  CHECK_THROWS_AS(coercivity_constant(s.sys, Subspace::Gperp, nullptr), error);
}

TEST_CASE("oblique decomposition reproduces basis directions exactly") {
  const auto& s = lab();
  const RadialField iW(s.grid, complexd(0, 1) * s.gs.W.values());
  const Decomposition di = decompose_perturbation(iW, s.pair, s.sys);
  CHECK(di.alpha_plus == Catch::Approx(0.0).margin(1e-10));
  CHECK(di.alpha_minus == Catch::Approx(0.0).margin(1e-10));
  CHECK(di.beta == Catch::Approx(1.0).margin(1e-10));
  CHECK(di.gamma == Catch::Approx(0.0).margin(1e-10));

  const Decomposition dy = decompose_perturbation(s.pair.Yplus(), s.pair, s.sys);
  CHECK(dy.alpha_plus == Catch::Approx(1.0).margin(1e-8));
  CHECK(dy.alpha_minus == Catch::Approx(0.0).margin(1e-8));
}

TEST_CASE("decomposition residuals vanish to solver precision") {
  const auto& s = lab();
  const RadialField v = random_trial_field(s.grid, 31);
  const Decomposition d = decompose_perturbation(v, s.pair, s.sys);
  const double scale = std::sqrt(s.ops.h1_norm_sq(v));
  CHECK(std::abs(s.sys.bilinear_B(d.vperp, s.pair.Yplus())) <= 1e-9 * scale);
  CHECK(std::abs(s.sys.bilinear_B(d.vperp, s.pair.Yminus())) <= 1e-9 * scale);
  const RadialField iW(s.grid, complexd(0, 1) * s.gs.W.values());
  CHECK(std::abs(s.sys.h1_flux(d.vperp, iW)) <= 1e-9 * scale);
  CHECK(std::abs(s.sys.h1_flux(d.vperp, s.sys.Wtilde)) <= 1e-9 * scale);
  // linearity: recombining the parts restores v
  const RadialField back = d.alpha_plus * s.pair.Yplus() +
                           d.alpha_minus * s.pair.Yminus() + d.beta * iW +
                           d.gamma * s.sys.Wtilde + d.vperp;
  CHECK((back.values() - v.values()).norm() <= 1e-12 * v.values().norm());
}

TEST_CASE("modulation fit undoes a synthetic scaling and phase") {
  const auto& s = lab();
  for (auto [th0, mu0] : {std::pair{0.4, 1.2}, {3.6, 0.85}}) {
    const RadialField u = scale_phase_apply(s.gs.W, th0, mu0);
    const ModulationFit fit = fit_modulation(u, s.gs, s.ops);
    const RadialField undone = scale_phase_apply(u, fit.theta, fit.mu);
    CHECK(std::sqrt(s.ops.h1_norm_sq(undone - s.gs.W)) <= 1e-6);
    CHECK(std::abs(fit.alpha) <= 1e-6);
    CHECK(fit.residual_iW <= 1e-8 * std::sqrt(s.gs.grad_norm_sq));
    CHECK(fit.residual_Wt <= 1e-8 * std::sqrt(s.gs.grad_norm_sq));
  }
}

TEST_CASE("modulation fit is linear in a pure amplitude perturbation") {
  const auto& s = lab();
  const double a = 1e-3;
  const ModulationFit fit = fit_modulation((1.0 + a) * s.gs.W, s.gs, s.ops);
  CHECK(fit.alpha == Catch::Approx(a).epsilon(1e-3));
  CHECK(std::sqrt(s.ops.h1_norm_sq(fit.h)) <= 1e-5);
}

TEST_CASE("states outside the basin are rejected") {
  const auto& s = lab();
  CHECK_THROWS_AS(fit_modulation(3.0 * s.gs.W, s.gs, s.ops), error);
  CHECK_THROWS_AS(scale_phase_apply(s.gs.W, 0.0, -1.0), error);
}
