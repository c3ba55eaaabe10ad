#include <catch_amalgamated.hpp>

#include "hartree/io.hpp"

using namespace hartree;

namespace {

struct Dyn {
  std::shared_ptr<RadialGrid> grid;
  NonlocalKernelMatrix K4;
  GroundState gs;
  RadialOperators ops;
  LinearizedSystem sys;
  EigenPair pair;
  RadialField Wd;
  Dyn()
      : grid(std::make_shared<RadialGrid>(build_grid(5, 0.02, 100.0, 512))),
        K4(assemble_kernel(grid, 4.0)),
        gs(calibrate_ground_state(grid, K4, 1.0)),
        ops(grid),
        sys(assemble_linearized(gs, K4)),
        pair(compute_eigenpair(sys)),
        Wd(discrete_ground_state(gs.W, K4, sys)) {}

  EvolutionContext ctx() const { return {grid, &K4, &ops, &gs, &sys, &pair}; }

  double mass(const VectorXcd& u) const {
    double s = 0.0;
    for (std::size_t i = 0; i < grid->size(); ++i)
      s += grid->cell_weights[i] * std::norm(u[i]);
    return s;
  }
};

const Dyn& lab() {
  static Dyn d;
  return d;
}

}  // namespace

TEST_CASE("split-step propagator conserves the discrete mass exactly") {
  const auto& d = lab();
  const SplitStepPropagator prop(d.grid, d.K4, 1e-3);
  VectorXcd u = random_trial_field(d.grid, 11).values();
  const double m0 = d.mass(u);
  for (int k = 0; k < 200; ++k) prop.step(u);
  CHECK(std::abs(d.mass(u) - m0) / m0 <= 1e-12);
}

TEST_CASE("discrete ground state is stationary under the flow") {
  const auto& d = lab();
  const SplitStepPropagator prop(d.grid, d.K4, 1e-4);
  VectorXcd u = d.Wd.values();
  const double E0 = energy(d.ops, d.K4, RadialField(d.grid, VectorXcd(u)));
  for (int k = 0; k < 2000; ++k) prop.step(u);
  // the state only picks up a uniform phase
  double dev = 0.0;
  const complexd phase = u[200] / d.Wd[200];
  for (std::size_t i = 0; i < d.grid->size(); ++i)
    dev = std::max(dev, std::abs(u[i] - phase * d.Wd[i]));
  CHECK(std::abs(std::abs(phase) - 1.0) <= 1e-12);
  CHECK(dev <= 1e-4);
  CHECK(std::abs(energy(d.ops, d.K4, RadialField(d.grid, VectorXcd(u))) - E0) /
            std::abs(E0) <=
        1e-8);
}

TEST_CASE("split-step scheme is second order in dt") {
  const auto& d = lab();
  auto run = [&](double dt) {
    const SplitStepPropagator p(d.grid, d.K4, dt);
    VectorXcd v = 0.95 * d.gs.W.values();
    for (int k = 0; k < int(std::llround(0.2 / dt)); ++k) p.step(v);
    return v;
  };
  const VectorXcd a = run(4e-3), b = run(2e-3), c = run(1e-3);
  const double order = std::log2((a - b).norm() / (b - c).norm());
  CHECK(order == Catch::Approx(2.0).margin(0.2));
}

TEST_CASE("subcritical and vanishing data are classified correctly") {
  const auto& d = lab();
  EvolutionConfig cfg;
  cfg.dt = 2e-4;
  cfg.T = 0.3;
  cfg.cadence = 150;
  const auto ctx = d.ctx();
  CHECK(classify_trajectory(evolve(0.9 * d.gs.W, cfg, ctx)) == "trapped-below");
  CHECK(classify_trajectory(evolve(RadialField(d.grid), cfg, ctx)) ==
        "dispersing");
  // a supercritical state leaves on the high-gradient side; depending on
  // the horizon it may already trip the concentration monitor
  const TrajectoryRecord above = evolve(1.15 * d.gs.W, cfg, ctx);
  CHECK(above.samples.front().flag == "trapped-above");
  const std::string cls = classify_trajectory(above);
  CHECK((cls == "trapped-above" || cls == "blowup-suspected"));
}

TEST_CASE("trajectory CSV is deterministic and schema-complete") {
  const auto& d = lab();
  EvolutionConfig cfg;
  cfg.dt = 5e-4;
  cfg.T = 0.05;
  cfg.cadence = 50;
  cfg.virial_radii = {5.0, 10.0};
  const auto ctx = d.ctx();
  const std::string c1 = trajectory_csv(evolve(0.95 * d.gs.W, cfg, ctx));
  const std::string c2 = trajectory_csv(evolve(0.95 * d.gs.W, cfg, ctx));
  CHECK(c1 == c2);
  CHECK(c1.substr(0, c1.find('\n')) ==
        "t,E,mass,grad_norm_sq,delta,theta,mu,alpha,"
        "V_R5,dtV_R5,d2tV_R5,A_R5,V_R10,dtV_R10,d2tV_R10,A_R10,"
        "alpha_plus,alpha_minus,beta,gamma,flag");
}

TEST_CASE("virial profile satisfies the cutoff constraints") {
  const auto& d = lab();
  const VirialProfile p = build_virial_profile(d.grid, 10.0);
  for (std::size_t i = 0; i < d.grid->size(); ++i) {
    const double r = d.grid->nodes[i];
    CHECK(p.phipp[i] <= 2.0 + 1e-12);
    if (r <= 10.0) {
      CHECK(p.phi[i] == Catch::Approx(r * r).margin(1e-12));
      CHECK(p.dphi[i] == Catch::Approx(2.0 * r).margin(1e-12));
    }
    if (r >= 20.0) {
      CHECK(p.dphi[i] == 0.0);
      CHECK(p.phipp[i] == 0.0);
    }
  }
  // the plateau value is positive and below the r^2 continuation
  const std::size_t last = d.grid->size() - 1;
  CHECK(p.phi[last] > 0.0);
  CHECK(p.phi[last] < 400.0);
  CHECK_THROWS_AS(build_virial_profile(d.grid, 60.0), error);
}

TEST_CASE("virial time derivative vanishes identically for real data") {
  const auto& d = lab();
  const VirialProfile p = build_virial_profile(d.grid, 10.0);
  for (std::uint64_t s : {1ull, 2ull}) {
    RadialField u = random_trial_field(d.grid, s);
    u = RadialField::from_real(d.grid, u.real());
    const VirialReport vr = virial_report(p, u, d.ops, d.K4);
    CHECK(std::abs(vr.dtV) <= 1e-12 * std::max(1.0, std::abs(vr.V)));
  }
}

TEST_CASE("virial defect of the ground state decreases with the radius") {
  const auto& d = lab();
  std::vector<double> A;
  for (double R : {5.0, 10.0, 20.0})
    A.push_back(std::abs(
        virial_report(build_virial_profile(d.grid, R), d.gs.W, d.ops, d.K4).A_R));
  CHECK(A[0] > A[1]);
  CHECK(A[1] > A[2]);
  CHECK(A[2] <= 1e-4);  // frozen reference 4.3e-6 at this resolution
}

TEST_CASE("virial derivatives agree with finite differences along a run") {
  const auto& d = lab();
  const VirialProfile p = build_virial_profile(d.grid, 10.0);
  const SplitStepPropagator prop(d.grid, d.K4, 1e-4);
  VectorXcd u = 0.95 * d.gs.W.values();
  const int stride = 10, samples = 21;
  std::vector<double> V(samples), dV(samples), d2V(samples);
  for (int j = 0; j < samples; ++j) {
    const VirialReport vr =
        virial_report(p, RadialField(d.grid, VectorXcd(u)), d.ops, d.K4);
    V[j] = vr.V;
    dV[j] = vr.dtV;
    d2V[j] = vr.d2tV;
    if (j + 1 < samples)
      for (int s = 0; s < stride; ++s) prop.step(u);
  }
  const double h = stride * 1e-4;
  double s1 = 0, s2 = 0, e1 = 0, e2 = 0;
  for (int j = 1; j + 1 < samples; ++j) {
    s1 = std::max(s1, std::abs(dV[j]));
    s2 = std::max(s2, std::abs(d2V[j]));
    e1 = std::max(e1, std::abs((V[j + 1] - V[j - 1]) / (2 * h) - dV[j]));
    e2 = std::max(e2, std::abs((dV[j + 1] - dV[j - 1]) / (2 * h) - d2V[j]));
  }
  CHECK(e1 / s1 <= 1e-3);
  CHECK(e2 / s2 <= 1e-2);
}

TEST_CASE("evolution rejects inconsistent configurations") {
  const auto& d = lab();
  const auto ctx = d.ctx();
  EvolutionConfig cfg;
  cfg.dt = -1.0;
  CHECK_THROWS_AS(evolve(d.gs.W, cfg, ctx), error);
  cfg = {};
  cfg.virial_radii = {80.0};  // 2R beyond the domain
  CHECK_THROWS_AS(evolve(d.gs.W, cfg, ctx), error);
}
