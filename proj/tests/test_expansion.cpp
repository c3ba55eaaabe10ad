#include <catch_amalgamated.hpp>

#include "hartree/expansion.hpp"

using namespace hartree;

namespace {

struct Exp {
  std::shared_ptr<RadialGrid> grid;
  NonlocalKernelMatrix K4;
  GroundState gs;
  RadialOperators ops;
  LinearizedSystem sys;
  EigenPair pair;
  ExpansionSeries s3;
  Exp()
      : grid(std::make_shared<RadialGrid>(build_grid(5, 0.02, 100.0, 512))),
        K4(assemble_kernel(grid, 4.0)),
        gs(calibrate_ground_state(grid, K4, 1.0)),
        ops(grid),
        sys(assemble_linearized(gs, K4)),
        pair(compute_eigenpair(sys)),
        s3(build_expansion(1.0, 3, sys, pair, K4)) {}
};

const Exp& lab() {
  static Exp e;
  return e;
}

}  // namespace

TEST_CASE("first order of the series is the unstable mode") {
  const auto& e = lab();
  const ExpansionSeries s1 = build_expansion(1.0, 1, e.sys, e.pair, e.K4);
  const RadialField diff =
      evaluate_approximation(s1, 0.0) - e.gs.W - e.pair.Yplus();
  CHECK(e.sys.norm_m(diff.values()) <= 1e-12);
  // zero amplitude collapses the whole series
  const ExpansionSeries s0 = build_expansion(0.0, 3, e.sys, e.pair, e.K4);
  for (const auto& z : s0.Z) CHECK(e.sys.norm_m(z.values()) == 0.0);
}

TEST_CASE("construction orders carry only solver-level residuals") {
  const auto& e = lab();
  double zmax = 0.0;
  for (const auto& z : e.s3.Z) zmax = std::max(zmax, e.sys.norm_m(z.values()));
  for (int p = 1; p <= 3; ++p) CHECK(e.s3.residual_norms[p - 1] <= 1e-6 * zmax);
  // the leading defect sits at order k + 1 and is order one
  CHECK(e.s3.residual_norms[3] > 1.0);
}

TEST_CASE("stored residual coefficients match a direct evaluation") {
  const auto& e = lab();
  double worst = 0.0;
  for (double t : {0.3, 1.1}) {
    const RadialField h = e.s3.evaluate_h(t);
    VectorXcd dth = VectorXcd::Zero(h.size());
    const double X = std::exp(-e.pair.e0 * t);
    double Xp = 1.0;
    for (int j = 1; j <= e.s3.k; ++j) {
      Xp *= X;
      dth += (-j * e.pair.e0 * Xp) * e.s3.Z[j - 1].values();
    }
    const VectorXcd direct = dth + e.sys.apply_block(h.values()) -
                             remainder_R(h, e.gs.W, e.K4).values();
    worst = std::max(worst, e.sys.norm_m(VectorXcd(
                                direct - e.s3.evaluate_residual(t).values())));
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("truncation defect at the working time decreases with the order") {
  const auto& e = lab();
  const double t0 = 2.0 / e.pair.e0;
  std::vector<double> defects;
  for (int k = 1; k <= 4; ++k)
    defects.push_back(
        expansion_defect(build_expansion(1.0, k, e.sys, e.pair, e.K4), t0));
  for (std::size_t i = 0; i + 1 < defects.size(); ++i)
    CHECK(defects[i] > defects[i + 1]);
  // frozen reference ladder 0.193 / 0.072 / 0.021 / 0.0058
  CHECK(defects[0] == Catch::Approx(0.193).epsilon(0.1));
  CHECK(defects[3] == Catch::Approx(0.0058).epsilon(0.1));
}

TEST_CASE("threshold data sit on the correct gradient sides") {
  const auto& e = lab();
  const double t0 = 2.0 / e.pair.e0;
  for (int sign : {-1, 1}) {
    const RadialField w = wpm_initial_data(sign, t0, 4, e.sys, e.pair, e.K4);
    const double gap = e.ops.h1_norm_sq(w) - e.gs.grad_norm_sq;
    CHECK(((sign > 0) == (gap > 0)));
    CHECK(std::abs(energy(e.ops, e.K4, w) - e.gs.energy_value) /
              e.gs.energy_value <=
          1e-4);
  }
}

TEST_CASE("threshold data construction rejects a too-early time") {
  const auto& e = lab();
  CHECK_THROWS_AS(wpm_initial_data(1, 0.05, 3, e.sys, e.pair, e.K4), error);
  CHECK_THROWS_AS(wpm_initial_data(0, 1.0, 3, e.sys, e.pair, e.K4), error);
  CHECK_THROWS_AS(wpm_initial_data(1, -1.0, 3, e.sys, e.pair, e.K4), error);
}

TEST_CASE("series states converge to the ground state quadratically past "
          "first order") {
  const auto& e = lab();
  for (double t : {1.0 / e.pair.e0, 2.5 / e.pair.e0}) {
    const double X = std::exp(-e.pair.e0 * t);
    const RadialField d =
        evaluate_approximation(e.s3, t) - e.gs.W - X * e.pair.Yplus();
    const double c = std::sqrt(e.ops.h1_norm_sq(d)) / (X * X);
    CHECK(c > 0.5);
    CHECK(c < 50.0);
  }
}
