#include <catch_amalgamated.hpp>
#include <cstdlib>

#include "hartree/io.hpp"

using namespace hartree;

namespace {

struct Core {
  std::shared_ptr<RadialGrid> grid;
  NonlocalKernelMatrix K4;
  GroundState gs;
  RadialOperators ops;
  Core(std::size_t n, double tol)
      : grid(std::make_shared<RadialGrid>(build_grid(5, 0.02, 100.0, n))),
        K4(assemble_kernel(grid, 4.0)),
        gs(calibrate_ground_state(grid, K4, tol)),
        ops(grid) {}
};

const Core& core512() {
  static Core c(512, 1.0);
  return c;
}
const Core& core1024() {
  static Core c(1024, 1.0);
  return c;
}

const double c0_exact = std::sqrt(30.0 / (pi * pi * pi));

}  // namespace

TEST_CASE("grid weights are positive and tile the domain") {
  const RadialGrid& g = *core512().grid;
  double wsum = 0.0, msum = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(g.weights[i] > 0.0);
    CHECK(g.cell_weights[i] > 0.0);
    wsum += g.weights[i];
    msum += g.cell_weights[i];
  }
  // dual cells tile [0, r_max] exactly
  const double ball = sphere_area(5) * std::pow(g.r_max(), 5) / 5.0;
  CHECK(msum == Catch::Approx(ball).epsilon(1e-13));
  CHECK(g.faces.front() == 0.0);
  CHECK(g.faces.back() == g.r_max());
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(g.faces[i] <= g.nodes[i]);
    CHECK(g.nodes[i] <= g.faces[i + 1]);
  }
  (void)wsum;
}

TEST_CASE("quadrature reproduces the mass of the ground state") {
  // int_{R^5} W^2 = c0^2 |S^4| int r^4 (1+r^2)^{-3} dr = 15 exactly
  const Core& c = core512();
  double s4 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < c.grid->size(); ++i) {
    const double w2 = std::norm(c.gs.W[i]);
    s4 += c.grid->weights[i] * w2;
    s2 += c.grid->cell_weights[i] * w2;
  }
  const double exact = 15.0 * (c.gs.c0 * c.gs.c0) / (c0_exact * c0_exact);
  CHECK(s4 == Catch::Approx(exact).epsilon(1e-6));
  CHECK(s2 == Catch::Approx(exact).epsilon(1e-3));
}

TEST_CASE("ground-state calibration reaches the closed-form constants") {
  const Core& c = core1024();
  CHECK(std::abs(c.gs.c0 - c0_exact) <= 5e-4);
  CHECK(c.gs.grad_norm_sq == Catch::Approx(225.0 / 16.0).epsilon(1e-3));
  CHECK(c.gs.elliptic_residual <= 1e-3);
}

TEST_CASE("energy identities hold at the ground state") {
  const Core& c = core1024();
  CHECK(c.gs.energy_value ==
        Catch::Approx(0.25 * c.gs.grad_norm_sq).epsilon(1e-6));
  CHECK(c.gs.quartic == Catch::Approx(c.gs.grad_norm_sq).epsilon(5e-4));
}

TEST_CASE("interpolation functional is nonnegative on random fields") {
  const Core& c = core512();
  for (int k = 0; k < 20; ++k) {
    const RadialField u = random_trial_field(c.grid, 7000 + k);
    CHECK(hls_functional(c.ops, c.K4, u, c.gs.grad_norm_sq, c.gs.quartic) >=
          -1e-6);
  }
  CHECK_THROWS_AS(hls_functional(c.ops, c.K4, RadialField(c.grid),
                                 c.gs.grad_norm_sq, c.gs.quartic),
                  error);
}

TEST_CASE("kernel rejects unsupported exponents") {
  CHECK_THROWS_AS(assemble_kernel(core512().grid, 2.5), error);
}

TEST_CASE("configuration round trip and environment overrides") {
  RunConfig c = RunConfig::parse(
      "grid.n = 64\n# a comment\nevolve.dt = 1e-3  # trailing\n"
      "evolve.virial_radii = 5, 10, 20\n");
  CHECK(c.get_int("grid.n", 0) == 64);
  CHECK(c.get_double("evolve.dt", 0) == 1e-3);
  CHECK(c.get_double_list("evolve.virial_radii", {}).size() == 3);
  CHECK(c.get_int("grid.d", 5) == 5);  // default path
  CHECK(RunConfig::parse(c.serialize()) == c);

  setenv("HARTREE_GRID_N", "128", 1);
  setenv("HARTREE_RUN_TAG", "x", 1);
  c.apply_env_overrides();
  CHECK(c.get_int("grid.n", 0) == 128);
  CHECK(c.get_string("run.tag", "") == "x");
  unsetenv("HARTREE_GRID_N");
  unsetenv("HARTREE_RUN_TAG");

  CHECK_THROWS_AS(RunConfig::parse("not a pair\n"), error);
  CHECK_THROWS_AS(c.get_int("evolve.dt", 0), error);
}

TEST_CASE("field files round-trip bit for bit") {
  const Core& c = core512();
  const RadialField f = random_trial_field(c.grid, 99);
  const std::string path = "io_test_field.bin";
  write_field(path, f);
  const RadialField g = read_field(path);
  CHECK((g.values() - f.values()).norm() == 0.0);
  CHECK(g.grid().size() == f.grid().size());

  // corrupting the magic must be detected
  {
    std::fstream fs(path, std::ios::in | std::ios::out | std::ios::binary);
    fs.seekp(0);
    fs.write("XXXX", 4);
  }
  CHECK_THROWS_AS(read_field(path), error);
  std::remove(path.c_str());
}

TEST_CASE("random trial fields are deterministic per seed") {
  const Core& c = core512();
  const RadialField a = random_trial_field(c.grid, 5);
  const RadialField b = random_trial_field(c.grid, 5);
  const RadialField d = random_trial_field(c.grid, 6);
  CHECK((a.values() - b.values()).norm() == 0.0);
  CHECK((a.values() - d.values()).norm() > 0.0);
  CHECK(a.all_finite());
  // even through the origin: the profile stays bounded at the first node
  CHECK(std::abs(a[0]) < 1e3);
}

TEST_CASE("manifests carry checksums and are deterministic") {
  RunManifest m;
  m.command = "demo";
  m.seed = 7;
  m.config = RunConfig::parse("grid.n = 64\n");
  m.add_artifact("a.csv", "payload");
  const std::string j1 = m.to_json();
  CHECK(j1.find("\"a.csv\"") != std::string::npos);
  CHECK(j1.find(fnv1a64_hex("payload")) != std::string::npos);
  CHECK(j1 == m.to_json());
}

TEST_CASE("scalar reports format one row per value") {
  ScalarReport rep;
  rep.config_hash = "deadbeef";
  rep.add("x", 1.5);
  CHECK(rep.get("x") == 1.5);
  CHECK_THROWS_AS(rep.get("y"), error);
  CHECK(rep.to_csv().find("x,1.5,deadbeef") != std::string::npos);
  CHECK_THROWS_AS(rep.add("bad", std::numeric_limits<double>::quiet_NaN()), error);
}
