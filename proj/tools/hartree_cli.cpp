// Command-line front end: each subcommand builds its context from the
// flat key = value configuration (overridable via HARTREE_* environment
// variables), runs one module, and drops CSV/field artifacts plus a JSON
// manifest with checksums into the output directory.
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"

#include "hartree/acceptance.hpp"

using namespace hartree;

namespace {

struct Session {
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  int threads = 1;
  RunConfig cfg;

  void finish_setup() {
    if (!config_path.empty()) cfg = RunConfig::load(config_path);
    cfg.apply_env_overrides();
    Eigen::setNbThreads(threads);
    std::filesystem::create_directories(out_dir);
  }

  std::shared_ptr<RadialGrid> make_grid() const {
    const std::string grading = cfg.get_string("grid.grading", "geometric");
    if (grading != "geometric" && grading != "uniform")
      throw error("config-parse", "grid.grading must be geometric or uniform");
    return std::make_shared<RadialGrid>(build_grid(
        int(cfg.get_int("grid.d", 5)), cfg.get_double("grid.r_min", 0.02),
        cfg.get_double("grid.r_max", 100.0), std::size_t(cfg.get_int("grid.n", 512)),
        grading == "geometric" ? Grading::geometric : Grading::uniform));
  }

  std::string path(const std::string& name) const { return out_dir + "/" + name; }

  void emit(const std::string& command, RunManifest& man) const {
    man.command = command;
    man.seed = seed;
    man.config = cfg;
    write_text(path("manifest.json"), man.to_json());
    std::cout << "wrote " << path("manifest.json") << "\n";
  }

  void emit_text(const std::string& name, const std::string& bytes,
                 RunManifest& man) const {
    write_text(path(name), bytes);
    man.add_artifact(name, bytes);
    std::cout << "wrote " << path(name) << "\n";
  }

  void emit_field(const std::string& name, const RadialField& f,
                  RunManifest& man) const {
    write_field(path(name), f);
    std::ifstream is(path(name), std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    man.add_artifact(name, ss.str());
    std::cout << "wrote " << path(name) << "\n";
  }
};

struct Lab {
  std::shared_ptr<RadialGrid> grid;
  NonlocalKernelMatrix K4;
  GroundState gs;
  RadialOperators ops;

  explicit Lab(const Session& s)
      : grid(s.make_grid()),
        K4(assemble_kernel(grid, 4.0)),
        gs(calibrate_ground_state(grid, K4,
                                  s.cfg.get_double("ground_state.residual_tol", 1.0))),
        ops(grid) {}
};

RadialField initial_state(const Session& s, const Lab& lab,
                          const LinearizedSystem& sys) {
  const std::string init = s.cfg.get_string("evolve.initial", "ground-state");
  if (init == "ground-state") return discrete_ground_state(lab.gs.W, lab.K4, sys);
  if (init.rfind("scaled:", 0) == 0) {
    const double f = std::stod(init.substr(7));
    return f * lab.gs.W;
  }
  if (init.rfind("random:", 0) == 0) {
    const double eps = std::stod(init.substr(7));
    RadialField h = random_trial_field(lab.grid, s.seed);
    h = (eps * std::sqrt(lab.gs.grad_norm_sq / lab.ops.h1_norm_sq(h))) * h;
    return lab.gs.W + h;
  }
  RadialField u = read_field(init);
  if (u.grid().size() != lab.grid->size() || u.grid().d != lab.grid->d ||
      u.grid().r_min() != lab.grid->r_min() || u.grid().r_max() != lab.grid->r_max())
    throw error("grid-mismatch", "initial state file uses a different grid");
  return RadialField(lab.grid, u.values());
}

int run_ground_state(Session& s) {
  Lab lab(s);
  RunManifest man;
  ScalarReport rep;
  rep.config_hash = fnv1a64_hex(s.cfg.serialize());
  rep.add("c0", lab.gs.c0);
  rep.add("I_d", lab.gs.I_d);
  rep.add("elliptic_residual", lab.gs.elliptic_residual);
  rep.add("grad_norm_sq", lab.gs.grad_norm_sq);
  rep.add("quartic", lab.gs.quartic);
  rep.add("energy", lab.gs.energy_value);
  s.emit_text("ground_state.csv", rep.to_csv(), man);
  s.emit_field("W.field", lab.gs.W, man);
  s.emit_field("Wtilde.field", lab.gs.Wtilde, man);
  s.emit("ground-state", man);
  std::cout << "c0 " << lab.gs.c0 << " grad " << lab.gs.grad_norm_sq << " residual "
            << lab.gs.elliptic_residual << "\n";
  return 0;
}

int run_spectrum(Session& s) {
  Lab lab(s);
  const auto sys = assemble_linearized(lab.gs, lab.K4);
  const auto pair = compute_eigenpair(sys);
  const auto [rate_p, r2_p] = exponential_tail_fit(pair.Yplus());
  RunManifest man;
  ScalarReport rep;
  rep.config_hash = fnv1a64_hex(s.cfg.serialize());
  rep.add("e0", pair.e0);
  rep.add("e0_pencil", pair.e0_pencil);
  rep.add("e0_sqrt", pair.e0_sqrt);
  rep.add("eigen_residual", pair.eigen_residual);
  rep.add("B_prenorm", pair.B_prenorm);
  rep.add("real_positive_count", pair.real_positive_count);
  rep.add("tail_rate", rate_p);
  rep.add("tail_r2", r2_p);
  rep.add("coercivity_Hperp", coercivity_constant(sys, Subspace::Hperp));
  rep.add("coercivity_Gperp", coercivity_constant(sys, Subspace::Gperp, &pair));
  s.emit_text("spectrum.csv", rep.to_csv(), man);
  s.emit_field("Yplus.field", pair.Yplus(), man);
  s.emit_field("Yminus.field", pair.Yminus(), man);
  s.emit("spectrum", man);
  std::cout << "e0 " << pair.e0 << " (pencil " << pair.e0_pencil << ", sqrt "
            << pair.e0_sqrt << ")\n";
  return 0;
}

int run_modulate(Session& s) {
  Lab lab(s);
  const std::string in = s.cfg.get_string("modulate.input", "");
  if (in.empty()) throw error("config-parse", "modulate.input must name a field file");
  const RadialField raw = read_field(in);
  const RadialField u(lab.grid, raw.values());
  const ModulationFit fit =
      fit_modulation(u, lab.gs, lab.ops, s.cfg.get_double("modulate.delta0", -1.0));
  const auto sys = assemble_linearized(lab.gs, lab.K4);
  const auto pair = compute_eigenpair(sys);
  const RadialField v = scale_phase_apply(u, fit.theta, fit.mu) - lab.gs.W;
  const Decomposition dec = decompose_perturbation(v, pair, sys);
  RunManifest man;
  ScalarReport rep;
  rep.config_hash = fnv1a64_hex(s.cfg.serialize());
  rep.add("theta", fit.theta);
  rep.add("mu", fit.mu);
  rep.add("alpha", fit.alpha);
  rep.add("delta", fit.delta);
  rep.add("residual_iW", fit.residual_iW);
  rep.add("residual_Wt", fit.residual_Wt);
  rep.add("newton_iterations", fit.newton_iterations);
  rep.add("alpha_plus", dec.alpha_plus);
  rep.add("alpha_minus", dec.alpha_minus);
  rep.add("beta", dec.beta);
  rep.add("gamma", dec.gamma);
  s.emit_text("modulation.csv", rep.to_csv(), man);
  s.emit_field("h.field", fit.h, man);
  s.emit("modulate", man);
  std::cout << "theta " << fit.theta << " mu " << fit.mu << " alpha " << fit.alpha
            << " delta " << fit.delta << "\n";
  return 0;
}

int run_evolve(Session& s) {
  Lab lab(s);
  const auto sys = assemble_linearized(lab.gs, lab.K4);
  const auto pair = compute_eigenpair(sys);
  EvolutionContext ctx{lab.grid, &lab.K4, &lab.ops, &lab.gs, &sys, &pair};
  EvolutionConfig cfg;
  cfg.dt = s.cfg.get_double("evolve.dt", cfg.dt);
  cfg.T = s.cfg.get_double("evolve.T", cfg.T);
  cfg.cadence = std::size_t(s.cfg.get_int("evolve.cadence", long(cfg.cadence)));
  cfg.virial_radii = s.cfg.get_double_list("evolve.virial_radii", {});
  cfg.delta0 = s.cfg.get_double("evolve.delta0", cfg.delta0);
  cfg.boundary_fraction =
      s.cfg.get_double("evolve.boundary_fraction", cfg.boundary_fraction);
  cfg.disperse_radius = s.cfg.get_double("evolve.disperse_radius", cfg.disperse_radius);
  cfg.disperse_fraction =
      s.cfg.get_double("evolve.disperse_fraction", cfg.disperse_fraction);
  cfg.growth_factor = s.cfg.get_double("evolve.growth_factor", cfg.growth_factor);
  const RadialField u0 = initial_state(s, lab, sys);
  const TrajectoryRecord rec = evolve(u0, cfg, ctx);
  RunManifest man;
  s.emit_text("trajectory.csv", trajectory_csv(rec), man);
  s.emit_field("final.field", rec.final_state, man);
  s.emit("evolve", man);
  std::cout << "classification " << classify_trajectory(rec)
            << (rec.terminal.empty() ? "" : " (terminal " + rec.terminal + ")")
            << " after " << rec.samples.back().t << "\n";
  return 0;
}

int run_construct_wpm(Session& s) {
  Lab lab(s);
  const auto sys = assemble_linearized(lab.gs, lab.K4);
  const auto pair = compute_eigenpair(sys);
  const int sign = int(s.cfg.get_int("wpm.sign", 1));
  const int order = int(s.cfg.get_int("wpm.order", 3));
  const double t0 =
      s.cfg.get_double("wpm.t0", s.cfg.get_double("wpm.t0_factor", 2.0) / pair.e0);
  const double tol = s.cfg.get_double("wpm.defect_tol", 0.05);
  const RadialField w = wpm_initial_data(sign, t0, order, sys, pair, lab.K4, tol);
  const ExpansionSeries series = build_expansion(sign, order, sys, pair, lab.K4);
  RunManifest man;
  ScalarReport rep;
  rep.config_hash = fnv1a64_hex(s.cfg.serialize());
  rep.add("sign", sign);
  rep.add("order", order);
  rep.add("t0", t0);
  rep.add("e0", pair.e0);
  rep.add("defect", expansion_defect(series, t0));
  rep.add("grad_gap", lab.ops.h1_norm_sq(w) - lab.gs.grad_norm_sq);
  rep.add("energy_rel_dev",
          std::abs(energy(lab.ops, lab.K4, w) - lab.gs.energy_value) /
              lab.gs.energy_value);
  s.emit_text("wpm.csv", rep.to_csv(), man);
  s.emit_field("wpm.field", w, man);
  s.emit("construct-wpm", man);
  std::cout << "defect " << rep.get("defect") << " grad gap " << rep.get("grad_gap")
            << "\n";
  return 0;
}

int run_virial(Session& s) {
  Lab lab(s);
  const std::string in = s.cfg.get_string("virial.input", "");
  const RadialField u =
      in.empty() ? lab.gs.W : RadialField(lab.grid, read_field(in).values());
  const std::vector<double> radii =
      s.cfg.get_double_list("virial.radii", {5.0, 10.0, 20.0});
  std::ostringstream csv;
  csv << "R,V,dtV,d2tV,A_R\n";
  csv.precision(17);
  for (double R : radii) {
    const VirialReport vr = virial_report(build_virial_profile(lab.grid, R), u,
                                          lab.ops, lab.K4);
    csv << R << "," << vr.V << "," << vr.dtV << "," << vr.d2tV << "," << vr.A_R
        << "\n";
    std::cout << "R " << R << " V " << vr.V << " dtV " << vr.dtV << " d2tV "
              << vr.d2tV << " A_R " << vr.A_R << "\n";
  }
  RunManifest man;
  s.emit_text("virial.csv", csv.str(), man);
  s.emit("virial", man);
  return 0;
}

int run_kelvin_check(Session& s) {
  s.cfg.set("grid.r_min", s.cfg.get_string("grid.r_min", "1e-4"));
  s.cfg.set("grid.r_max", s.cfg.get_string("grid.r_max", "1e4"));
  Lab lab(s);
  const RadialField f = RadialField::sample(
      lab.grid, [](double r) { return std::pow(1.0 + r * r, -2.0) * (1.0 + 0.3 * r); });
  auto relmax = [](const RadialField& a, const RadialField& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      num = std::max(num, std::abs(a[i] - b[i]));
      den = std::max(den, std::abs(b[i]));
    }
    return num / den;
  };
  const auto Kd2 = assemble_kernel(lab.grid, double(lab.grid->d - 2));
  const RadialField v(
      lab.grid, lab.K4.apply(VectorXd(lab.gs.W.values().cwiseAbs2())).cast<complexd>());
  const IntegralSystemReport rep = integral_system_residual(lab.gs.W, v, lab.K4, Kd2);
  const TailReport tail = tail_asymptotics(lab.gs.W);
  RunManifest man;
  ScalarReport sr;
  sr.config_hash = fnv1a64_hex(s.cfg.serialize());
  sr.add("involution_defect", relmax(kelvin_transform(kelvin_transform(f)), f));
  sr.add("fixed_point_defect", relmax(kelvin_transform(lab.gs.W), lab.gs.W));
  sr.add("integral_residual_first", rep.residual_first);
  sr.add("integral_residual_second", rep.residual_second);
  sr.add("green_constant", rep.green_constant);
  sr.add("tail_constant", tail.omega_inf);
  sr.add("tail_constant_rel_dev", std::abs(tail.omega_inf - lab.gs.c0) / lab.gs.c0);
  s.emit_text("kelvin.csv", sr.to_csv(), man);
  s.emit("kelvin-check", man);
  std::cout << "involution " << sr.get("involution_defect") << " fixed-point "
            << sr.get("fixed_point_defect") << " tail rel "
            << sr.get("tail_constant_rel_dev") << "\n";
  return 0;
}

int run_acceptance_cmd(Session& s) {
  std::ostringstream log;
  struct Tee : std::streambuf {
    std::streambuf *a, *b;
    int overflow(int c) override {
      if (c != EOF) {
        a->sputc(char(c));
        b->sputc(char(c));
      }
      return c;
    }
  } tee;
  tee.a = std::cout.rdbuf();
  tee.b = log.rdbuf();
  std::ostream both(&tee);
  const AcceptanceOutcome outcome = run_acceptance(both, s.seed ? s.seed : 20260826ull);
  RunManifest man;
  s.emit_text("acceptance.txt", log.str(), man);
  s.emit("acceptance", man);
  return outcome.all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"radial focusing Hartree laboratory"};
  app.require_subcommand(1);
  Session s;
  app.add_option("--config", s.config_path, "key = value configuration file");
  app.add_option("--out", s.out_dir, "output directory");
  app.add_option("--seed", s.seed, "random seed");
  app.add_option("--threads", s.threads, "linear-algebra thread count");

  const std::vector<std::tuple<std::string, int (*)(Session&), std::string>>
      dispatch = {
          {"ground-state", run_ground_state,
           "calibrate the ground state and write its profile"},
          {"spectrum", run_spectrum,
           "unstable eigenvalue, eigenfunctions, coercivity"},
          {"modulate", run_modulate,
           "fit scaling/phase parameters to a stored state"},
          {"evolve", run_evolve, "propagate initial data and record diagnostics"},
          {"construct-wpm", run_construct_wpm,
           "build threshold initial data from the exponential series"},
          {"virial", run_virial, "localized virial functionals of a state"},
          {"kelvin-check", run_kelvin_check,
           "inversion symmetry and integral-system residuals"},
          {"acceptance", run_acceptance_cmd, "run the full acceptance suite"}};
  for (const auto& [name, fn, blurb] : dispatch) app.add_subcommand(name, blurb);

  CLI11_PARSE(app, argc, argv);
  try {
    s.finish_setup();
    for (const auto& [name, fn, blurb] : dispatch)
      if (app.got_subcommand(name)) return fn(s);
  } catch (const error& e) {
    std::cerr << "error [" << e.code() << "] " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error " << e.what() << "\n";
    return 2;
  }
  return 2;
}
