// drmpc command line: sample residuals, solve one instance, simulate it in
// closed loop, or run a batch experiment.

#include "drmpc/config.hpp"
#include "drmpc/lp/lp_format.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace drmpc;
namespace cfg = drmpc::config;

namespace {

struct Common {
  std::optional<std::string> config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config_path, "JSON config file");
  app->add_option("--set", c.overrides, "override a config value, e.g. platoon.tau=2")->take_all();
  app->add_option("--seed", c.seed, "master seed");
}

cfg::RunConfig load(const Common& c) {
  auto rc = cfg::load(c.config_path, c.overrides);
  if (c.seed) {
    rc.seed = c.seed;
    rc.experiment.master_seed = *c.seed;
  }
  return rc;
}

void write_json(const std::string& path, const cfg::Json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DomainError("cannot write '" + path + "'");
  f << j.dump(2) << '\n';
}

// Repetition 0 of the configured scenario, optionally with residuals from a file.
experiments::Instance build_instance(const cfg::RunConfig& rc, const std::string& residual_file,
                                     const lp::LpSolver& solver) {
  const auto s = rc.resolved_scenario();
  const std::uint64_t seed = rc.seed.value_or(0);
  if (residual_file.empty()) return experiments::solve_instance(s, {s.radius, s.delta, s.tau}, 0, seed, solver);
  auto x_rng = make_stream(seed, StreamKind::InitialState, 0);
  auto p = platoon::build_scenario(s, load_residuals(residual_file), platoon::initial_state_with_failure(s, x_rng));
  auto sol = solve_drmpc(p, solver);
  return {s, std::move(p), std::move(sol)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributionally robust MPC for delayed platoons"};
  app.require_subcommand(1);

  Common c_sample, c_solve, c_sim, c_exp;

  auto* sample = app.add_subcommand("sample", "identification runs to a residual file");
  add_common(sample, c_sample);
  std::string sample_out = "residuals.txt";
  sample->add_option("-o,--out", sample_out, "residual file");

  auto* solve = app.add_subcommand("solve", "solve one DRMPC instance");
  add_common(solve, c_solve);
  std::string solve_res, solve_out, export_lp;
  solve->add_option("--residuals", solve_res, "residual file (sampled from the seed when omitted)");
  solve->add_option("-o,--out", solve_out, "solution record (JSON); stdout when omitted");
  solve->add_option("--export-lp", export_lp, "write the assembled LP in CPLEX LP format");

  auto* sim = app.add_subcommand("simulate", "closed-loop rollouts of one instance");
  add_common(sim, c_sim);
  std::string sim_res, sim_sol, sim_out;
  int sim_M = 1000;
  bool sim_receding = false;
  sim->add_option("--residuals", sim_res, "residual file");
  sim->add_option("--solution", sim_sol, "solution record to apply instead of re-solving");
  sim->add_option("-M,--rollouts", sim_M, "number of rollouts")->check(CLI::PositiveNumber);
  sim->add_flag("--receding-horizon", sim_receding, "re-solve every step (extension, not the open-loop study)");
  sim->add_option("-o,--out", sim_out, "statistics (JSON); stdout when omitted");

  auto* exp = app.add_subcommand("experiment", "batch experiment to CSV");
  add_common(exp, c_exp);
  std::string kind;
  std::string exp_out;
  std::optional<int> threads;
  std::optional<int> reps;
  std::optional<int> rollouts;
  bool exp_receding = false;
  exp->add_option("kind", kind, "trajectories | violation_vs_radius | cost_vs_delta | cost_vs_tau | delta_tau_grid")
      ->required();
  exp->add_option("-o,--out", exp_out, "result CSV (summary and JSON sidecar written next to it)");
  exp->add_option("-j,--threads", threads, "worker threads");
  exp->add_option("-R,--repetitions", reps, "repetitions per grid point");
  exp->add_option("-M,--rollouts", rollouts, "rollouts per repetition");
  exp->add_flag("--receding-horizon", exp_receding, "re-solve every step (extension)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sample) {
      const auto rc = load(c_sample);
      const auto s = rc.resolved_scenario();
      const std::uint64_t seed = derive_seed(rc.seed.value_or(0), StreamKind::Identification, 0);
      save_residuals(sample_out, platoon::sample_residuals(s, seed));
      std::cerr << "wrote " << s.N << " residuals to " << sample_out << "\n";
    } else if (*solve) {
      const auto rc = load(c_solve);
      const auto solver = cfg::make_solver(rc.solver);
      const auto inst = build_instance(rc, solve_res, *solver);
      if (!export_lp.empty()) {
        std::ofstream f(export_lp);
        if (!f) throw DomainError("cannot write '" + export_lp + "'");
        lp::write_lp_format(f, assemble_lp(inst.problem).lp);
      }
      write_json(solve_out, cfg::solution_record(inst.solution));
      return inst.solution.optimal() ? 0 : 2;
    } else if (*sim) {
      const auto rc = load(c_sim);
      const auto solver = cfg::make_solver(rc.solver);
      auto inst = build_instance(rc, sim_res, *solver);
      if (!sim_sol.empty()) inst.solution = cfg::read_solution_record(cfg::read_json_file(sim_sol), inst.problem);
      if (!inst.solution.optimal()) {
        write_json(sim_out, cfg::solution_record(inst.solution));
        return 2;
      }
      const auto sys = platoon::make_system(inst.scenario);
      const NoiseModel noise{inst.scenario.noise_variance, 0};
      auto rng = make_stream(rc.seed.value_or(0), StreamKind::Rollout, 0);
      const auto st = sim_receding
                          ? experiments::run_receding_horizon(sys, inst.problem, inst.solution, noise, sim_M, rng,
                                                              *solver)
                          : experiments::run_closed_loop(sys, inst.problem, inst.solution, noise, sim_M, rng);
      cfg::Json j = {{"rollouts", st.rollouts},
                     {"J", st.mean_cost},
                     {"J_tilde", inst.solution.J_tilde},
                     {"cost_exceeds_estimate", st.report.cost_exceeds_estimate},
                     {"any_violation", st.report.any_violation},
                     {"g_violated", st.report.g_violated},
                     {"h_violated", st.report.h_violated},
                     {"receding_horizon", sim_receding},
                     {"resolve_failures", st.resolve_failures}};
      j["avar_g"] = st.report.avar_g ? cfg::Json(*st.report.avar_g) : cfg::Json(nullptr);
      cfg::Json av = cfg::Json::array();
      for (double v : st.report.avar_h) av.push_back(std::isnan(v) ? cfg::Json(nullptr) : cfg::Json(v));
      j["avar_h"] = av;
      j["h_thresholds"] = st.report.thresholds;
      write_json(sim_out, j);
    } else if (*exp) {
      auto rc = load(c_exp);
      if (!rc.seed) throw DomainError("experiment needs a master seed (--seed or config 'seed')");
      rc.experiment.kind = experiments::experiment_kind_from_string(kind);
      if (threads) rc.experiment.threads = *threads;
      if (reps) rc.experiment.repetitions = *reps;
      if (rollouts) rc.experiment.rollouts = *rollouts;
      if (exp_receding) rc.experiment.receding_horizon = true;
      if (!exp_out.empty()) rc.experiment.output = exp_out;
      if (rc.experiment.output.empty()) rc.experiment.output = kind + ".csv";
      const auto solver = cfg::make_solver(rc.solver);
      const auto table = experiments::run_experiment(rc.experiment, rc.resolved_scenario(), *solver);
      cfg::write_outputs(table, rc, rc.experiment.output);
      experiments::write_summary_csv(std::cout, table);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
