#include "drmpc/config.hpp"
#include "drmpc/experiments.hpp"

#include <gtest/gtest.h>

#include <random>
#include <sstream>

using namespace drmpc;
using namespace drmpc::experiments;

namespace {

std::string rows_csv(const ResultTable& t) {
  std::ostringstream os;
  write_rows_csv(os, t);
  write_summary_csv(os, t);
  write_trajectories_csv(os, t);
  return os.str();
}

ExperimentSpec small_spec(ExperimentKind kind) {
  ExperimentSpec s;
  s.kind = kind;
  s.repetitions = 2;
  s.rollouts = 20;
  s.master_seed = 42;
  s.radius_grid = {0.0, 0.05};
  s.delta_grid = {0.0, 1e4};
  s.tau_grid = {0, 4};
  return s;
}

}  // namespace

TEST(Spearman, TieFreeMatchesRankDifferenceFormula) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  for (int k = 0; k < 50; ++k) {
    const int n = 3 + k % 10;
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = nd(rng);
      y[i] = nd(rng);
    }
    double d2 = 0.0;
    for (int i = 0; i < n; ++i) {
      int rx = 1, ry = 1;
      for (int j = 0; j < n; ++j) {
        rx += x[j] < x[i];
        ry += y[j] < y[i];
      }
      d2 += (rx - ry) * (rx - ry);
    }
    EXPECT_NEAR(spearman(x, y), 1.0 - 6.0 * d2 / (n * (n * n - 1.0)), 1e-12);
  }
}

TEST(Spearman, TiesUseAverageRanks) {
  EXPECT_NEAR(spearman({1, 2, 2, 3}, {1, 3, 2, 4}), 4.5 / std::sqrt(22.5), 1e-12);
  EXPECT_TRUE(std::isnan(spearman({1, 1, 1}, {1, 2, 3})));
}

TEST(ClosedLoop, ZeroNoiseRolloutsAreIdentical) {
  platoon::PlatoonScenario s;
  s.noise_variance = 0.0;
  s.radius = 0.0;
  std::mt19937_64 rng(2);
  const auto p = platoon::build_scenario(s, platoon::sample_residuals(s, 5), platoon::initial_state_with_failure(s, rng));
  const auto sol = solve_drmpc(p);
  ASSERT_TRUE(sol.optimal());
  const auto st = run_closed_loop(platoon::make_system(s), p, sol, NoiseModel{0.0, 0}, 5, rng, true);
  for (const auto& y : st.trajectories) EXPECT_EQ(y, st.trajectories[0]);
  const Vector z = sol.z_star->flat();
  EXPECT_NEAR(st.mean_cost, evaluate(p.cost, p.compact.A_bar * z, z), 1e-12);
  // zero noise and r = 0: the estimate is the deterministic cost itself
  EXPECT_NEAR(st.mean_cost, sol.J_tilde, 1e-6);
}

TEST(ClosedLoop, TargetSpacingNeedsNoInput) {
  platoon::PlatoonScenario s;
  s.noise_variance = 0.0;
  s.radius = 0.0;
  Vector x0(s.n);
  for (int i = 0; i < s.n; ++i) x0[i] = i * s.d;
  const auto p = platoon::build_scenario(s, platoon::sample_residuals(s, 6), x0);
  const auto sol = solve_drmpc(p);
  ASSERT_TRUE(sol.optimal());
  EXPECT_NEAR(sol.J_tilde, 0.0, 1e-7);
  std::mt19937_64 rng(3);
  EXPECT_NEAR(run_closed_loop(platoon::make_system(s), p, sol, NoiseModel{0.0, 0}, 1, rng).mean_cost, 0.0, 1e-6);
}

TEST(ClosedLoop, RecedingHorizonZeroNoiseMatchesOpenLoop) {
  platoon::PlatoonScenario s;
  s.noise_variance = 0.0;
  s.radius = 0.0;
  s.tau = 1;
  std::mt19937_64 rng(4);
  const auto p = platoon::build_scenario(s, platoon::sample_residuals(s, 7), platoon::initial_state_with_failure(s, rng));
  const auto sol = solve_drmpc(p);
  ASSERT_TRUE(sol.optimal());
  const auto sys = platoon::make_system(s);
  const auto open = run_closed_loop(sys, p, sol, NoiseModel{0.0, 0}, 1, rng);
  const auto rh = run_receding_horizon(sys, p, sol, NoiseModel{0.0, 0}, 1, rng, lp::AutoSolver(), true);
  EXPECT_EQ(rh.resolve_failures, 0);
  // without noise re-planning cannot beat the optimal open-loop plan
  EXPECT_GE(rh.mean_cost, open.mean_cost - 1e-6);
  EXPECT_EQ(rh.trajectories.size(), 1u);
}

TEST(Experiment, SinglePointSingleRolloutWellFormed) {
  auto spec = small_spec(ExperimentKind::ViolationVsRadius);
  spec.radius_grid = {0.02};
  spec.repetitions = 1;
  spec.rollouts = 1;
  const auto t = run_experiment(spec, platoon::PlatoonScenario{});
  ASSERT_EQ(t.rows.size(), 1u);
  const auto sum = t.summary();
  ASSERT_EQ(sum.size(), 1u);
  if (t.rows[0].feasible) EXPECT_TRUE(sum[0].violation_rate == 0.0 || sum[0].violation_rate == 1.0);
}

TEST(Experiment, InfeasiblePointsAreRecorded) {
  auto spec = small_spec(ExperimentKind::CostVsDelta);
  platoon::PlatoonScenario base;
  base.tau = 2;
  const auto t = run_experiment(spec, base);
  ASSERT_EQ(t.rows.size(), 4u);
  EXPECT_FALSE(t.rows[2].feasible);
  EXPECT_FALSE(t.rows[3].feasible);
  EXPECT_EQ(t.rows[2].status, "infeasible");
  EXPECT_FALSE(t.rows[2].infeasible_block.empty());
  ASSERT_TRUE(t.first_all_infeasible_delta(2).has_value());
  EXPECT_EQ(*t.first_all_infeasible_delta(2), 1e4);
}

TEST(Experiment, DeterministicAndThreadIndependent) {
  for (auto kind : {ExperimentKind::Trajectories, ExperimentKind::CostVsTau}) {
    auto spec = small_spec(kind);
    const auto a = rows_csv(run_experiment(spec, platoon::PlatoonScenario{}));
    const auto b = rows_csv(run_experiment(spec, platoon::PlatoonScenario{}));
    spec.threads = 3;
    const auto c = rows_csv(run_experiment(spec, platoon::PlatoonScenario{}));
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, c);
    spec.master_seed = 43;
    EXPECT_NE(a, rows_csv(run_experiment(spec, platoon::PlatoonScenario{})));
  }
}

TEST(Experiment, TauGridEndpointHasNoFreeInputs) {
  auto spec = small_spec(ExperimentKind::CostVsTau);
  spec.tau_grid = {4};
  spec.repetitions = 1;
  platoon::PlatoonScenario base;
  const auto inst = solve_instance(base, {base.radius, base.delta, 4}, 0, 42, lp::AutoSolver());
  EXPECT_EQ(inst.problem.partition().u_e_size(), 0);
}

TEST(Experiment, TrajectoriesShape) {
  auto spec = small_spec(ExperimentKind::Trajectories);
  const auto t = run_experiment(spec, platoon::PlatoonScenario{});
  std::size_t feasible = 0;
  for (const auto& r : t.rows) feasible += r.feasible;
  EXPECT_EQ(t.trajectories.size(), feasible * 6 * 6);
}

TEST(Conservatism, LemmaRadiusBoundsActualCost) {
  // Soft statistical check: with the concentration radius the estimate J~
  // upper-bounds the realized mean cost in at least epsilon - 0.1 of the
  // repetitions. Safety blocks are dropped: the bound concerns the cost and
  // the nominal constraints are infeasible at this radius.
  platoon::PlatoonScenario s;
  const AmbiguityConfig amb;
  s.radius = radius(amb, s.N, s.n * s.T);
  const int R = 20;
  int ok = 0;
  for (int rep = 0; rep < R; ++rep) {
    auto inst = solve_instance(s, {s.radius, s.delta, s.tau}, rep, 99, lp::AutoSolver());
    auto p = inst.problem;
    p.g.reset();
    p.h.clear();
    const auto sol = solve_drmpc(p);
    ASSERT_TRUE(sol.optimal());
    auto rng = make_stream(99, StreamKind::Rollout, static_cast<std::uint64_t>(rep));
    const auto st = run_closed_loop(platoon::make_system(s), p, sol, NoiseModel{s.noise_variance, 0}, 1000, rng);
    ok += st.mean_cost <= sol.J_tilde;
  }
  EXPECT_GE(static_cast<double>(ok) / R, amb.epsilon - 0.1);
}

TEST(Config, OverridesAndRoundTrip) {
  config::Json j = config::Json::object();
  config::apply_override(j, "platoon.tau=2");
  config::apply_override(j, "experiment.kind=cost_vs_tau");
  config::apply_override(j, "experiment.delta_grid=[0,1]");
  config::apply_override(j, "ambiguity.radius=null");
  config::apply_override(j, "seed=5");
  const auto c = config::from_json(j);
  EXPECT_EQ(c.scenario.tau, 2);
  EXPECT_EQ(c.experiment.kind, ExperimentKind::CostVsTau);
  EXPECT_EQ(c.experiment.delta_grid, (std::vector<double>{0, 1}));
  EXPECT_FALSE(c.ambiguity.direct_radius.has_value());
  EXPECT_EQ(c.experiment.master_seed, 5u);
  const auto back = config::from_json(config::to_json(c));
  EXPECT_EQ(config::to_json(back), config::to_json(c));
  EXPECT_THROW(config::apply_override(j, "novalue"), DomainError);
  config::apply_override(j, "platoon.typo=1");
  EXPECT_THROW(config::from_json(j), DomainError);
}

TEST(Config, DefaultRadiusIsDirect) {
  const auto c = config::from_json(config::Json::object());
  EXPECT_DOUBLE_EQ(c.resolved_radius(), 0.02);
  EXPECT_FALSE(c.seed.has_value());
}

TEST(Config, SolutionRecordRoundTrip) {
  platoon::PlatoonScenario s;
  const auto inst = solve_instance(s, {s.radius, s.delta, s.tau}, 0, 8, lp::AutoSolver());
  ASSERT_TRUE(inst.solution.optimal());
  const auto rec = config::Json::parse(config::solution_record(inst.solution).dump());
  const auto back = config::read_solution_record(rec, inst.problem);
  EXPECT_EQ(back.J_tilde, inst.solution.J_tilde);
  EXPECT_EQ(back.z_star->flat(), inst.solution.z_star->flat());
  EXPECT_EQ(back.blocks.size(), inst.solution.blocks.size());
}
