#include "drmpc/platoon.hpp"

#include <gtest/gtest.h>

#include <chrono>

using namespace drmpc;
using namespace drmpc::platoon;

namespace {

Vector target_state(const PlatoonScenario& s, double shift = 0.0) {
  Vector x(s.n);
  for (int i = 0; i < s.n; ++i) x[i] = shift + s.d * i;
  return x;
}

}  // namespace

TEST(PairSelector, TwoVehiclesTwoSteps) {
  const Matrix C = pair_selector(2, 2, 1);
  const Matrix expect = (Matrix(2, 4) << -1, 1, 0, 0, 0, 0, -1, 1).finished();
  EXPECT_EQ(C, expect);
  EXPECT_THROW(pair_selector(2, 2, 2), DomainError);
}

TEST(PairSelector, RowsHaveOnePlusOneMinus) {
  for (int i = 1; i <= 5; ++i) {
    const Matrix C = pair_selector(6, 5, i);
    for (Index t = 0; t < C.rows(); ++t) {
      EXPECT_EQ((C.row(t).array() == 1.0).count(), 1);
      EXPECT_EQ((C.row(t).array() == -1.0).count(), 1);
      EXPECT_EQ(C.row(t).sum(), 0.0);
    }
  }
}

TEST(BuildScenario, TargetStateHasZeroCost) {
  PlatoonScenario s;
  const auto cf = build_compact(make_system(s));
  // zero inputs keep the target spacing; y stacks x_1..x_T = x0
  Vector y(s.n * s.T);
  for (int t = 0; t < s.T; ++t) y.segment(t * s.n, s.n) = target_state(s);
  const Vector z = Vector::Zero(cf.partition.size());
  EXPECT_EQ(evaluate(spacing_cost(s, cf.partition), y, z), 0.0);
  for (const auto& h : pair_constraints(s, cf.partition)) EXPECT_EQ(evaluate(h, y, z), -s.d);
  EXPECT_DOUBLE_EQ(evaluate(total_spacing_constraint(s, cf.partition), y, z), -25.0 + s.gamma1);
}

TEST(BuildScenario, CostInvariantUnderTranslation) {
  PlatoonScenario s;
  s.tau = 1;
  const auto cf = build_compact(make_system(s));
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  const auto f = spacing_cost(s, cf.partition);
  for (int k = 0; k < 20; ++k) {
    const Vector y = Vector::NullaryExpr(s.n * s.T, [&] { return nd(rng); });
    const Vector z = Vector::NullaryExpr(cf.partition.size(), [&] { return nd(rng); });
    EXPECT_NEAR(evaluate(f, y, z), evaluate(f, (y.array() + 3.7).matrix(), z), 1e-12);
  }
}

TEST(BuildScenario, GMonotoneInSpacingScale) {
  PlatoonScenario s;
  const auto cf = build_compact(make_system(s));
  const auto g = total_spacing_constraint(s, cf.partition);
  const Vector z = Vector::Zero(cf.partition.size());
  double prev = kInf;
  for (double scale : {0.5, 1.0, 1.5, 2.0}) {
    Vector y(s.n * s.T);
    for (int t = 0; t < s.T; ++t) y.segment(t * s.n, s.n) = scale * target_state(s);
    const double v = evaluate(g, y, z);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(BuildScenario, HMatchesPropagatedSpacing) {
  PlatoonScenario s;
  s.tau = 2;
  s.j = 3;
  std::mt19937_64 rng(2);
  const auto sys = make_system(s);
  const auto cf = build_compact(sys);
  std::normal_distribution<double> nd;
  const DecisionVector z(cf.partition, Vector::NullaryExpr(cf.partition.size(), [&] { return nd(rng); }));
  const Vector w = Vector::NullaryExpr(s.n * s.T, [&] { return nd(rng); });
  const auto truth = propagate_truth(sys, z, w);
  const auto h = pair_constraints(s, cf.partition);
  for (int t = 1; t <= s.T; ++t) {
    const Vector x = truth.state(t);
    EXPECT_EQ(evaluate(h[static_cast<std::size_t>(t - 1)], truth.y, z.flat()), -(x[s.j] - x[s.j - 1]));
  }
}

TEST(BuildScenario, Validation) {
  PlatoonScenario s;
  s.j = 6;
  EXPECT_THROW(build_scenario(s, sample_residuals(PlatoonScenario{}, 1), Vector::Zero(6)), DomainError);
  s.j = 0;
  EXPECT_THROW(s.validate(), DomainError);
}

TEST(InitialState, MonitoredSpacing) {
  PlatoonScenario s;
  std::mt19937_64 rng(3);
  for (double delta : {0.0, 0.75, 1e6}) {
    s.delta = delta;
    const Vector x = initial_state_with_failure(s, rng);
    const double h0 = x[s.j - 1] - x[s.j];
    EXPECT_NEAR(h0, -s.d / (delta + s.c), 1e-15);
    EXPECT_NEAR(severity(SystemicFamily(s.family()), h0).delta, delta, 1e-9 * (1.0 + delta));
    for (int i = 1; i < s.n; ++i)
      if (i != s.j) {
        EXPECT_GE(x[i] - x[i - 1], s.spacing_lo);
        EXPECT_LE(x[i] - x[i - 1], s.spacing_hi);
      }
  }
}

TEST(SolveNominal, SizesAndFeasibility) {
  PlatoonScenario s;
  std::mt19937_64 rng(4);
  const auto p = build_scenario(s, sample_residuals(s, 11), initial_state_with_failure(s, rng));
  const auto a = assemble_lp(p);
  const Index K = (s.n - 1) * s.T + (s.T - 1 - s.tau) * s.n;
  EXPECT_EQ(a.u_count, (s.T - 1 - s.tau) * s.n);
  EXPECT_EQ(a.blocks.size(), static_cast<std::size_t>(s.T + 1));
  // u_e + nu + K*N one-norm auxiliaries + per block (s, q_1..q_N)
  EXPECT_EQ(a.lp.num_vars(), a.u_count + s.N + K * s.N + (s.T + 1) * (1 + s.N));
  EXPECT_DOUBLE_EQ(a.lambda, 2.0);

  const auto t0 = std::chrono::steady_clock::now();
  const auto sol = solve_drmpc(p);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ASSERT_TRUE(sol.optimal()) << sol.message;
  EXPECT_GT(sol.J_tilde, 0.0);
  EXPECT_LT(secs, 30.0);
  std::cout << "nominal solve " << secs << " s, J~=" << sol.J_tilde << " vars=" << sol.lp_vars
            << " rows=" << sol.lp_rows << "\n";
}

TEST(SolveNominal, HugeSeverityIsInfeasible) {
  PlatoonScenario s;
  s.tau = 2;
  s.delta = 1e4;
  std::mt19937_64 rng(5);
  const auto p = build_scenario(s, sample_residuals(s, 12), initial_state_with_failure(s, rng));
  const auto sol = solve_drmpc(p);
  EXPECT_EQ(sol.status, lp::LpStatus::Infeasible);
  EXPECT_EQ(sol.infeasible_block.rfind('h', 0), 0u);
  EXPECT_GE(sol.infeasible_step, 1);
  EXPECT_LE(sol.infeasible_step, s.T);
}
