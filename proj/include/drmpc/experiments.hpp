#pragma once

// Closed-loop Monte Carlo evaluation of platoon DRMPC solutions and the batch
// sweeps behind the radius / severity / delay studies.
//
// Random streams are keyed by repetition index only, so every grid point of a
// sweep sees the same residual sample, initial state and rollout noise for a
// given repetition.

#include "drmpc/drmpc.hpp"
#include "drmpc/lp/auto.hpp"
#include "drmpc/platoon.hpp"
#include "drmpc/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

namespace drmpc::experiments {

enum class ExperimentKind { Trajectories, ViolationVsRadius, CostVsDelta, CostVsTau, DeltaTauGrid };

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Trajectories: return "trajectories";
    case ExperimentKind::ViolationVsRadius: return "violation_vs_radius";
    case ExperimentKind::CostVsDelta: return "cost_vs_delta";
    case ExperimentKind::CostVsTau: return "cost_vs_tau";
    case ExperimentKind::DeltaTauGrid: return "delta_tau_grid";
  }
  return "unknown";
}

inline ExperimentKind experiment_kind_from_string(const std::string& s) {
  for (auto k : {ExperimentKind::Trajectories, ExperimentKind::ViolationVsRadius, ExperimentKind::CostVsDelta,
                 ExperimentKind::CostVsTau, ExperimentKind::DeltaTauGrid})
    if (s == to_string(k)) return k;
  throw DomainError("unknown experiment kind '" + s + "'");
}

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::ViolationVsRadius;
  std::vector<double> radius_grid{0.0, 0.01, 0.02, 0.05, 0.1, 0.2};
  std::vector<double> delta_grid{0.0, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0, 1000.0, 10000.0};
  std::vector<int> tau_grid{0, 1, 2, 3, 4};
  int repetitions = 20;
  int rollouts = 1000;
  std::uint64_t master_seed = 0;
  std::string output;
  bool receding_horizon = false;  // extension: re-solve every step
  int threads = 1;

  void validate(const platoon::PlatoonScenario& s) const {
    detail::require(repetitions >= 1, "repetitions must be >= 1");
    detail::require(rollouts >= 1, "rollouts must be >= 1");
    detail::require(threads >= 1, "threads must be >= 1");
    auto nonempty = [](bool ok, const char* what) {
      detail::require(ok, std::string(what) + " grid must be nonempty");
    };
    switch (kind) {
      case ExperimentKind::ViolationVsRadius: nonempty(!radius_grid.empty(), "radius"); break;
      case ExperimentKind::CostVsDelta: nonempty(!delta_grid.empty(), "delta"); break;
      case ExperimentKind::CostVsTau: nonempty(!tau_grid.empty(), "tau"); break;
      case ExperimentKind::DeltaTauGrid:
        nonempty(!delta_grid.empty(), "delta");
        nonempty(!tau_grid.empty(), "tau");
        break;
      case ExperimentKind::Trajectories: break;
    }
    for (double r : radius_grid) detail::require(r >= 0.0, "radius grid entries must be >= 0");
    for (double d : delta_grid) detail::require(d >= 0.0, "delta grid entries must be >= 0");
    for (int t : tau_grid) detail::require(t >= 0 && t <= s.T - 1, "tau grid entries must lie in 0..T-1");
  }
};

// ---------------------------------------------------------------------------
// Rollouts

struct RolloutStats {
  Index rollouts = 0;
  double mean_cost = 0.0;  // actual cost J
  ConditionReport report;
  std::vector<Vector> trajectories;  // y per rollout, kept when requested
  int resolve_failures = 0;          // receding horizon only
};

/// Open loop: apply z* for the whole horizon in M truth rollouts.
inline RolloutStats run_closed_loop(const DelayedLtiSystem& sys, const DrmpcProblem& p, const DrmpcSolution& sol,
                                    const NoiseModel& noise, int M, std::mt19937_64& rng, bool keep = false) {
  detail::require(sol.optimal() && sol.z_star.has_value(), "rollouts need an optimal solution");
  detail::require(M >= 1, "need at least one rollout");
  const Index nw = sys.state_dim() * sys.horizon();
  std::vector<Vector> ys;
  ys.reserve(static_cast<std::size_t>(M));
  for (int k = 0; k < M; ++k) ys.push_back(propagate_truth(sys, *sol.z_star, noise.draw(nw, rng)).y);
  RolloutStats st;
  st.rollouts = M;
  st.report = check_solution_conditions(p, sol, ys);
  st.mean_cost = st.report.mean_cost;
  if (keep) st.trajectories = std::move(ys);
  return st;
}

/// Receding horizon (not part of the open-loop study): at each step re-solve
/// from the measured state with the committed inputs as u_init and apply the
/// first free input. Steps whose re-solve fails apply a zero input.
inline RolloutStats run_receding_horizon(const DelayedLtiSystem& sys, const DrmpcProblem& p,
                                         const DrmpcSolution& first, const NoiseModel& noise, int M,
                                         std::mt19937_64& rng, const lp::LpSolver& solver, bool keep = false) {
  detail::require(first.optimal() && first.z_star.has_value(), "rollouts need an optimal solution");
  const Index n = sys.state_dim();
  const Index m = sys.input_dim();
  const int T = sys.horizon();
  const int tau = sys.delay();
  const auto& part = p.partition();
  RolloutStats st;
  st.rollouts = M;
  std::vector<Vector> ys;
  std::vector<Vector> zs;
  for (int k = 0; k < M; ++k) {
    const Vector w = noise.draw(n * T, rng);
    // inputs[i] is u_{i - tau}
    std::vector<Vector> inputs;
    for (Index i = 0; i < part.u_init_count(); ++i) inputs.emplace_back(p.u_init[static_cast<std::size_t>(i)]);
    Vector x = p.x0;
    Vector y(n * T);
    DrmpcSolution cur = first;
    for (int t = 0; t < T; ++t) {
      if (t > 0) {
        DrmpcProblem q = p;
        q.x0 = x;
        q.u_init.assign(inputs.end() - (tau + 1), inputs.end());
        cur = solve_drmpc(q, solver);
        if (!cur.optimal()) ++st.resolve_failures;
      }
      if (static_cast<int>(inputs.size()) < T) {
        Vector next = Vector::Zero(m);
        if (cur.optimal() && cur.z_star->partition().u_e_size() > 0) next = cur.z_star->u_e().head(m);
        inputs.push_back(next);
      }
      x = sys.A() * x + sys.B() * inputs[static_cast<std::size_t>(t)] + w.segment(t * n, n);
      y.segment(t * n, n) = x;
    }
    Vector z(part.size());
    z.head(n) = p.x0;
    for (int i = 0; i < T; ++i) z.segment(n + i * m, m) = inputs[static_cast<std::size_t>(i)];
    ys.push_back(y);
    zs.push_back(z);
  }
  // Costs use each rollout's realized inputs; risk thresholds come from the first solve.
  for (std::size_t k = 0; k < ys.size(); ++k) st.mean_cost += evaluate(p.cost, ys[k], zs[k]);
  st.mean_cost /= static_cast<double>(M);
  st.report = check_solution_conditions(p, first, ys);
  st.report.mean_cost = st.mean_cost;
  st.report.cost_exceeds_estimate = st.mean_cost > first.J_tilde;
  if (keep) st.trajectories = std::move(ys);
  return st;
}

// ---------------------------------------------------------------------------
// Result tables

struct ResultRow {
  double r = 0.0;
  double delta = 0.0;
  int tau = 0;
  int rep = 0;
  std::uint64_t seed = 0;
  std::string status;
  bool feasible = false;
  double J_tilde = std::nan("");
  double J = std::nan("");
  double avar_g = std::nan("");
  bool g_violated = false;
  int h_violations = 0;
  bool violation = false;
  bool conservative = false;  // J <= J_tilde
  std::string infeasible_block;
  int infeasible_step = -1;
  int resolve_failures = 0;
};

struct SummaryRow {
  double r = 0.0;
  double delta = 0.0;
  int tau = 0;
  int repetitions = 0;
  int feasible = 0;
  double violation_rate = std::nan("");  // among feasible repetitions
  double mean_J = std::nan("");
  double mean_J_tilde = std::nan("");
  double conservative_fraction = std::nan("");
};

struct TrajectoryRow {
  int rep = 0;
  int t = 0;
  int vehicle = 0;  // 1-based
  double mean_position = 0.0;
  double sample_position = 0.0;  // first rollout
};

struct ResultTable {
  ExperimentKind kind = ExperimentKind::ViolationVsRadius;
  std::uint64_t master_seed = 0;
  std::vector<ResultRow> rows;  // grid-major, repetition-minor
  std::vector<TrajectoryRow> trajectories;

  std::vector<SummaryRow> summary() const {
    std::vector<SummaryRow> out;
    for (std::size_t a = 0; a < rows.size();) {
      std::size_t b = a;
      while (b < rows.size() && rows[b].r == rows[a].r && rows[b].delta == rows[a].delta && rows[b].tau == rows[a].tau)
        ++b;
      SummaryRow s{rows[a].r, rows[a].delta, rows[a].tau, static_cast<int>(b - a)};
      double J = 0.0, Jt = 0.0;
      int viol = 0, cons = 0;
      for (std::size_t k = a; k < b; ++k) {
        if (!rows[k].feasible) continue;
        ++s.feasible;
        J += rows[k].J;
        Jt += rows[k].J_tilde;
        viol += rows[k].violation;
        cons += rows[k].conservative;
      }
      if (s.feasible > 0) {
        s.violation_rate = static_cast<double>(viol) / s.feasible;
        s.mean_J = J / s.feasible;
        s.mean_J_tilde = Jt / s.feasible;
        s.conservative_fraction = static_cast<double>(cons) / s.feasible;
      }
      out.push_back(s);
      a = b;
    }
    return out;
  }

  /// Smallest delta (in row order) at which some / every repetition is infeasible.
  std::optional<double> first_any_infeasible_delta(int tau) const { return first_infeasible(tau, false); }
  std::optional<double> first_all_infeasible_delta(int tau) const { return first_infeasible(tau, true); }

 private:
  std::optional<double> first_infeasible(int tau, bool all) const {
    for (const auto& s : summary()) {
      if (s.tau != tau) continue;
      if (all ? s.feasible == 0 : s.feasible < s.repetitions) return s.delta;
    }
    return std::nullopt;
  }
};

namespace detail {

inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace detail

inline void write_rows_csv(std::ostream& os, const ResultTable& t) {
  using detail::num;
  os << "r,delta,tau,rep,seed,status,feasible,J_tilde,J,avar_g,g_violated,h_violations,violation,conservative,"
        "infeasible_block,infeasible_step,resolve_failures\n";
  for (const auto& r : t.rows)
    os << num(r.r) << ',' << num(r.delta) << ',' << r.tau << ',' << r.rep << ',' << r.seed << ',' << r.status << ','
       << r.feasible << ',' << num(r.J_tilde) << ',' << num(r.J) << ',' << num(r.avar_g) << ',' << r.g_violated << ','
       << r.h_violations << ',' << r.violation << ',' << r.conservative << ',' << r.infeasible_block << ','
       << r.infeasible_step << ',' << r.resolve_failures << '\n';
}

inline void write_summary_csv(std::ostream& os, const ResultTable& t) {
  using detail::num;
  os << "r,delta,tau,repetitions,feasible,violation_rate,mean_J,mean_J_tilde,conservative_fraction\n";
  for (const auto& s : t.summary())
    os << num(s.r) << ',' << num(s.delta) << ',' << s.tau << ',' << s.repetitions << ',' << s.feasible << ','
       << num(s.violation_rate) << ',' << num(s.mean_J) << ',' << num(s.mean_J_tilde) << ','
       << num(s.conservative_fraction) << '\n';
}

inline void write_trajectories_csv(std::ostream& os, const ResultTable& t) {
  using detail::num;
  os << "rep,t,vehicle,mean_position,sample_position\n";
  for (const auto& r : t.trajectories)
    os << r.rep << ',' << r.t << ',' << r.vehicle << ',' << num(r.mean_position) << ',' << num(r.sample_position)
       << '\n';
}

/// Spearman rank correlation with average ranks for ties.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  drmpc::detail::require_dim(x.size() == y.size() && x.size() >= 2, "spearman needs two equal-length samples");
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t a = 0; a < idx.size();) {
      std::size_t b = a;
      while (b + 1 < idx.size() && v[idx[b + 1]] == v[idx[a]]) ++b;
      for (std::size_t k = a; k <= b; ++k) r[idx[k]] = 0.5 * static_cast<double>(a + b) + 1.0;
      a = b + 1;
    }
    return r;
  };
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / rx.size();
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / ry.size();
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nan("");
  return sxy / std::sqrt(sxx * syy);
}

// ---------------------------------------------------------------------------
// Sweeps

struct GridPoint {
  double r;
  double delta;
  int tau;
};

inline std::vector<GridPoint> grid_points(const ExperimentSpec& spec, const platoon::PlatoonScenario& base) {
  std::vector<GridPoint> g;
  switch (spec.kind) {
    case ExperimentKind::Trajectories: g.push_back({base.radius, base.delta, base.tau}); break;
    case ExperimentKind::ViolationVsRadius:
      for (double r : spec.radius_grid) g.push_back({r, base.delta, base.tau});
      break;
    case ExperimentKind::CostVsDelta:
      for (double d : spec.delta_grid) g.push_back({base.radius, d, base.tau});
      break;
    case ExperimentKind::CostVsTau:
      for (int t : spec.tau_grid) g.push_back({base.radius, base.delta, t});
      break;
    case ExperimentKind::DeltaTauGrid:
      for (int t : spec.tau_grid)
        for (double d : spec.delta_grid) g.push_back({base.radius, d, t});
      break;
  }
  return g;
}

/// Residual sample, initial state and solution of one repetition at one grid point.
struct Instance {
  platoon::PlatoonScenario scenario;
  DrmpcProblem problem;
  DrmpcSolution solution;
};

inline Instance solve_instance(const platoon::PlatoonScenario& base, const GridPoint& gp, int rep,
                               std::uint64_t master, const lp::LpSolver& solver) {
  platoon::PlatoonScenario s = base;
  s.radius = gp.r;
  s.delta = gp.delta;
  s.tau = gp.tau;
  const auto urep = static_cast<std::uint64_t>(rep);
  auto scen = platoon::sample_residuals(s, derive_seed(master, StreamKind::Identification, urep));
  auto x_rng = make_stream(master, StreamKind::InitialState, urep);
  auto p = platoon::build_scenario(s, std::move(scen), platoon::initial_state_with_failure(s, x_rng));
  auto sol = solve_drmpc(p, solver);
  return {s, std::move(p), std::move(sol)};
}

inline ResultTable run_experiment(const ExperimentSpec& spec, const platoon::PlatoonScenario& base,
                                  const lp::LpSolver& solver) {
  base.validate();
  spec.validate(base);
  const auto grid = grid_points(spec, base);
  const int R = spec.repetitions;
  const bool traj = spec.kind == ExperimentKind::Trajectories;
  ResultTable table;
  table.kind = spec.kind;
  table.master_seed = spec.master_seed;
  table.rows.resize(grid.size() * static_cast<std::size_t>(R));
  std::vector<std::vector<TrajectoryRow>> traj_rows(traj ? static_cast<std::size_t>(R) : 0);

  auto task = [&](std::size_t idx) {
    const auto& gp = grid[idx / static_cast<std::size_t>(R)];
    const int rep = static_cast<int>(idx % static_cast<std::size_t>(R));
    const auto inst = solve_instance(base, gp, rep, spec.master_seed, solver);
    ResultRow row;
    row.r = gp.r;
    row.delta = gp.delta;
    row.tau = gp.tau;
    row.rep = rep;
    row.seed = spec.master_seed;
    row.status = lp::to_string(inst.solution.status);
    row.feasible = inst.solution.optimal();
    row.infeasible_block = inst.solution.infeasible_block;
    row.infeasible_step = inst.solution.infeasible_step;
    if (row.feasible) {
      const auto sys = platoon::make_system(inst.scenario);
      const NoiseModel noise{inst.scenario.noise_variance, 0};
      auto rng = make_stream(spec.master_seed, StreamKind::Rollout, static_cast<std::uint64_t>(rep));
      const auto st = spec.receding_horizon
                          ? run_receding_horizon(sys, inst.problem, inst.solution, noise, spec.rollouts, rng, solver,
                                                 traj)
                          : run_closed_loop(sys, inst.problem, inst.solution, noise, spec.rollouts, rng, traj);
      row.J_tilde = inst.solution.J_tilde;
      row.J = st.mean_cost;
      row.avar_g = st.report.avar_g.value_or(std::nan(""));
      row.g_violated = st.report.g_violated;
      row.h_violations = static_cast<int>(std::count(st.report.h_violated.begin(), st.report.h_violated.end(), true));
      row.violation = st.report.any_violation;
      row.conservative = st.mean_cost <= inst.solution.J_tilde;
      row.resolve_failures = st.resolve_failures;
      if (traj) {
        const int n = inst.scenario.n;
        auto& out = traj_rows[static_cast<std::size_t>(rep)];
        for (int t = 0; t <= inst.scenario.T; ++t)
          for (int v = 0; v < n; ++v) {
            double mean = 0.0;
            double first = 0.0;
            for (std::size_t k = 0; k < st.trajectories.size(); ++k) {
              const double pos = t == 0 ? inst.problem.x0[v] : st.trajectories[k][(t - 1) * n + v];
              mean += pos;
              if (k == 0) first = pos;
            }
            out.push_back({rep, t, v + 1, mean / static_cast<double>(st.trajectories.size()), first});
          }
      }
    }
    table.rows[idx] = std::move(row);
  };

  const std::size_t total = table.rows.size();
  const int nt = std::max(1, std::min<int>(spec.threads, static_cast<int>(total)));
  if (nt == 1) {
    for (std::size_t i = 0; i < total; ++i) task(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < nt; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < total; i = next++) task(i);
      });
    for (auto& th : pool) th.join();
  }
  for (auto& tr : traj_rows) table.trajectories.insert(table.trajectories.end(), tr.begin(), tr.end());
  return table;
}

inline ResultTable run_experiment(const ExperimentSpec& spec, const platoon::PlatoonScenario& base) {
  return run_experiment(spec, base, lp::AutoSolver());
}

}  // namespace drmpc::experiments
