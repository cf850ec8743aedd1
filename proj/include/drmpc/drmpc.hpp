#pragma once

// Distributionally robust MPC over a type-1 Wasserstein ball: the exact LP
// reformulation with worst-case AV@R constraint blocks.

#include "drmpc/disturbance.hpp"
#include "drmpc/lp/auto.hpp"
#include "drmpc/lti_compact.hpp"
#include "drmpc/pwa.hpp"
#include "drmpc/systemic_risk.hpp"

#include <optional>
#include <string>
#include <vector>

namespace drmpc {

/// Treatment of h_t blocks whose value does not depend on the free inputs.
enum class PrefixPolicy {
  Systemic,  // compare against the systemic boundary (limit of gamma as delta grows)
  Literal,   // keep gamma(delta) as for every other step
  Skip,      // drop the block
};

inline const char* to_string(PrefixPolicy p) {
  switch (p) {
    case PrefixPolicy::Systemic: return "systemic";
    case PrefixPolicy::Literal: return "literal";
    case PrefixPolicy::Skip: return "skip";
  }
  return "unknown";
}

inline PrefixPolicy prefix_policy_from_string(const std::string& s) {
  if (s == "systemic") return PrefixPolicy::Systemic;
  if (s == "literal") return PrefixPolicy::Literal;
  if (s == "skip") return PrefixPolicy::Skip;
  throw DomainError("unknown prefix policy '" + s + "'");
}

struct DrmpcProblem {
  CompactForm compact;
  ScenarioSet scenarios;
  double r = 0.0;
  double alpha = 0.5;
  std::optional<double> dual_level;  // defaults to alpha
  PwaFunction cost;
  std::optional<PwaFunction> g;
  std::vector<PwaFunction> h;  // empty, or one per step t = 1..T
  std::optional<SystemicFamily> family;
  double delta = 0.0;
  std::vector<double> gamma;  // explicit per-step thresholds; overrides family/delta
  PrefixPolicy prefix_policy = PrefixPolicy::Systemic;
  Vector x0;
  std::vector<Vector> u_init;
  std::optional<double> u_e_lower;
  std::optional<double> u_e_upper;

  const ZPartition& partition() const { return compact.partition; }
  double level() const { return dual_level.value_or(alpha); }

  void validate() const {
    const auto& part = partition();
    scenarios.validate();
    detail::require_dim(scenarios.dim() == compact.stacked_dim(), "residual length must equal nT");
    detail::require(r >= 0.0 && std::isfinite(r), "radius must be finite and >= 0");
    detail::require(alpha > 0.0 && alpha < 1.0, "AV@R level alpha must lie in (0, 1)");
    detail::require(level() > 0.0, "dual level must be positive");
    detail::require_dim(x0.size() == part.state_dim, "x0 must have n entries");
    detail::require_dim(static_cast<Index>(u_init.size()) == part.u_init_count(), "u_init must hold tau+1 inputs");
    for (const auto& u : u_init) detail::require_dim(u.size() == part.input_dim, "u_init entries must have m entries");
    auto fits = [&](const PwaFunction& f, const char* what) {
      detail::require_dim(f.y_dim() == compact.stacked_dim() && f.z_dim() == part.size(),
                          std::string(what) + " dimensions do not match (nT, n+mT)");
    };
    fits(cost, "cost");
    if (g) fits(*g, "g");
    detail::require_dim(h.empty() || static_cast<int>(h.size()) == part.horizon, "h must hold exactly T functions");
    for (const auto& f : h) fits(f, "h_t");
    if (!h.empty()) {
      if (gamma.empty()) {
        detail::require(family.has_value(), "h constraints need a systemic family or explicit thresholds");
        detail::require(delta >= 0.0, "severity must be nonnegative");
      } else {
        detail::require_dim(static_cast<int>(gamma.size()) == part.horizon, "gamma must hold T thresholds");
      }
    }
    if (u_e_lower && u_e_upper) detail::require(*u_e_lower <= *u_e_upper, "u_e box is empty");
  }

  /// Threshold of step t (1-based) before the prefix policy.
  double threshold(int t) const {
    if (!gamma.empty()) return gamma[static_cast<std::size_t>(t - 1)];
    return gamma_threshold(*family, delta).gamma;
  }

  double systemic_threshold() const { return family ? family->systemic_boundary() : 0.0; }

  /// Fixed part of z with zero free inputs.
  Vector fixed_z() const {
    const auto& part = partition();
    Vector z = Vector::Zero(part.size());
    z.head(part.state_dim) = x0;
    for (Index k = 0; k < part.u_init_count(); ++k)
      z.segment(part.u_init_offset() + k * part.input_dim, part.input_dim) = u_init[static_cast<std::size_t>(k)];
    return z;
  }
};

/// One worst-case AV@R constraint block.
struct CvarBlock {
  std::string name;  // "g" or "h<t>"
  int step = 0;      // 0 for g
  bool decision_independent = false;
  bool active = true;
  double threshold = 0.0;  // block requires AV@R(f) <= threshold
  double lipschitz = 0.0;
  Index s_var = -1;
  Index q_first = -1;
  Index first_row = -1;
  Index row_count = 0;
};

struct AssembledLp {
  lp::LpProblem lp;
  double lambda = 0.0;
  Index u_first = 0;
  Index u_count = 0;
  Index nu_first = 0;
  Index cost_aux_count = 0;
  std::vector<CvarBlock> blocks;  // g first, then h_1..h_T
};

namespace detail {

inline DecisionAffineMap scenario_map(const DrmpcProblem& p, const Vector& base_y, const Vector& xi, const Matrix& Y,
                                      const Matrix& Z, const Vector& z0, const std::vector<Index>& vars) {
  return {base_y + xi, Y, z0, Z, vars};
}

}  // namespace detail

/// Builds the LP. `max_blocks` limits how many constraint blocks (g, h_1, ...)
/// are included; used by the infeasibility diagnostics.
inline AssembledLp assemble_lp(const DrmpcProblem& p, int max_blocks = -1) {
  p.validate();
  const auto& part = p.partition();
  const Index N = p.scenarios.size();
  const double invN = 1.0 / static_cast<double>(N);
  AssembledLp out;
  lp::LpBuilder b;

  out.u_count = part.u_e_size();
  out.u_first = b.add_variables(out.u_count, 0.0, p.u_e_lower.value_or(-kInf), p.u_e_upper.value_or(kInf), "u");
  out.nu_first = b.add_variables(N, invN, -kInf, kInf, "nu");

  std::vector<Index> vars(static_cast<std::size_t>(out.u_count));
  for (Index k = 0; k < out.u_count; ++k) vars[static_cast<std::size_t>(k)] = out.u_first + k;
  const Vector z0 = p.fixed_z();
  const Vector base_y = p.compact.A_bar * z0;
  const Matrix Y = p.compact.effective_block();
  Matrix Z = Matrix::Zero(part.size(), out.u_count);
  for (Index k = 0; k < out.u_count; ++k) Z(part.u_e_offset() + k, k) = 1.0;
  auto map_of = [&](Index i) {
    return detail::scenario_map(p, base_y, p.scenarios.residuals[static_cast<std::size_t>(i)], Y, Z, z0, vars);
  };

  out.lambda = lipschitz_y(p.cost).value;
  b.add_objective_offset(out.lambda * p.r);
  for (Index i = 0; i < N; ++i) {
    const auto info = epigraph_rows(b, p.cost, map_of(i), LinearExpr{{{out.nu_first + i, 1.0}}, 0.0},
                                    "cost_s" + std::to_string(i));
    out.cost_aux_count += info.aux_count;
  }

  // Constraint blocks in diagnostic order.
  struct Pending {
    CvarBlock block;
    const PwaFunction* f;
  };
  std::vector<Pending> pending;
  if (p.g) {
    CvarBlock blk;
    blk.name = "g";
    blk.threshold = 0.0;
    blk.decision_independent = independent_of_decision(*p.g, map_of(0));
    pending.push_back({blk, &*p.g});
  }
  for (int t = 1; t <= static_cast<int>(p.h.size()); ++t) {
    const auto& f = p.h[static_cast<std::size_t>(t - 1)];
    CvarBlock blk;
    blk.name = "h" + std::to_string(t);
    blk.step = t;
    blk.decision_independent = independent_of_decision(f, map_of(0));
    blk.threshold = p.threshold(t);
    if (blk.decision_independent) {
      if (p.prefix_policy == PrefixPolicy::Systemic) blk.threshold = p.systemic_threshold();
      if (p.prefix_policy == PrefixPolicy::Skip) blk.active = false;
    }
    pending.push_back({blk, &f});
  }

  int included = 0;
  for (auto& [blk, f] : pending) {
    if (blk.active && max_blocks >= 0 && included >= max_blocks) blk.active = false;
    if (!blk.active) {
      out.blocks.push_back(blk);
      continue;
    }
    ++included;
    blk.lipschitz = lipschitz_y(*f).value;
    blk.s_var = b.add_variable(0.0, -kInf, kInf, blk.name + "_s");
    blk.q_first = b.add_variables(N, 0.0, 0.0, kInf, blk.name + "_q");
    blk.first_row = b.num_ineq();
    // theta r + (1/N) sum q_i <= s * level
    std::vector<lp::LinearTerm> row{{blk.s_var, -p.level()}};
    for (Index i = 0; i < N; ++i) row.push_back({blk.q_first + i, invN});
    b.add_le(row, -blk.lipschitz * p.r, blk.name + "_cvar");
    // f_i - threshold + s <= q_i
    const PwaFunction shifted = f->shifted(-blk.threshold);
    for (Index i = 0; i < N; ++i)
      epigraph_rows(b, shifted, map_of(i), LinearExpr{{{blk.q_first + i, 1.0}, {blk.s_var, -1.0}}, 0.0},
                    blk.name + "_s" + std::to_string(i));
    blk.row_count = b.num_ineq() - blk.first_row;
    out.blocks.push_back(blk);
  }
  out.lp = b.build();
  return out;
}

struct DrmpcSolution {
  lp::LpStatus status = lp::LpStatus::NumericalFailure;
  std::optional<DecisionVector> z_star;
  double J_tilde = kInf;
  Vector nu;
  std::vector<CvarBlock> blocks;
  std::vector<double> s;  // per block (NaN when inactive)
  std::vector<Vector> q;  // per block
  std::string infeasible_block;  // earliest block making the LP infeasible
  int infeasible_step = -1;
  std::string message;
  Index lp_vars = 0;
  Index lp_rows = 0;

  bool optimal() const { return status == lp::LpStatus::Optimal; }
};

inline DrmpcSolution solve_drmpc(const DrmpcProblem& p, const lp::LpSolver& solver) {
  const auto asm_lp = assemble_lp(p);
  const auto lps = solver.solve(asm_lp.lp);
  DrmpcSolution sol;
  sol.status = lps.status;
  sol.message = lps.message;
  sol.blocks = asm_lp.blocks;
  sol.lp_vars = asm_lp.lp.num_vars();
  sol.lp_rows = asm_lp.lp.num_ineq() + asm_lp.lp.num_eq();
  const Index N = p.scenarios.size();

  if (lps.optimal()) {
    sol.J_tilde = lps.objective;
    Vector z = p.fixed_z();
    z.segment(p.partition().u_e_offset(), asm_lp.u_count) = lps.x.segment(asm_lp.u_first, asm_lp.u_count);
    sol.z_star = DecisionVector(p.partition(), std::move(z));
    sol.nu = lps.x.segment(asm_lp.nu_first, N);
    for (const auto& blk : asm_lp.blocks) {
      sol.s.push_back(blk.active ? lps.x[blk.s_var] : std::nan(""));
      sol.q.push_back(blk.active ? Vector(lps.x.segment(blk.q_first, N)) : Vector());
    }
    return sol;
  }
  if (lps.status != lp::LpStatus::Infeasible) return sol;

  // Locate the earliest block whose addition makes the problem infeasible.
  const auto cost_only = solver.solve(assemble_lp(p, 0).lp);
  if (cost_only.status == lp::LpStatus::Infeasible) {
    sol.infeasible_block = "cost";
    sol.infeasible_step = 0;
    return sol;
  }
  int k = 0;
  for (const auto& blk : asm_lp.blocks) {
    if (!blk.active) continue;
    ++k;
    const auto partial = solver.solve(assemble_lp(p, k).lp);
    if (partial.status == lp::LpStatus::Infeasible) {
      sol.infeasible_block = blk.name;
      sol.infeasible_step = blk.step;
      return sol;
    }
  }
  return sol;
}

inline DrmpcSolution solve_drmpc(const DrmpcProblem& p) { return solve_drmpc(p, lp::AutoSolver()); }

/// (1/N) sum_i (a.y_i + b.z + c) + r ||a||_inf
inline double worst_case_expectation_closed_form(const AffinePiece& cost, const std::vector<Vector>& y_bar,
                                                 const Vector& z, double r) {
  detail::require(!y_bar.empty(), "need at least one scenario");
  double mean = 0.0;
  for (const auto& y : y_bar) mean += cost.a.dot(y);
  mean /= static_cast<double>(y_bar.size());
  const double an = cost.a.size() ? cost.a.lpNorm<Eigen::Infinity>() : 0.0;
  return mean + cost.b.dot(z) + cost.c + r * an;
}

inline double worst_case_expectation_closed_form(const Vector& a, const std::vector<Vector>& y_bar, double r) {
  return worst_case_expectation_closed_form(AffinePiece{a, Vector(0), 0.0}, y_bar, Vector(0), r);
}

struct ConditionReport {
  Index rollouts = 0;
  double mean_cost = 0.0;
  double J_tilde = kInf;
  bool cost_exceeds_estimate = false;
  std::optional<double> avar_g;
  bool g_violated = false;
  std::vector<double> avar_h;  // per step; NaN when the block is inactive
  std::vector<double> thresholds;
  std::vector<bool> h_violated;
  bool any_violation = false;
};

/// Compare Monte Carlo rollouts y (from the true noise model at z*) against the
/// guarantees the LP encodes.
inline ConditionReport check_solution_conditions(const DrmpcProblem& p, const DrmpcSolution& sol,
                                                 const std::vector<Vector>& rollouts) {
  detail::require(sol.optimal() && sol.z_star.has_value(), "conditions need an optimal solution");
  detail::require(!rollouts.empty(), "need at least one rollout");
  const Vector& z = sol.z_star->flat();
  ConditionReport rep;
  rep.rollouts = static_cast<Index>(rollouts.size());
  rep.J_tilde = sol.J_tilde;
  std::vector<double> vals(rollouts.size());
  for (std::size_t k = 0; k < rollouts.size(); ++k) rep.mean_cost += evaluate(p.cost, rollouts[k], z);
  rep.mean_cost /= static_cast<double>(rollouts.size());
  rep.cost_exceeds_estimate = rep.mean_cost > sol.J_tilde;

  for (const auto& blk : sol.blocks) {
    const PwaFunction& f = blk.step == 0 ? *p.g : p.h[static_cast<std::size_t>(blk.step - 1)];
    double av = std::nan("");
    bool violated = false;
    if (blk.active) {
      for (std::size_t k = 0; k < rollouts.size(); ++k) vals[k] = evaluate(f, rollouts[k], z);
      av = empirical_avar(vals, p.alpha);
      violated = av > blk.threshold;
    }
    if (blk.step == 0) {
      rep.avar_g = av;
      rep.g_violated = violated;
    } else {
      rep.avar_h.push_back(av);
      rep.thresholds.push_back(blk.threshold);
      rep.h_violated.push_back(violated);
    }
    rep.any_violation = rep.any_violation || violated;
  }
  return rep;
}

}  // namespace drmpc
