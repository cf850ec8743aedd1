#pragma once

// JSON run configuration: platoon scenario, ambiguity radius, experiment spec
// and LP backend, with dotted-path overrides (platoon.tau=2).

#include "drmpc/disturbance.hpp"
#include "drmpc/experiments.hpp"
#include "drmpc/lp/auto.hpp"
#include "drmpc/lp/interior_point.hpp"
#include "drmpc/lp/simplex.hpp"
#include "drmpc/platoon.hpp"

#include <json.hpp>

#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>

namespace drmpc::config {

using Json = nlohmann::json;

struct SolverConfig {
  std::string backend = "auto";  // auto | simplex | ipm
  double tableau_budget = 4e6;
};

struct RunConfig {
  platoon::PlatoonScenario scenario;
  AmbiguityConfig ambiguity = AmbiguityConfig::direct(0.02);
  experiments::ExperimentSpec experiment;
  std::optional<std::uint64_t> seed;  // mandatory for experiments
  SolverConfig solver;

  /// Radius actually used: direct value or the concentration bound.
  double resolved_radius() const {
    return radius(ambiguity, scenario.N, static_cast<Index>(scenario.n) * scenario.T);
  }

  platoon::PlatoonScenario resolved_scenario() const {
    auto s = scenario;
    s.radius = resolved_radius();
    return s;
  }
};

namespace detail {

inline void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& section) {
  if (!j.is_object()) throw DomainError("config section '" + section + "' must be an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw DomainError("unknown key '" + section + "." + k + "'");
}

template <class T>
void get(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline RunConfig from_json(const Json& j) {
  RunConfig c;
  drmpc::detail::require(j.is_object(), "config root must be an object");
  detail::check_keys(j, {"platoon", "ambiguity", "experiment", "solver", "seed"}, "root");
  if (j.contains("seed") && !j.at("seed").is_null()) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("platoon")) {
    const auto& p = j.at("platoon");
    detail::check_keys(p,
                       {"n", "T", "tau", "d", "c", "input_weight", "gamma1", "j", "alpha", "delta", "N",
                        "noise_variance", "spacing_lo", "spacing_hi", "prefix_policy"},
                       "platoon");
    auto& s = c.scenario;
    detail::get(p, "n", s.n);
    detail::get(p, "T", s.T);
    detail::get(p, "tau", s.tau);
    detail::get(p, "d", s.d);
    detail::get(p, "c", s.c);
    detail::get(p, "input_weight", s.input_weight);
    detail::get(p, "gamma1", s.gamma1);
    detail::get(p, "j", s.j);
    detail::get(p, "alpha", s.alpha);
    detail::get(p, "delta", s.delta);
    detail::get(p, "N", s.N);
    detail::get(p, "noise_variance", s.noise_variance);
    detail::get(p, "spacing_lo", s.spacing_lo);
    detail::get(p, "spacing_hi", s.spacing_hi);
    if (p.contains("prefix_policy")) s.prefix_policy = prefix_policy_from_string(p.at("prefix_policy").get<std::string>());
  }
  if (j.contains("ambiguity")) {
    const auto& a = j.at("ambiguity");
    detail::check_keys(a, {"radius", "epsilon", "beta", "c1", "c2"}, "ambiguity");
    auto& amb = c.ambiguity;
    if (a.contains("radius")) {
      if (a.at("radius").is_null()) amb.direct_radius.reset();
      else amb.direct_radius = a.at("radius").get<double>();
    }
    detail::get(a, "epsilon", amb.epsilon);
    detail::get(a, "beta", amb.beta);
    detail::get(a, "c1", amb.c1);
    detail::get(a, "c2", amb.c2);
  }
  if (j.contains("experiment")) {
    const auto& e = j.at("experiment");
    detail::check_keys(e,
                       {"kind", "radius_grid", "delta_grid", "tau_grid", "repetitions", "rollouts", "output",
                        "receding_horizon", "threads"},
                       "experiment");
    auto& x = c.experiment;
    if (e.contains("kind")) x.kind = experiments::experiment_kind_from_string(e.at("kind").get<std::string>());
    detail::get(e, "radius_grid", x.radius_grid);
    detail::get(e, "delta_grid", x.delta_grid);
    detail::get(e, "tau_grid", x.tau_grid);
    detail::get(e, "repetitions", x.repetitions);
    detail::get(e, "rollouts", x.rollouts);
    detail::get(e, "output", x.output);
    detail::get(e, "receding_horizon", x.receding_horizon);
    detail::get(e, "threads", x.threads);
  }
  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    detail::check_keys(s, {"backend", "tableau_budget"}, "solver");
    detail::get(s, "backend", c.solver.backend);
    detail::get(s, "tableau_budget", c.solver.tableau_budget);
  }
  c.scenario.validate();
  c.ambiguity.validate();
  if (c.seed) c.experiment.master_seed = *c.seed;
  return c;
}

inline Json to_json(const RunConfig& c) {
  const auto& s = c.scenario;
  const auto& x = c.experiment;
  Json j;
  j["seed"] = c.seed ? Json(*c.seed) : Json(nullptr);
  j["platoon"] = {{"n", s.n},
                  {"T", s.T},
                  {"tau", s.tau},
                  {"d", s.d},
                  {"c", s.c},
                  {"input_weight", s.input_weight},
                  {"gamma1", s.gamma1},
                  {"j", s.j},
                  {"alpha", s.alpha},
                  {"delta", s.delta},
                  {"N", s.N},
                  {"noise_variance", s.noise_variance},
                  {"spacing_lo", s.spacing_lo},
                  {"spacing_hi", s.spacing_hi},
                  {"prefix_policy", to_string(s.prefix_policy)}};
  j["ambiguity"] = {{"radius", c.ambiguity.direct_radius ? Json(*c.ambiguity.direct_radius) : Json(nullptr)},
                    {"epsilon", c.ambiguity.epsilon},
                    {"beta", c.ambiguity.beta},
                    {"c1", c.ambiguity.c1},
                    {"c2", c.ambiguity.c2}};
  j["experiment"] = {{"kind", experiments::to_string(x.kind)},
                     {"radius_grid", x.radius_grid},
                     {"delta_grid", x.delta_grid},
                     {"tau_grid", x.tau_grid},
                     {"repetitions", x.repetitions},
                     {"rollouts", x.rollouts},
                     {"output", x.output},
                     {"receding_horizon", x.receding_horizon},
                     {"threads", x.threads}};
  j["solver"] = {{"backend", c.solver.backend}, {"tableau_budget", c.solver.tableau_budget}};
  return j;
}

/// path.to.key=value; value parsed as JSON when possible, otherwise taken as a string.
inline void apply_override(Json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw DomainError("override must look like key.path=value: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  Json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw DomainError("empty key in override path '" + path + "'");
    if (!node->is_object()) *node = Json::object();
    if (dot == std::string::npos) {
      (*node)[key] = value;
      break;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

inline Json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DomainError("cannot open config file '" + path + "'");
  try {
    return Json::parse(f);
  } catch (const Json::parse_error& e) {
    throw DomainError("config file '" + path + "': " + e.what());
  }
}

inline RunConfig load(const std::optional<std::string>& path, const std::vector<std::string>& overrides) {
  Json j = path ? read_json_file(*path) : Json::object();
  for (const auto& o : overrides) apply_override(j, o);
  try {
    return from_json(j);
  } catch (const Json::exception& e) {
    throw DomainError(std::string("config: ") + e.what());
  }
}

inline std::unique_ptr<lp::LpSolver> make_solver(const SolverConfig& s) {
  if (s.backend == "auto") return std::make_unique<lp::AutoSolver>(lp::LpTolerances{}, s.tableau_budget);
  if (s.backend == "simplex") return std::make_unique<lp::SimplexSolver>();
  if (s.backend == "ipm") return std::make_unique<lp::InteriorPointSolver>();
  throw DomainError("unknown LP backend '" + s.backend + "' (auto, simplex, ipm)");
}

/// Files written next to the main CSV: <stem>_summary.csv, <stem>.json and,
/// for trajectories, <stem>_trajectories.csv.
struct OutputPaths {
  std::string rows;
  std::string summary;
  std::string sidecar;
  std::string trajectories;
};

inline OutputPaths output_paths(const std::string& csv) {
  std::string stem = csv;
  if (stem.size() > 4 && stem.compare(stem.size() - 4, 4, ".csv") == 0) stem.resize(stem.size() - 4);
  return {csv, stem + "_summary.csv", stem + ".json", stem + "_trajectories.csv"};
}

inline Json experiment_facts(const experiments::ResultTable& t, const RunConfig& c) {
  Json facts = Json::object();
  facts["resolved_radius"] = c.resolved_radius();
  if (t.kind == experiments::ExperimentKind::CostVsDelta || t.kind == experiments::ExperimentKind::DeltaTauGrid) {
    Json by_tau = Json::object();
    std::set<int> taus;
    for (const auto& r : t.rows) taus.insert(r.tau);
    for (int tau : taus) {
      const auto any = t.first_any_infeasible_delta(tau);
      const auto all = t.first_all_infeasible_delta(tau);
      by_tau[std::to_string(tau)] = {{"first_any_infeasible_delta", any ? Json(*any) : Json(nullptr)},
                                     {"first_all_infeasible_delta", all ? Json(*all) : Json(nullptr)}};
    }
    facts["infeasibility"] = by_tau;
  }
  return facts;
}

inline void write_outputs(const experiments::ResultTable& t, const RunConfig& c, const std::string& csv) {
  const auto paths = output_paths(csv);
  auto open = [](const std::string& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw DomainError("cannot write '" + p + "'");
    return f;
  };
  {
    auto f = open(paths.rows);
    experiments::write_rows_csv(f, t);
  }
  {
    auto f = open(paths.summary);
    experiments::write_summary_csv(f, t);
  }
  if (t.kind == experiments::ExperimentKind::Trajectories) {
    auto f = open(paths.trajectories);
    experiments::write_trajectories_csv(f, t);
  }
  auto f = open(paths.sidecar);
  Json side = {{"config", to_json(c)}, {"facts", experiment_facts(t, c)}};
  f << side.dump(2) << '\n';
}


/// (status, J~, z*) record; doubles round-trip exactly.
inline Json solution_record(const DrmpcSolution& sol) {
  Json j = {{"status", lp::to_string(sol.status)}, {"message", sol.message}, {"lp_vars", sol.lp_vars},
            {"lp_rows", sol.lp_rows}};
  if (sol.optimal()) {
    j["J_tilde"] = sol.J_tilde;
    const auto& z = sol.z_star->flat();
    j["z_star"] = std::vector<double>(z.data(), z.data() + z.size());
    j["u_e"] = [&] {
      const Vector u = sol.z_star->u_e();
      return std::vector<double>(u.data(), u.data() + u.size());
    }();
  } else if (!sol.infeasible_block.empty()) {
    j["infeasible_block"] = sol.infeasible_block;
    j["infeasible_step"] = sol.infeasible_step;
  }
  return j;
}

/// Rebuilds an optimal DrmpcSolution for `p` from a record (blocks re-assembled).
inline DrmpcSolution read_solution_record(const Json& j, const DrmpcProblem& p) {
  drmpc::detail::require(j.value("status", std::string()) == "optimal", "solution record is not optimal");
  const auto z = j.at("z_star").get<std::vector<double>>();
  drmpc::detail::require_dim(static_cast<Index>(z.size()) == p.partition().size(), "z_star length mismatch");
  DrmpcSolution sol;
  sol.status = lp::LpStatus::Optimal;
  sol.J_tilde = j.at("J_tilde").get<double>();
  sol.z_star = DecisionVector(p.partition(), Eigen::Map<const Vector>(z.data(), static_cast<Index>(z.size())));
  sol.blocks = assemble_lp(p).blocks;
  return sol;
}

}  // namespace drmpc::config
