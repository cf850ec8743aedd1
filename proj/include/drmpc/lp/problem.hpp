#pragma once

// LP in the form
//   minimize  c'x + offset
//   s.t.      G x <= h,  A x = b,  lower <= x <= upper
// with sparse constraint matrices, plus a builder and a solver interface.

#include "drmpc/core.hpp"

#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace drmpc::lp {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class LpStatus { Optimal, Infeasible, Unbounded, NumericalFailure, IterationLimit };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::NumericalFailure: return "numerical_failure";
    case LpStatus::IterationLimit: return "iteration_limit";
  }
  return "unknown";
}

struct LpTolerances {
  double feasibility = 1e-8;
  double optimality = 1e-9;
  double pivot = 1e-11;
  int max_iterations = 100000;
};

struct LpProblem {
  Vector c;
  double objective_offset = 0.0;
  SparseMatrix G;
  Vector h;
  SparseMatrix A_eq;
  Vector b_eq;
  Vector lower;
  Vector upper;
  std::vector<std::string> var_names;
  std::vector<std::string> ineq_names;
  std::vector<std::string> eq_names;

  Index num_vars() const { return c.size(); }
  Index num_ineq() const { return G.rows(); }
  Index num_eq() const { return A_eq.rows(); }

  void validate() const {
    const Index n = num_vars();
    detail::require_dim(G.cols() == n && A_eq.cols() == n, "constraint matrices must have n columns");
    detail::require_dim(h.size() == G.rows() && b_eq.size() == A_eq.rows(), "rhs length mismatch");
    detail::require_dim(lower.size() == n && upper.size() == n, "bound vectors must have n entries");
    detail::require(c.allFinite() && h.allFinite() && b_eq.allFinite(), "non-finite LP data");
    for (Index j = 0; j < n; ++j) {
      detail::require(!(lower[j] > upper[j]), "variable lower bound exceeds upper bound");
      detail::require(lower[j] < kInf && upper[j] > -kInf, "bound infinite in the wrong direction");
    }
  }

  double objective(const Vector& x) const { return c.dot(x) + objective_offset; }

  /// Largest violation of any row or bound at x (absolute).
  double max_violation(const Vector& x) const {
    double v = 0.0;
    if (G.rows() > 0) v = std::max(v, (G * x - h).maxCoeff());
    if (A_eq.rows() > 0) v = std::max(v, (A_eq * x - b_eq).cwiseAbs().maxCoeff());
    for (Index j = 0; j < x.size(); ++j) v = std::max({v, lower[j] - x[j], x[j] - upper[j]});
    return std::max(v, 0.0);
  }
};

struct LpSolution {
  LpStatus status = LpStatus::NumericalFailure;
  Vector x;
  double objective = 0.0;
  double max_violation = 0.0;
  /// Multipliers z >= 0 for G x <= h and y for A x = b, with the
  /// convention  c + G'z + A'y = reduced_costs  (bound multipliers).
  Vector dual_ineq;
  Vector dual_eq;
  Vector reduced_costs;
  int iterations = 0;
  std::string message;

  bool optimal() const { return status == LpStatus::Optimal; }
};

/// Lagrangian dual objective of a reported multiplier set; -inf when the
/// reduced costs demand a bound the variable does not have.
inline double dual_objective(const LpProblem& p, const LpSolution& s, double tol = 1e-9) {
  double d = p.objective_offset - p.h.dot(s.dual_ineq) - p.b_eq.dot(s.dual_eq);
  for (Index j = 0; j < p.num_vars(); ++j) {
    const double r = s.reduced_costs[j];
    if (r > tol) {
      if (!std::isfinite(p.lower[j])) return -kInf;
      d += r * p.lower[j];
    } else if (r < -tol) {
      if (!std::isfinite(p.upper[j])) return -kInf;
      d += r * p.upper[j];
    } else if (std::isfinite(p.lower[j]) || std::isfinite(p.upper[j])) {
      d += r * (std::isfinite(p.lower[j]) ? p.lower[j] : p.upper[j]);
    }
  }
  return d;
}

inline Vector reduced_costs(const LpProblem& p, const Vector& z, const Vector& y) {
  Vector r = p.c;
  if (p.num_ineq() > 0) r += p.G.transpose() * z;
  if (p.num_eq() > 0) r += p.A_eq.transpose() * y;
  return r;
}

class LpSolver {
 public:
  virtual ~LpSolver() = default;
  virtual LpSolution solve(const LpProblem& problem) const = 0;
  virtual std::string name() const = 0;
};

struct LinearTerm {
  Index var;
  double coef;
};

/// Incremental construction of an LpProblem.
class LpBuilder {
 public:
  Index add_variable(double cost = 0.0, double lower = -kInf, double upper = kInf,
                     std::string name = {}) {
    cost_.push_back(cost);
    lower_.push_back(lower);
    upper_.push_back(upper);
    var_names_.push_back(name.empty() ? "x" + std::to_string(cost_.size() - 1) : std::move(name));
    return static_cast<Index>(cost_.size()) - 1;
  }

  Index add_variables(Index count, double cost, double lower, double upper,
                      const std::string& prefix) {
    const Index first = num_vars();
    for (Index k = 0; k < count; ++k)
      add_variable(cost, lower, upper, prefix + "_" + std::to_string(k));
    return first;
  }

  void set_cost(Index var, double cost) { cost_.at(static_cast<std::size_t>(var)) = cost; }
  void add_cost(Index var, double cost) { cost_.at(static_cast<std::size_t>(var)) += cost; }
  void add_objective_offset(double v) { offset_ += v; }
  void set_bounds(Index var, double lower, double upper) {
    lower_.at(static_cast<std::size_t>(var)) = lower;
    upper_.at(static_cast<std::size_t>(var)) = upper;
  }

  /// sum(terms) <= rhs
  Index add_le(const std::vector<LinearTerm>& terms, double rhs, std::string name = {}) {
    return push_row(ineq_, ineq_rhs_, ineq_names_, terms, rhs, std::move(name), "g");
  }
  /// sum(terms) >= rhs
  Index add_ge(const std::vector<LinearTerm>& terms, double rhs, std::string name = {}) {
    std::vector<LinearTerm> neg(terms);
    for (auto& t : neg) t.coef = -t.coef;
    return add_le(neg, -rhs, std::move(name));
  }
  Index add_eq(const std::vector<LinearTerm>& terms, double rhs, std::string name = {}) {
    return push_row(eq_, eq_rhs_, eq_names_, terms, rhs, std::move(name), "e");
  }

  Index num_vars() const { return static_cast<Index>(cost_.size()); }
  Index num_ineq() const { return static_cast<Index>(ineq_rhs_.size()); }
  Index num_eq() const { return static_cast<Index>(eq_rhs_.size()); }

  LpProblem build() const {
    const Index n = num_vars();
    LpProblem p;
    p.c = Eigen::Map<const Vector>(cost_.data(), n);
    p.objective_offset = offset_;
    p.lower = Eigen::Map<const Vector>(lower_.data(), n);
    p.upper = Eigen::Map<const Vector>(upper_.data(), n);
    p.G = to_sparse(ineq_, num_ineq(), n);
    p.h = Eigen::Map<const Vector>(ineq_rhs_.data(), num_ineq());
    p.A_eq = to_sparse(eq_, num_eq(), n);
    p.b_eq = Eigen::Map<const Vector>(eq_rhs_.data(), num_eq());
    p.var_names = var_names_;
    p.ineq_names = ineq_names_;
    p.eq_names = eq_names_;
    p.validate();
    return p;
  }

 private:
  using Triplets = std::vector<Eigen::Triplet<double>>;

  Index push_row(Triplets& trips, std::vector<double>& rhs, std::vector<std::string>& names,
                 const std::vector<LinearTerm>& terms, double value, std::string name,
                 const char* prefix) {
    const auto row = static_cast<Index>(rhs.size());
    for (const auto& t : terms) {
      detail::require_dim(t.var >= 0 && t.var < num_vars(), "row references unknown variable");
      if (t.coef != 0.0) trips.emplace_back(row, t.var, t.coef);
    }
    rhs.push_back(value);
    names.push_back(name.empty() ? prefix + std::to_string(row) : std::move(name));
    return row;
  }

  static SparseMatrix to_sparse(const Triplets& trips, Index rows, Index cols) {
    SparseMatrix m(rows, cols);
    m.setFromTriplets(trips.begin(), trips.end());  // duplicates are summed
    m.makeCompressed();
    return m;
  }

  std::vector<double> cost_, lower_, upper_;
  std::vector<std::string> var_names_;
  double offset_ = 0.0;
  Triplets ineq_, eq_;
  std::vector<double> ineq_rhs_, eq_rhs_;
  std::vector<std::string> ineq_names_, eq_names_;
};

}  // namespace drmpc::lp
