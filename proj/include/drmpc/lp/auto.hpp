#pragma once

#include "drmpc/lp/interior_point.hpp"
#include "drmpc/lp/simplex.hpp"

namespace drmpc::lp {

/// Dense simplex for small problems, interior point beyond a tableau budget.
class AutoSolver final : public LpSolver {
 public:
  explicit AutoSolver(LpTolerances tol = {}, double tableau_budget = 4e6)
      : simplex_(tol), ipm_(tol), budget_(tableau_budget) {}

  std::string name() const override { return "auto"; }

  bool uses_simplex(const LpProblem& p) const {
    const double rows = static_cast<double>(p.num_ineq() + p.num_eq() + p.num_vars());
    const double cols = 2.0 * static_cast<double>(p.num_vars()) + rows;
    return rows * cols <= budget_;
  }

  LpSolution solve(const LpProblem& p) const override {
    return uses_simplex(p) ? simplex_.solve(p) : ipm_.solve(p);
  }

 private:
  SimplexSolver simplex_;
  InteriorPointSolver ipm_;
  double budget_;
};

}  // namespace drmpc::lp
