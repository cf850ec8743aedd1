#pragma once

// Dense two-phase tableau simplex. Dantzig pricing with lowest-index ties;
// switches to Bland's rule once a run of degenerate pivots suggests cycling.

#include "drmpc/lp/problem.hpp"

#include <Eigen/LU>

#include <cmath>
#include <vector>

namespace drmpc::lp {

namespace detail_simplex {

// x_j = offset + x'_pos - x'_neg with x' >= 0
struct VarMap {
  double offset = 0.0;
  Index pos = -1;
  Index neg = -1;
};

struct StandardForm {
  Matrix A;  // rows x (structural + slack)
  Vector b;  // >= 0 after row flips
  Vector c;
  double c0 = 0.0;
  std::vector<VarMap> vars;
  std::vector<double> row_sign;  // +1 or -1 per standard row
  std::vector<Index> slack_col;  // per standard row, -1 for equalities
  Index n_struct = 0;
  Index n_ineq = 0;  // first n_ineq rows are G rows, then equalities, then bound rows
  Index n_eq = 0;
};

inline StandardForm standardize(const LpProblem& p) {
  StandardForm sf;
  const Index n = p.num_vars();
  sf.vars.resize(static_cast<std::size_t>(n));
  std::vector<Index> bounded;  // variables needing an x' <= u - l row
  Index k = 0;
  for (Index j = 0; j < n; ++j) {
    auto& v = sf.vars[static_cast<std::size_t>(j)];
    const bool lo = std::isfinite(p.lower[j]);
    const bool up = std::isfinite(p.upper[j]);
    if (lo) {
      v.offset = p.lower[j];
      v.pos = k++;
      if (up) bounded.push_back(j);
    } else if (up) {
      v.offset = p.upper[j];
      v.neg = k++;
    } else {
      v.pos = k++;
      v.neg = k++;
    }
  }
  sf.n_struct = k;
  sf.n_ineq = p.num_ineq();
  sf.n_eq = p.num_eq();
  const Index n_bound = static_cast<Index>(bounded.size());
  const Index m = sf.n_ineq + sf.n_eq + n_bound;
  const Index n_slack = sf.n_ineq + n_bound;

  Matrix A = Matrix::Zero(m, k + n_slack);
  Vector b(m);
  sf.c = Vector::Zero(k + n_slack);
  sf.c0 = p.objective_offset;
  for (Index j = 0; j < n; ++j) {
    const auto& v = sf.vars[static_cast<std::size_t>(j)];
    sf.c0 += p.c[j] * v.offset;
    if (v.pos >= 0) sf.c[v.pos] += p.c[j];
    if (v.neg >= 0) sf.c[v.neg] -= p.c[j];
  }

  auto fill_row = [&](Index row, const SparseMatrix& M, Index src, double rhs) {
    double shift = 0.0;
    for (SparseMatrix::InnerIterator it(M, src); it; ++it) {
      const auto& v = sf.vars[static_cast<std::size_t>(it.col())];
      shift += it.value() * v.offset;
      if (v.pos >= 0) A(row, v.pos) += it.value();
      if (v.neg >= 0) A(row, v.neg) -= it.value();
    }
    b[row] = rhs - shift;
  };

  sf.slack_col.assign(static_cast<std::size_t>(m), -1);
  Index slack = k;
  for (Index i = 0; i < sf.n_ineq; ++i) {
    fill_row(i, p.G, i, p.h[i]);
    A(i, slack) = 1.0;
    sf.slack_col[static_cast<std::size_t>(i)] = slack++;
  }
  for (Index i = 0; i < sf.n_eq; ++i) fill_row(sf.n_ineq + i, p.A_eq, i, p.b_eq[i]);
  for (Index q = 0; q < n_bound; ++q) {
    const Index row = sf.n_ineq + sf.n_eq + q;
    const Index j = bounded[static_cast<std::size_t>(q)];
    A(row, sf.vars[static_cast<std::size_t>(j)].pos) = 1.0;
    b[row] = p.upper[j] - p.lower[j];
    A(row, slack) = 1.0;
    sf.slack_col[static_cast<std::size_t>(row)] = slack++;
  }

  sf.row_sign.assign(static_cast<std::size_t>(m), 1.0);
  for (Index i = 0; i < m; ++i) {
    if (b[i] < 0.0) {
      A.row(i) *= -1.0;
      b[i] = -b[i];
      sf.row_sign[static_cast<std::size_t>(i)] = -1.0;
    }
  }
  sf.A = std::move(A);
  sf.b = std::move(b);
  return sf;
}

}  // namespace detail_simplex

class SimplexSolver final : public LpSolver {
 public:
  explicit SimplexSolver(LpTolerances tol = {}) : tol_(tol) {}

  std::string name() const override { return "dense-simplex"; }

  LpSolution solve(const LpProblem& problem) const override {
    problem.validate();
    const auto sf = detail_simplex::standardize(problem);
    const Index m = sf.A.rows();
    const Index ns = sf.A.cols();

    // Initial basis: slack where it has +1 after the row flip, artificial otherwise.
    std::vector<Index> basis(static_cast<std::size_t>(m));
    std::vector<Index> art_rows;
    for (Index i = 0; i < m; ++i) {
      const Index s = sf.slack_col[static_cast<std::size_t>(i)];
      if (s >= 0 && sf.row_sign[static_cast<std::size_t>(i)] > 0) {
        basis[static_cast<std::size_t>(i)] = s;
      } else {
        basis[static_cast<std::size_t>(i)] = ns + static_cast<Index>(art_rows.size());
        art_rows.push_back(i);
      }
    }
    const Index na = static_cast<Index>(art_rows.size());
    const Index ncol = ns + na;

    Matrix T = Matrix::Zero(m + 1, ncol + 1);
    T.topLeftCorner(m, ns) = sf.A;
    for (Index a = 0; a < na; ++a) T(art_rows[static_cast<std::size_t>(a)], ns + a) = 1.0;
    T.col(ncol).head(m) = sf.b;

    LpSolution sol;
    int iterations = 0;

    // Phase 1: minimize the sum of artificials.
    if (na > 0) {
      Vector c1 = Vector::Zero(ncol);
      c1.tail(na).setOnes();
      set_cost_row(T, c1, basis);
      const auto st = iterate(T, basis, ncol, iterations);
      if (st == LpStatus::IterationLimit) return fail(sol, st, iterations, "phase 1 iteration limit");
      const double infeas = -T(m, ncol);
      if (infeas > tol_.feasibility * std::max(1.0, sf.b.lpNorm<Eigen::Infinity>())) {
        sol.status = LpStatus::Infeasible;
        sol.iterations = iterations;
        sol.message = "phase 1 optimum " + std::to_string(infeas) + " > 0";
        return sol;
      }
      // Drive remaining artificials out where a structural pivot exists.
      for (Index i = 0; i < m; ++i) {
        if (basis[static_cast<std::size_t>(i)] < ns) continue;
        Index best = -1;
        double mag = tol_.pivot * 1e3;
        for (Index j = 0; j < ns; ++j) {
          if (std::abs(T(i, j)) > mag) {
            mag = std::abs(T(i, j));
            best = j;
          }
        }
        if (best >= 0) pivot(T, basis, i, best);
        // otherwise the row is redundant; its artificial stays basic at zero
      }
    }

    // Phase 2.
    Vector c2 = Vector::Zero(ncol);
    c2.head(ns) = sf.c;
    set_cost_row(T, c2, basis);
    const auto st = iterate(T, basis, ns, iterations);
    if (st == LpStatus::IterationLimit) return fail(sol, st, iterations, "phase 2 iteration limit");
    if (st == LpStatus::Unbounded) {
      sol.status = LpStatus::Unbounded;
      sol.iterations = iterations;
      sol.message = "improving ray found";
      return sol;
    }

    // Recompute the basic solution and duals from the original data.
    Matrix Bm(m, m);
    Vector cB(m);
    for (Index i = 0; i < m; ++i) {
      const Index j = basis[static_cast<std::size_t>(i)];
      if (j < ns) {
        Bm.col(i) = sf.A.col(j);
        cB[i] = sf.c[j];
      } else {
        Bm.col(i).setZero();
        Bm(art_rows[static_cast<std::size_t>(j - ns)], i) = 1.0;
        cB[i] = 0.0;
      }
    }
    Vector xs = Vector::Zero(ns);
    Vector ystd = Vector::Zero(m);
    if (m > 0) {
      Eigen::PartialPivLU<Matrix> lu(Bm);
      if (!(lu.rcond() > 1e-13)) return fail(sol, LpStatus::NumericalFailure, iterations, "singular basis");
      const Vector xB = lu.solve(sf.b);
      ystd = lu.transpose().solve(cB);
      for (Index i = 0; i < m; ++i) {
        const Index j = basis[static_cast<std::size_t>(i)];
        if (j < ns) xs[j] = xB[i];
        else if (std::abs(xB[i]) > tol_.feasibility)
          return fail(sol, LpStatus::NumericalFailure, iterations, "artificial left nonzero");
      }
      if (xB.minCoeff() < -tol_.feasibility)
        return fail(sol, LpStatus::NumericalFailure, iterations, "basis lost primal feasibility");
    }
    const Vector dstd = sf.c - sf.A.transpose() * ystd;
    if (ns > 0 && dstd.minCoeff() < -1e3 * tol_.optimality * std::max(1.0, sf.c.lpNorm<Eigen::Infinity>()))
      return fail(sol, LpStatus::NumericalFailure, iterations, "basis lost dual feasibility");

    const Index n = problem.num_vars();
    sol.x.resize(n);
    for (Index j = 0; j < n; ++j) {
      const auto& v = sf.vars[static_cast<std::size_t>(j)];
      double x = v.offset;
      if (v.pos >= 0) x += xs[v.pos];
      if (v.neg >= 0) x -= xs[v.neg];
      sol.x[j] = x;
    }
    // Standard-row dual y_i pairs with sign_i * (original row); z = -sign*y.
    sol.dual_ineq.resize(problem.num_ineq());
    for (Index i = 0; i < problem.num_ineq(); ++i)
      sol.dual_ineq[i] = std::max(0.0, -sf.row_sign[static_cast<std::size_t>(i)] * ystd[i]);
    sol.dual_eq.resize(problem.num_eq());
    for (Index i = 0; i < problem.num_eq(); ++i) {
      const Index row = sf.n_ineq + i;
      sol.dual_eq[i] = -sf.row_sign[static_cast<std::size_t>(row)] * ystd[row];
    }
    sol.reduced_costs = reduced_costs(problem, sol.dual_ineq, sol.dual_eq);
    sol.objective = problem.objective(sol.x);
    sol.max_violation = problem.max_violation(sol.x);
    sol.iterations = iterations;
    if (sol.max_violation > tol_.feasibility * std::max(1.0, problem.h.size() ? problem.h.lpNorm<Eigen::Infinity>() : 1.0))
      return fail(sol, LpStatus::NumericalFailure, iterations, "solution violates constraints");
    sol.status = LpStatus::Optimal;
    return sol;
  }

 private:
  static void set_cost_row(Matrix& T, const Vector& c, const std::vector<Index>& basis) {
    const Index m = T.rows() - 1;
    const Index ncol = T.cols() - 1;
    T.row(m).head(ncol) = c.transpose();
    T(m, ncol) = 0.0;
    for (Index i = 0; i < m; ++i) {
      const double cb = c[basis[static_cast<std::size_t>(i)]];
      if (cb != 0.0) T.row(m) -= cb * T.row(i);
    }
  }

  static void pivot(Matrix& T, std::vector<Index>& basis, Index r, Index e) {
    T.row(r) /= T(r, e);
    Vector col = T.col(e);
    col[r] = 0.0;
    const Eigen::RowVectorXd row = T.row(r);
    T.noalias() -= col * row;
    T.col(e).setZero();
    T(r, e) = 1.0;
    basis[static_cast<std::size_t>(r)] = e;
  }

  // Columns >= n_enter never enter (artificials in phase 2).
  LpStatus iterate(Matrix& T, std::vector<Index>& basis, Index n_enter, int& iterations) const {
    const Index m = T.rows() - 1;
    const Index rhs = T.cols() - 1;
    bool bland = false;
    int degenerate_run = 0;
    while (true) {
      Index e = -1;
      double best = -tol_.optimality;
      for (Index j = 0; j < n_enter; ++j) {
        const double d = T(m, j);
        if (d < best) {
          e = j;
          if (bland) break;
          best = d;
        }
      }
      if (e < 0) return LpStatus::Optimal;
      if (iterations >= tol_.max_iterations) return LpStatus::IterationLimit;

      Index r = -1;
      double ratio = kInf;
      for (Index i = 0; i < m; ++i) {
        const double a = T(i, e);
        if (a <= tol_.pivot) continue;
        const double q = T(i, rhs) / a;
        const double slack = 1e-12 * (1.0 + std::abs(ratio));
        if (r < 0 || q < ratio - slack) {
          r = i;
          ratio = q;
        } else if (q <= ratio + slack &&
                   basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(r)]) {
          r = i;
          ratio = std::min(ratio, q);
        }
      }
      if (r < 0) return LpStatus::Unbounded;
      if (ratio <= 1e-12) {
        if (++degenerate_run > 50) bland = true;
      } else {
        degenerate_run = 0;
      }
      pivot(T, basis, r, e);
      // guard against drift below zero in the rhs column
      for (Index i = 0; i < m; ++i)
        if (T(i, rhs) < 0.0 && T(i, rhs) > -1e-11) T(i, rhs) = 0.0;
      ++iterations;
    }
  }

  static LpSolution fail(LpSolution sol, LpStatus st, int iterations, const std::string& msg) {
    sol.status = st;
    sol.iterations = iterations;
    sol.message = msg;
    return sol;
  }

  LpTolerances tol_;
};

}  // namespace drmpc::lp
