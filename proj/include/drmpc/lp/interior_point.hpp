#pragma once

// Sparse homogeneous self-dual interior-point method with Mehrotra
// predictor-corrector steps. Bounds become inequality rows; each Newton
// system is reduced to the normal equations (plus an equality block when
// present) and factored with a sparse LDL' under AMD ordering.

#include "drmpc/lp/ldl.hpp"
#include "drmpc/lp/problem.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <vector>

namespace drmpc::lp {

struct IpmSettings {
  double feastol = 1e-10;
  double abstol = 1e-10;
  double reltol = 1e-10;
  double certificate_tol = 1e-9;
  // Best iterates kept for when the method stalls or breaks down before the
  // targets above: "acceptable" passes silently, "reduced" is flagged.
  double acceptable_tol = 1e-9;
  double reduced_feastol = 1e-7;
  double reduced_reltol = 1e-7;
  double regularization = 1e-10;
  int refinement_steps = 8;
  int max_iterations = 150;
  double step_fraction = 0.99;
  bool verbose = false;
};

class InteriorPointSolver final : public LpSolver {
 public:
  explicit InteriorPointSolver(LpTolerances tol = {}, IpmSettings settings = {})
      : tol_(tol), set_(settings) {}

  std::string name() const override { return "sparse-hsd-ipm"; }

  LpSolution solve(const LpProblem& problem) const override {
    problem.validate();
    Conic k = to_conic(problem);
    LpSolution sol;
    if (!k.trivially_infeasible.empty()) {
      sol.status = LpStatus::Infeasible;
      sol.message = k.trivially_infeasible;
      return sol;
    }
    if (k.G.rows() == 0 && k.A.rows() == 0) return unconstrained(problem);

    Vector x;
    Vector y;
    Vector z;
    const LpStatus st = run(k, x, y, z, sol.iterations, sol.message);
    sol.status = st;
    if (st != LpStatus::Optimal) return sol;

    sol.x = x;
    // Unscale and split multipliers back onto the original rows.
    sol.dual_ineq = Vector::Zero(problem.num_ineq());
    for (Index i = 0; i < k.G.rows(); ++i) {
      const Index src = k.row_source[static_cast<std::size_t>(i)];
      if (src >= 0) sol.dual_ineq[src] = z[i] * k.g_scale[i];
    }
    sol.dual_eq = Vector::Zero(problem.num_eq());
    for (Index i = 0; i < k.A.rows(); ++i)
      sol.dual_eq[k.eq_source[static_cast<std::size_t>(i)]] = y[i] * k.a_scale[i];
    sol.reduced_costs = reduced_costs(problem, sol.dual_ineq, sol.dual_eq);
    sol.objective = problem.objective(sol.x);
    sol.max_violation = problem.max_violation(sol.x);
    const double scale = std::max({1.0, problem.h.size() ? problem.h.lpNorm<Eigen::Infinity>() : 0.0,
                                   problem.b_eq.size() ? problem.b_eq.lpNorm<Eigen::Infinity>() : 0.0});
    if (sol.max_violation > tol_.feasibility * scale) {
      sol.status = LpStatus::NumericalFailure;
      sol.message = "interior point converged with violation " + std::to_string(sol.max_violation);
    }
    return sol;
  }

 private:
  using ColSparse = Eigen::SparseMatrix<double>;

  // minimize c'x  s.t.  G x + s = h, s >= 0,  A x = b  (rows scaled to unit max-norm)
  struct Conic {
    Vector c;
    ColSparse G;
    Vector h;
    ColSparse A;
    Vector b;
    Vector g_scale;  // original row = scaled row / g_scale
    Vector a_scale;
    std::vector<Index> row_source;  // original inequality index, -1 for bound rows
    std::vector<Index> eq_source;
    std::string trivially_infeasible;
  };

  static Conic to_conic(const LpProblem& p) {
    Conic k;
    const Index n = p.num_vars();
    k.c = p.c;
    std::vector<Eigen::Triplet<double>> gt;
    std::vector<double> h;
    std::vector<double> gs;
    auto push_row = [&](const std::vector<std::pair<Index, double>>& entries, double rhs, Index src) {
      double mx = 0.0;
      for (const auto& e : entries) mx = std::max(mx, std::abs(e.second));
      if (mx == 0.0) {
        if (rhs < -1e-12) k.trivially_infeasible = "constant inequality row violated";
        return;
      }
      const auto row = static_cast<Index>(h.size());
      for (const auto& e : entries) gt.emplace_back(row, e.first, e.second / mx);
      h.push_back(rhs / mx);
      gs.push_back(1.0 / mx);
      k.row_source.push_back(src);
    };
    std::vector<std::pair<Index, double>> buf;
    for (Index i = 0; i < p.num_ineq(); ++i) {
      buf.clear();
      for (SparseMatrix::InnerIterator it(p.G, i); it; ++it) buf.emplace_back(it.col(), it.value());
      push_row(buf, p.h[i], i);
    }
    for (Index j = 0; j < n; ++j) {
      if (std::isfinite(p.lower[j])) push_row({{j, -1.0}}, -p.lower[j], -1);
      if (std::isfinite(p.upper[j])) push_row({{j, 1.0}}, p.upper[j], -1);
    }
    k.G.resize(static_cast<Index>(h.size()), n);
    k.G.setFromTriplets(gt.begin(), gt.end());
    k.h = Eigen::Map<Vector>(h.data(), static_cast<Index>(h.size()));
    k.g_scale = Eigen::Map<Vector>(gs.data(), static_cast<Index>(gs.size()));

    std::vector<Eigen::Triplet<double>> at;
    std::vector<double> b;
    std::vector<double> as;
    for (Index i = 0; i < p.num_eq(); ++i) {
      double mx = 0.0;
      for (SparseMatrix::InnerIterator it(p.A_eq, i); it; ++it) mx = std::max(mx, std::abs(it.value()));
      if (mx == 0.0) {
        if (std::abs(p.b_eq[i]) > 1e-12) k.trivially_infeasible = "constant equality row violated";
        continue;
      }
      const auto row = static_cast<Index>(b.size());
      for (SparseMatrix::InnerIterator it(p.A_eq, i); it; ++it)
        at.emplace_back(row, it.col(), it.value() / mx);
      b.push_back(p.b_eq[i] / mx);
      as.push_back(1.0 / mx);
      k.eq_source.push_back(i);
    }
    k.A.resize(static_cast<Index>(b.size()), n);
    k.A.setFromTriplets(at.begin(), at.end());
    k.b = Eigen::Map<Vector>(b.data(), static_cast<Index>(b.size()));
    k.a_scale = Eigen::Map<Vector>(as.data(), static_cast<Index>(as.size()));
    return k;
  }

  static LpSolution unconstrained(const LpProblem& p) {
    LpSolution sol;
    if (p.c.size() > 0 && p.c.lpNorm<Eigen::Infinity>() > 0.0) {
      sol.status = LpStatus::Unbounded;
      sol.message = "no constraints and nonzero cost";
      return sol;
    }
    sol.status = LpStatus::Optimal;
    sol.x = Vector::Zero(p.num_vars());
    sol.dual_ineq = Vector::Zero(p.num_ineq());
    sol.dual_eq = Vector::Zero(p.num_eq());
    sol.reduced_costs = reduced_costs(p, sol.dual_ineq, sol.dual_eq);
    sol.objective = p.objective(sol.x);
    sol.max_violation = p.max_violation(sol.x);
    return sol;
  }

  // Newton systems  [rho I, A', G'; A, -rho I, 0; G, 0, -W^2] d = r  with W^2 = s/z.
  class KktSolver {
   public:
    KktSolver(const Conic& k, double rho, int refine)
        : k_(k), Gt_(k.G.transpose()), At_(k.A.transpose()), rho_(rho), refine_(refine) {}

    bool factor(const Vector& s, const Vector& z) {
      W2_ = s.cwiseQuotient(z);
      const Index n = k_.c.size();
      const Index p = k_.A.rows();
      const Index m = k_.G.rows();
      // Augmented quasi-definite system [rho I, A', G'; A, -rho I, 0; G, 0, -W^2]
      // (lower triangle); never forms G' W^-2 G, whose pivots cancel badly.
      std::vector<Eigen::Triplet<double>> tr;
      tr.reserve(static_cast<std::size_t>(k_.A.nonZeros() + k_.G.nonZeros() + n + p + m));
      for (Index j = 0; j < n; ++j) tr.emplace_back(j, j, rho_);
      for (Index col = 0; col < k_.A.outerSize(); ++col)
        for (ColSparse::InnerIterator it(k_.A, col); it; ++it) tr.emplace_back(n + it.row(), it.col(), it.value());
      for (Index i = 0; i < p; ++i) tr.emplace_back(n + i, n + i, -rho_);
      for (Index col = 0; col < k_.G.outerSize(); ++col)
        for (ColSparse::InnerIterator it(k_.G, col); it; ++it)
          tr.emplace_back(n + p + it.row(), it.col(), it.value());
      for (Index i = 0; i < m; ++i) tr.emplace_back(n + p + i, n + p + i, -W2_[i]);
      ColSparse K(n + p + m, n + p + m);
      K.setFromTriplets(tr.begin(), tr.end());
      if (sign_.empty()) {
        sign_.assign(static_cast<std::size_t>(n + p + m), -1);
        for (Index j = 0; j < n; ++j) sign_[static_cast<std::size_t>(j)] = 1;
      }
      ldl_.factor(K, sign_);
      return true;
    }

    Index regularized_pivots() const { return ldl_.regularized_pivots(); }

    void solve(const Vector& rx, const Vector& ry, const Vector& rz, Vector& dx, Vector& dy,
               Vector& dz) const {
      reduced(rx, ry, rz, dx, dy, dz);
      double last = kInf;
      for (int r = 0; r < refine_; ++r) {
        // residual against the unregularized system
        const Vector ex = rx - At_ * dy - Gt_ * dz;
        const Vector ey = ry - k_.A * dx;
        const Vector ez = rz - (k_.G * dx - W2_.cwiseProduct(dz));
        const double err = std::max({ex.size() ? ex.lpNorm<Eigen::Infinity>() : 0.0,
                                     ey.size() ? ey.lpNorm<Eigen::Infinity>() : 0.0,
                                     ez.size() ? ez.lpNorm<Eigen::Infinity>() : 0.0});
        if (err < 1e-14 || err > 0.5 * last) break;
        last = err;
        Vector cx;
        Vector cy;
        Vector cz;
        reduced(ex, ey, ez, cx, cy, cz);
        dx += cx;
        dy += cy;
        dz += cz;
      }
    }

   private:
    void reduced(const Vector& rx, const Vector& ry, const Vector& rz, Vector& dx, Vector& dy,
                 Vector& dz) const {
      const Index n = k_.c.size();
      const Index p = k_.A.rows();
      const Index m = k_.G.rows();
      Vector rhs(n + p + m);
      rhs << rx, ry, rz;
      const Vector sol = ldl_.solve(rhs);
      dx = sol.head(n);
      dy = sol.segment(n, p);
      dz = sol.tail(m);
    }

    const Conic& k_;
    ColSparse Gt_;
    ColSparse At_;
    double rho_;
    int refine_;
    Vector W2_;
    QuasiDefiniteLdl ldl_;
    std::vector<int> sign_;
  };

  static double max_step(const Vector& v, const Vector& dv) {
    double a = kInf;
    for (Index i = 0; i < v.size(); ++i)
      if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
    return a;
  }

  static double norm_inf(const Vector& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

  LpStatus run(const Conic& k, Vector& x_out, Vector& y_out, Vector& z_out, int& iterations,
               std::string& message) const {
    const Index n = k.c.size();
    const Index m = k.G.rows();
    const Index p = k.A.rows();
    KktSolver kkt(k, set_.regularization, set_.refinement_steps);

    Vector ones = Vector::Ones(m);
    if (!kkt.factor(ones, ones)) {
      message = "initial factorization failed";
      return LpStatus::NumericalFailure;
    }
    Vector x, y, z, s, tx, ty, tz;
    kkt.solve(Vector::Zero(n), k.b, k.h, x, ty, tz);
    s = -tz;
    if (m > 0) {
      const double ap = -s.minCoeff();
      if (ap >= 0.0) s.array() += 1.0 + ap;
    }
    kkt.solve(-k.c, Vector::Zero(p), Vector::Zero(m), tx, y, z);
    if (m > 0) {
      const double ad = -z.minCoeff();
      if (ad >= 0.0) z.array() += 1.0 + ad;
    }
    double tau = 1.0;
    double kap = 1.0;

    const double nb = std::max(1.0, norm_inf(k.b));
    const double nh = std::max(1.0, norm_inf(k.h));
    const double nc = std::max(1.0, norm_inf(k.c));
    const Index dims = m + 1;

    Vector x1, y1, z1, x2, y2, z2;
    int fallback_tier = 0;  // 0 none, 1 reduced, 2 acceptable
    double best_merit = kInf;
    auto fail = [&](const char* what, LpStatus st) {
      message = what;
      if (fallback_tier == 0) return st;
      message = fallback_tier == 2 ? "converged (acceptable tolerance)" : message + " (reduced accuracy)";
      return LpStatus::Optimal;
    };
    for (iterations = 0; iterations <= set_.max_iterations; ++iterations) {
      const Vector r1 = (p ? Vector(k.A.transpose() * y) : Vector::Zero(n)) + k.G.transpose() * z + k.c * tau;
      const Vector r2 = -(k.A * x) + k.b * tau;
      const Vector r3 = s + k.G * x - k.h * tau;
      const double cx = k.c.dot(x);
      const double by = k.b.dot(y);
      const double hz = k.h.dot(z);
      const double r4 = kap + cx + by + hz;
      const double mu = (s.dot(z) + tau * kap) / static_cast<double>(dims);

      const double pres = std::max(norm_inf(r2) / nb, norm_inf(r3) / nh) / tau;
      const double dres = norm_inf(r1) / nc / tau;
      const double pcost = cx / tau;
      const double dcost = -(hz + by) / tau;
      const double gap = s.dot(z) / (tau * tau);
      const double relgap = gap / std::max(1e-12, std::min(std::abs(pcost), std::abs(dcost)));

      if (set_.verbose)
        std::fprintf(stderr, "ipm %3d pcost %+.9e dcost %+.9e gap %.2e pres %.2e dres %.2e tau %.2e kap %.2e\n",
                     iterations, pcost, dcost, gap, pres, dres, tau, kap);
      if (pres < set_.feastol && dres < set_.feastol && (gap < set_.abstol || relgap < set_.reltol)) {
        x_out = x / tau;
        y_out = y / tau;
        z_out = z / tau;
        message = "converged";
        return LpStatus::Optimal;
      }
      const double merit = std::max({pres, dres, std::min(gap, relgap)});
      const int tier = merit < set_.acceptable_tol ? 2
                       : (pres < set_.reduced_feastol && dres < set_.reduced_feastol &&
                          (gap < set_.reduced_reltol || relgap < set_.reduced_reltol))
                           ? 1
                           : 0;
      if (tier > 0 && (tier > fallback_tier || (tier == fallback_tier && merit < best_merit))) {
        x_out = x / tau;
        y_out = y / tau;
        z_out = z / tau;
        fallback_tier = tier;
        best_merit = merit;
      }
      if (hz + by < 0.0) {
        const Vector res = (p ? Vector(k.A.transpose() * y) : Vector::Zero(n)) + k.G.transpose() * z;
        if (norm_inf(res) / -(hz + by) < set_.certificate_tol) {
          message = "primal infeasibility certificate";
          return LpStatus::Infeasible;
        }
      }
      if (cx < 0.0) {
        const double res = std::max(norm_inf(k.A * x), norm_inf(k.G * x + s));
        if (res / -cx < set_.certificate_tol) {
          message = "dual infeasibility certificate";
          return LpStatus::Unbounded;
        }
      }
      if (iterations == set_.max_iterations) break;

      if (!kkt.factor(s, z)) return fail("factorization failed", LpStatus::NumericalFailure);
      if (set_.verbose) std::fprintf(stderr, "    regularized pivots %ld\n", static_cast<long>(kkt.regularized_pivots()));
      kkt.solve(-k.c, k.b, k.h, x1, y1, z1);
      const double den_base = k.c.dot(x1) + k.b.dot(y1) + k.h.dot(z1);

      auto direction = [&](double eta, const Vector& ds_target, double dk_target, Vector& dx,
                           Vector& dy, Vector& dz, Vector& dsv, double& dtau, double& dkap) {
        kkt.solve(-eta * r1, eta * r2, -eta * r3 + ds_target.cwiseQuotient(z), x2, y2, z2);
        const double num = -eta * r4 + dk_target / tau - k.c.dot(x2) - k.b.dot(y2) - k.h.dot(z2);
        dtau = num / (den_base - kap / tau);
        dx = x2 + dtau * x1;
        dy = y2 + dtau * y1;
        dz = z2 + dtau * z1;
        dsv = -(ds_target + s.cwiseProduct(dz)).cwiseQuotient(z);
        dkap = -(dk_target + kap * dtau) / tau;
      };
      auto step_to_boundary = [&](const Vector& dz, const Vector& dsv, double dtau, double dkap) {
        double a = std::min(max_step(s, dsv), max_step(z, dz));
        if (dtau < 0.0) a = std::min(a, -tau / dtau);
        if (dkap < 0.0) a = std::min(a, -kap / dkap);
        return a;
      };

      // Predictor.
      Vector dxa, dya, dza, dsa;
      double dta = 0.0, dka = 0.0;
      direction(1.0, s.cwiseProduct(z), kap * tau, dxa, dya, dza, dsa, dta, dka);
      const double aa = std::min(1.0, step_to_boundary(dza, dsa, dta, dka));
      const double sigma = std::pow(1.0 - aa, 3);

      // Corrector.
      const Vector ds_c = s.cwiseProduct(z) - Vector::Constant(m, sigma * mu) + dsa.cwiseProduct(dza);
      const double dk_c = kap * tau - sigma * mu + dka * dta;
      Vector dx, dy, dz, dsv;
      double dtau = 0.0, dkap = 0.0;
      direction(1.0 - sigma, ds_c, dk_c, dx, dy, dz, dsv, dtau, dkap);
      const double alpha = std::min(1.0, set_.step_fraction * step_to_boundary(dz, dsv, dtau, dkap));
      if (!(alpha > 1e-12)) return fail("step length collapsed", LpStatus::NumericalFailure);
      x += alpha * dx;
      y += alpha * dy;
      z += alpha * dz;
      s += alpha * dsv;
      tau += alpha * dtau;
      kap += alpha * dkap;
      if (!(x.allFinite() && y.allFinite() && z.allFinite() && s.allFinite() && std::isfinite(tau) &&
            std::isfinite(kap)))
        return fail("non-finite iterate", LpStatus::NumericalFailure);
    }
    return fail("iteration limit", LpStatus::IterationLimit);
  }

  LpTolerances tol_;
  IpmSettings set_;
};

}  // namespace drmpc::lp
