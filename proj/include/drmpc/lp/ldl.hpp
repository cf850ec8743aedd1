#pragma once

// Sparse LDL' for quasi-definite matrices with known pivot signs. Tiny or
// wrong-signed pivots are replaced by sign * delta (dynamic regularization),
// so the factorization never breaks down; callers refine iteratively.

#include "drmpc/core.hpp"

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCore>

#include <cmath>
#include <vector>

namespace drmpc::lp {

class QuasiDefiniteLdl {
 public:
  using ColSparse = Eigen::SparseMatrix<double>;

  QuasiDefiniteLdl(double eps = 1e-13, double delta = 1e-7) : eps_(eps), delta_(delta) {}

  /// K given by its lower triangle; sign[i] = +1 / -1 is the expected pivot sign.
  void factor(const ColSparse& K_lower, const std::vector<int>& sign) {
    const Index n = K_lower.rows();
    if (!ordered_) {
      ColSparse full = ColSparse(K_lower.selfadjointView<Eigen::Lower>());
      Eigen::AMDOrdering<int> amd;
      Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> pinv;
      amd(full, pinv);
      perm_ = pinv.inverse();
      ordered_ = true;
    }
    ColSparse Kp(n, n);
    Kp.selfadjointView<Eigen::Upper>() = K_lower.selfadjointView<Eigen::Lower>().twistedBy(perm_);
    Kp.makeCompressed();
    sign_.assign(static_cast<std::size_t>(n), 1);
    for (Index i = 0; i < n; ++i) sign_[static_cast<std::size_t>(perm_.indices()[i])] = sign[static_cast<std::size_t>(i)];
    symbolic(Kp);
    numeric(Kp);
  }

  Index regularized_pivots() const { return regularized_; }

  Vector solve(const Vector& b) const {
    const Index n = b.size();
    Vector x(n);
    for (Index i = 0; i < n; ++i) x[perm_.indices()[i]] = b[i];
    for (Index j = 0; j < n; ++j)
      for (Index p = Lp_[j]; p < Lp_[j + 1]; ++p) x[Li_[p]] -= Lx_[p] * x[j];
    for (Index j = 0; j < n; ++j) x[j] /= D_[j];
    for (Index j = n - 1; j >= 0; --j)
      for (Index p = Lp_[j]; p < Lp_[j + 1]; ++p) x[j] -= Lx_[p] * x[Li_[p]];
    Vector out(n);
    for (Index i = 0; i < n; ++i) out[i] = x[perm_.indices()[i]];
    return out;
  }

 private:
  // Elimination tree and column counts (Davis, LDL).
  void symbolic(const ColSparse& A) {
    const Index n = A.rows();
    parent_.assign(static_cast<std::size_t>(n), -1);
    std::vector<Index> flag(static_cast<std::size_t>(n));
    std::vector<Index> lnz(static_cast<std::size_t>(n), 0);
    for (Index k = 0; k < n; ++k) {
      flag[static_cast<std::size_t>(k)] = k;
      for (ColSparse::InnerIterator it(A, k); it; ++it) {
        Index i = it.row();
        if (i >= k) continue;
        while (flag[static_cast<std::size_t>(i)] != k) {
          if (parent_[static_cast<std::size_t>(i)] == -1) parent_[static_cast<std::size_t>(i)] = k;
          ++lnz[static_cast<std::size_t>(i)];
          flag[static_cast<std::size_t>(i)] = k;
          i = parent_[static_cast<std::size_t>(i)];
        }
      }
    }
    Lp_.assign(static_cast<std::size_t>(n + 1), 0);
    for (Index k = 0; k < n; ++k) Lp_[static_cast<std::size_t>(k + 1)] = Lp_[static_cast<std::size_t>(k)] + lnz[static_cast<std::size_t>(k)];
    Li_.assign(static_cast<std::size_t>(Lp_.back()), 0);
    Lx_.assign(static_cast<std::size_t>(Lp_.back()), 0.0);
  }

  void numeric(const ColSparse& A) {
    const Index n = A.rows();
    D_.assign(static_cast<std::size_t>(n), 0.0);
    std::vector<double> Y(static_cast<std::size_t>(n), 0.0);
    std::vector<Index> pattern(static_cast<std::size_t>(n));
    std::vector<Index> flag(static_cast<std::size_t>(n));
    std::vector<Index> lnz(static_cast<std::size_t>(n), 0);
    regularized_ = 0;
    for (Index k = 0; k < n; ++k) {
      Index top = n;
      flag[static_cast<std::size_t>(k)] = k;
      for (ColSparse::InnerIterator it(A, k); it; ++it) {
        Index i = it.row();
        if (i > k) continue;
        Y[static_cast<std::size_t>(i)] += it.value();
        Index len = 0;
        for (; flag[static_cast<std::size_t>(i)] != k; i = parent_[static_cast<std::size_t>(i)]) {
          pattern[static_cast<std::size_t>(len++)] = i;
          flag[static_cast<std::size_t>(i)] = k;
        }
        while (len > 0) pattern[static_cast<std::size_t>(--top)] = pattern[static_cast<std::size_t>(--len)];
      }
      double d = Y[static_cast<std::size_t>(k)];
      Y[static_cast<std::size_t>(k)] = 0.0;
      for (; top < n; ++top) {
        const Index i = pattern[static_cast<std::size_t>(top)];
        const double yi = Y[static_cast<std::size_t>(i)];
        Y[static_cast<std::size_t>(i)] = 0.0;
        const Index p0 = Lp_[static_cast<std::size_t>(i)];
        const Index p2 = p0 + lnz[static_cast<std::size_t>(i)];
        for (Index p = p0; p < p2; ++p) Y[static_cast<std::size_t>(Li_[static_cast<std::size_t>(p)])] -= Lx_[static_cast<std::size_t>(p)] * yi;
        const double lki = yi / D_[static_cast<std::size_t>(i)];
        d -= lki * yi;
        Li_[static_cast<std::size_t>(p2)] = k;
        Lx_[static_cast<std::size_t>(p2)] = lki;
        ++lnz[static_cast<std::size_t>(i)];
      }
      const int s = sign_[static_cast<std::size_t>(k)];
      if (!(s * d > eps_)) {
        d = s * delta_;
        ++regularized_;
      }
      D_[static_cast<std::size_t>(k)] = d;
    }
  }

  double eps_;
  double delta_;
  bool ordered_ = false;
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> perm_;
  std::vector<int> sign_;
  std::vector<Index> parent_;
  std::vector<Index> Lp_;
  std::vector<Index> Li_;
  std::vector<double> Lx_;
  std::vector<double> D_;
  Index regularized_ = 0;
};

}  // namespace drmpc::lp
