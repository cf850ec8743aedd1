#pragma once

// Delayed LTI plant x_{t+1} = A x_t + B u_{t-tau} + w_t and its stacked
// T-step form y = A_bar z + B_bar w.

#include "drmpc/core.hpp"

#include <span>
#include <vector>

namespace drmpc {

class DelayedLtiSystem {
 public:
  DelayedLtiSystem(Matrix A, Matrix B, int tau, int horizon)
      : A_(std::move(A)), B_(std::move(B)), tau_(tau), horizon_(horizon) {
    detail::require_dim(A_.rows() == A_.cols(),
                        "state matrix must be square, got " + detail::shape(A_.rows(), A_.cols()));
    detail::require_dim(B_.rows() == A_.rows(),
                        "input matrix must have " + std::to_string(A_.rows()) + " rows, got " +
                            detail::shape(B_.rows(), B_.cols()));
    detail::require(A_.rows() > 0 && B_.cols() > 0, "empty state or input dimension");
    detail::require(horizon_ >= 1, "horizon must be positive");
    detail::require(tau_ >= 0 && tau_ <= horizon_ - 1,
                    "delay must satisfy 0 <= tau <= T-1 (tau=" + std::to_string(tau_) +
                        ", T=" + std::to_string(horizon_) + ")");
  }

  const Matrix& A() const { return A_; }
  const Matrix& B() const { return B_; }
  int delay() const { return tau_; }
  int horizon() const { return horizon_; }
  Index state_dim() const { return A_.rows(); }
  Index input_dim() const { return B_.cols(); }

  /// Same plant with a different delay; the compact matrices do not change.
  DelayedLtiSystem with_delay(int tau) const { return {A_, B_, tau, horizon_}; }

 private:
  Matrix A_;
  Matrix B_;
  int tau_;
  int horizon_;
};

/// Index layout of z = [x0; u_{-tau}..u_0; u_1..u_{T-1-tau}].
struct ZPartition {
  Index state_dim = 0;
  Index input_dim = 0;
  int delay = 0;
  int horizon = 0;

  Index x0_offset() const { return 0; }
  Index x0_size() const { return state_dim; }
  Index u_init_offset() const { return state_dim; }
  Index u_init_size() const { return (delay + 1) * input_dim; }
  Index u_e_offset() const { return u_init_offset() + u_init_size(); }
  Index u_e_size() const { return (horizon - 1 - delay) * input_dim; }
  Index fixed_size() const { return x0_size() + u_init_size(); }
  Index size() const { return state_dim + horizon * input_dim; }
  Index u_init_count() const { return delay + 1; }
  Index u_e_count() const { return horizon - 1 - delay; }
};

struct CompactForm {
  Matrix A_bar;  // nT x (n + mT)
  Matrix B_bar;  // nT x nT
  ZPartition partition;

  Index state_dim() const { return partition.state_dim; }
  int horizon() const { return partition.horizon; }
  Index stacked_dim() const { return A_bar.rows(); }

  /// Columns of A_bar multiplying the free inputs u_e.
  auto effective_block() const {
    return A_bar.middleCols(partition.u_e_offset(), partition.u_e_size());
  }
  auto fixed_block() const { return A_bar.leftCols(partition.fixed_size()); }
};

inline CompactForm build_compact(const DelayedLtiSystem& sys) {
  const Index n = sys.state_dim();
  const Index m = sys.input_dim();
  const int T = sys.horizon();

  CompactForm cf;
  cf.partition = {n, m, sys.delay(), T};
  cf.A_bar = Matrix::Zero(n * T, n + m * T);
  cf.B_bar = Matrix::Zero(n * T, n * T);

  // powers[k] = A^k
  std::vector<Matrix> powers(T + 1);
  powers[0] = Matrix::Identity(n, n);
  for (int k = 1; k <= T; ++k) powers[k] = sys.A() * powers[k - 1];

  for (int t = 0; t < T; ++t) {
    cf.A_bar.block(t * n, 0, n, n) = powers[t + 1];
    for (int k = 0; k <= t; ++k) {
      cf.A_bar.block(t * n, n + k * m, n, m) = powers[t - k] * sys.B();
      cf.B_bar.block(t * n, k * n, n, n) = powers[t - k];
    }
  }
  return cf;
}

class DecisionVector {
 public:
  DecisionVector(ZPartition partition, Vector flat) : part_(partition), z_(std::move(flat)) {
    detail::require_dim(z_.size() == part_.size(),
                        "decision vector length " + std::to_string(z_.size()) + " != n+mT = " +
                            std::to_string(part_.size()));
  }

  const Vector& flat() const { return z_; }
  const ZPartition& partition() const { return part_; }

  auto x0() const { return z_.segment(part_.x0_offset(), part_.x0_size()); }
  auto u_init() const { return z_.segment(part_.u_init_offset(), part_.u_init_size()); }
  auto u_e() const { return z_.segment(part_.u_e_offset(), part_.u_e_size()); }

  /// k-th input stored in z, i.e. u_{k - tau}, for k = 0..T-1.
  auto input(Index k) const {
    return z_.segment(part_.state_dim + k * part_.input_dim, part_.input_dim);
  }

  /// Copy with the free inputs replaced.
  DecisionVector with_u_e(const Vector& u_e) const {
    detail::require_dim(u_e.size() == part_.u_e_size(), "u_e length mismatch");
    Vector z = z_;
    z.segment(part_.u_e_offset(), part_.u_e_size()) = u_e;
    return {part_, std::move(z)};
  }

 private:
  ZPartition part_;
  Vector z_;
};

inline DecisionVector assemble_z(const ZPartition& part, const Vector& x0,
                                 std::span<const Vector> u_init, std::span<const Vector> u_e) {
  detail::require_dim(x0.size() == part.state_dim, "x0 must have n entries");
  detail::require_dim(static_cast<Index>(u_init.size()) == part.u_init_count(),
                      "u_init must hold tau+1 = " + std::to_string(part.u_init_count()) +
                          " inputs, got " + std::to_string(u_init.size()));
  detail::require_dim(static_cast<Index>(u_e.size()) == part.u_e_count(),
                      "u_e must hold T-1-tau = " + std::to_string(part.u_e_count()) +
                          " inputs, got " + std::to_string(u_e.size()));
  Vector z(part.size());
  z.head(part.state_dim) = x0;
  Index k = part.state_dim;
  for (const auto* seq : {&u_init, &u_e}) {
    for (const Vector& u : *seq) {
      detail::require_dim(u.size() == part.input_dim, "input vector must have m entries");
      z.segment(k, part.input_dim) = u;
      k += part.input_dim;
    }
  }
  return {part, std::move(z)};
}

inline DecisionVector assemble_z(const DelayedLtiSystem& sys, const Vector& x0,
                                 std::span<const Vector> u_init, std::span<const Vector> u_e) {
  return assemble_z(ZPartition{sys.state_dim(), sys.input_dim(), sys.delay(), sys.horizon()}, x0,
                    u_init, u_e);
}

/// Stacked states y = [x_1; ...; x_T].
struct CollectiveState {
  Vector y;
  Index state_dim = 0;

  /// State at time t, 1 <= t <= T.
  auto state(Index t) const { return y.segment((t - 1) * state_dim, state_dim); }
};

/// Step-by-step recursion of the true plant; w stacks w_0..w_{T-1}.
inline CollectiveState propagate_truth(const DelayedLtiSystem& sys, const DecisionVector& z,
                                       const Vector& w) {
  const Index n = sys.state_dim();
  const int T = sys.horizon();
  detail::require_dim(w.size() == n * T, "noise must stack T vectors of dimension n");
  detail::require_dim(z.partition().state_dim == n && z.partition().input_dim == sys.input_dim() &&
                          z.partition().horizon == T && z.partition().delay == sys.delay(),
                      "decision vector layout does not match the system");

  CollectiveState out{Vector(n * T), n};
  Vector x = z.x0();
  for (int t = 0; t < T; ++t) {
    // u_{t - tau} is the t-th input stored in z.
    x = sys.A() * x + sys.B() * z.input(t) + w.segment(t * n, n);
    out.y.segment(t * n, n) = x;
  }
  return out;
}

inline CollectiveState compact_predict(const CompactForm& cf, const Vector& z, const Vector& xi) {
  detail::require_dim(z.size() == cf.A_bar.cols(), "z length does not match A_bar columns");
  detail::require_dim(xi.size() == cf.A_bar.rows(), "xi length does not match A_bar rows");
  return {cf.A_bar * z + xi, cf.state_dim()};
}

inline CollectiveState compact_predict(const CompactForm& cf, const DecisionVector& z,
                                       const Vector& xi) {
  return compact_predict(cf, z.flat(), xi);
}

}  // namespace drmpc
