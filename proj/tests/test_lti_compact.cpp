#include "drmpc/lti_compact.hpp"

#include <gtest/gtest.h>

#include <random>
#include <vector>

using namespace drmpc;

namespace {

Matrix brute_force_A_bar(const Matrix& A, const Matrix& B, int T) {
  const Index n = A.rows();
  const Index m = B.cols();
  Matrix out = Matrix::Zero(n * T, n + m * T);
  for (int t = 0; t < T; ++t) {
    Matrix P = Matrix::Identity(n, n);
    for (int k = 0; k <= t; ++k) P = A * P;  // A^(t+1)
    out.block(t * n, 0, n, n) = P;
    for (int k = 0; k <= t; ++k) {
      Matrix Q = Matrix::Identity(n, n);
      for (int e = 0; e < t - k; ++e) Q = Q * A;
      out.block(t * n, n + k * m, n, m) = Q * B;
    }
  }
  return out;
}

Vector random_vector(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

}  // namespace

TEST(BuildCompact, ScalarExpansion) {
  const DelayedLtiSystem sys(Matrix::Constant(1, 1, 2.0), Matrix::Constant(1, 1, 1.0), 0, 2);
  const auto cf = build_compact(sys);
  Matrix Ab(2, 3);
  Ab << 2, 1, 0, 4, 2, 1;
  Matrix Bb(2, 2);
  Bb << 1, 0, 2, 1;
  EXPECT_EQ(cf.A_bar, Ab);
  EXPECT_EQ(cf.B_bar, Bb);
}

TEST(BuildCompact, ZeroSystem) {
  const DelayedLtiSystem sys(Matrix::Zero(2, 2), Matrix::Zero(2, 1), 1, 4);
  const auto cf = build_compact(sys);
  EXPECT_TRUE(cf.A_bar.isZero());
  for (int t = 0; t < 4; ++t)
    for (int k = 0; k < 4; ++k) {
      const Matrix blk = cf.B_bar.block(2 * t, 2 * k, 2, 2);
      if (t == k) EXPECT_EQ(blk, Matrix::Identity(2, 2));
      else EXPECT_TRUE(blk.isZero());
    }
}

TEST(BuildCompact, IdentityStateMatchesBruteForce) {
  Matrix B(2, 1);
  B << 1, 0;
  const DelayedLtiSystem sys(Matrix::Identity(2, 2), B, 0, 3);
  const auto cf = build_compact(sys);
  EXPECT_EQ(cf.A_bar, brute_force_A_bar(sys.A(), sys.B(), 3));
  EXPECT_EQ(cf.A_bar.rows(), 6);
  EXPECT_EQ(cf.A_bar.cols(), 5);
}

TEST(BuildCompact, IndependentOfDelay) {
  std::mt19937_64 rng(7);
  const Matrix A = Matrix::Random(3, 3);
  const Matrix B = Matrix::Random(3, 2);
  const auto ref = build_compact(DelayedLtiSystem(A, B, 0, 5));
  for (int tau = 1; tau < 5; ++tau) {
    const auto cf = build_compact(DelayedLtiSystem(A, B, tau, 5));
    EXPECT_EQ(cf.A_bar, ref.A_bar);
    EXPECT_EQ(cf.B_bar, ref.B_bar);
    EXPECT_EQ(cf.partition.x0_size() + cf.partition.u_init_size() + cf.partition.u_e_size(),
              cf.partition.size());
  }
}

TEST(DelayedLtiSystem, RejectsBadShapes) {
  EXPECT_THROW(DelayedLtiSystem(Matrix::Zero(2, 3), Matrix::Zero(2, 1), 0, 2), DimensionError);
  EXPECT_THROW(DelayedLtiSystem(Matrix::Zero(2, 2), Matrix::Zero(3, 1), 0, 2), DimensionError);
  EXPECT_THROW(DelayedLtiSystem(Matrix::Zero(2, 2), Matrix::Zero(2, 1), 2, 2), DomainError);
  EXPECT_THROW(DelayedLtiSystem(Matrix::Zero(2, 2), Matrix::Zero(2, 1), -1, 2), DomainError);
  EXPECT_NO_THROW(DelayedLtiSystem(Matrix::Zero(2, 2), Matrix::Zero(2, 1), 1, 2));
}

TEST(AssembleZ, Concatenation) {
  const DelayedLtiSystem sys(Matrix::Ones(1, 1), Matrix::Ones(1, 1), 0, 2);
  const std::vector<Vector> ui{Vector::Zero(1)};
  const std::vector<Vector> ue{Vector::Constant(1, 3.0)};
  const auto z = assemble_z(sys, Vector::Ones(1), ui, ue);
  EXPECT_EQ(z.flat(), (Vector(3) << 1, 0, 3).finished());
}

TEST(AssembleZ, FullDelayHasNoFreeInputs) {
  const DelayedLtiSystem sys(Matrix::Ones(1, 1), Matrix::Ones(1, 1), 2, 3);
  const std::vector<Vector> ui(3, Vector::Ones(1));
  const auto z = assemble_z(sys, Vector::Zero(1), ui, {});
  EXPECT_EQ(z.flat().size(), 4);
  EXPECT_EQ(z.u_e().size(), 0);
}

TEST(AssembleZ, LengthArithmeticAndErrors) {
  const DelayedLtiSystem sys(Matrix::Identity(2, 2), Matrix::Ones(2, 1), 1, 3);
  const std::vector<Vector> ui(2, Vector::Ones(1));
  const std::vector<Vector> ue(1, Vector::Ones(1));
  EXPECT_EQ(assemble_z(sys, Vector::Zero(2), ui, ue).flat().size(), 5);
  EXPECT_THROW(assemble_z(sys, Vector::Zero(2), ue, ue), DimensionError);
  EXPECT_THROW(assemble_z(sys, Vector::Zero(3), ui, ue), DimensionError);
}

TEST(PropagateTruth, Integrator) {
  const DelayedLtiSystem sys(Matrix::Identity(2, 2), Matrix::Identity(2, 2), 0, 4);
  const std::vector<Vector> ui{Vector::Ones(2)};
  const std::vector<Vector> ue(3, Vector::Ones(2));
  const auto z = assemble_z(sys, Vector::Zero(2), ui, ue);
  const auto y = propagate_truth(sys, z, Vector::Zero(8));
  for (int t = 1; t <= 4; ++t) EXPECT_EQ(y.state(t), Vector::Constant(2, t));
}

TEST(PropagateTruth, ScalarHandRecursion) {
  const DelayedLtiSystem sys(Matrix::Constant(1, 1, 2.0), Matrix::Ones(1, 1), 1, 2);
  const std::vector<Vector> ui(2, Vector::Ones(1));
  const auto z = assemble_z(sys, Vector::Ones(1), ui, {});
  Vector w(2);
  w << 0.5, -0.5;
  const auto y = propagate_truth(sys, z, w);
  EXPECT_DOUBLE_EQ(y.y[0], 3.5);
  EXPECT_DOUBLE_EQ(y.y[1], 7.5);

  const auto cf = build_compact(sys);
  const auto yc = compact_predict(cf, z, cf.B_bar * w);
  EXPECT_NEAR(yc.y[0], 3.5, 1e-14);
  EXPECT_NEAR(yc.y[1], 7.5, 1e-14);
}

TEST(CompactPredict, ZeroAndErrors) {
  const DelayedLtiSystem sys(Matrix::Identity(2, 2), Matrix::Ones(2, 1), 0, 3);
  const auto cf = build_compact(sys);
  EXPECT_TRUE(compact_predict(cf, Vector::Zero(5), Vector::Zero(6)).y.isZero());
  EXPECT_THROW(compact_predict(cf, Vector::Zero(4), Vector::Zero(6)), DimensionError);
  EXPECT_THROW(compact_predict(cf, Vector::Zero(5), Vector::Zero(5)), DimensionError);
}

TEST(CompactProperty, RecursionMatchesCompactForm) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim(1, 4);
  std::uniform_int_distribution<int> hor(1, 6);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = dim(rng);
    const int m = dim(rng);
    const int T = hor(rng);
    const int tau = std::uniform_int_distribution<int>(0, T - 1)(rng);
    const Matrix A = 0.6 * Matrix::NullaryExpr(n, n, [&] { return std::normal_distribution<double>()(rng); });
    const Matrix B = Matrix::NullaryExpr(n, m, [&] { return std::normal_distribution<double>()(rng); });
    const DelayedLtiSystem sys(A, B, tau, T);
    const auto cf = build_compact(sys);
    const DecisionVector z(cf.partition, random_vector(cf.partition.size(), rng));
    const Vector w = random_vector(n * T, rng);
    const auto y1 = propagate_truth(sys, z, w);
    const auto y2 = compact_predict(cf, z, cf.B_bar * w);
    EXPECT_LE((y1.y - y2.y).norm(), 1e-10 * std::max(1.0, y1.y.norm()));
  }
}

TEST(CompactProperty, DelayBookkeeping) {
  // u_e occupies inputs 1..T-1-tau; permuting u_init entries changes y.
  const Matrix A = (Matrix(2, 2) << 0.9, 0.2, 0.0, 1.1).finished();
  const Matrix B = (Matrix(2, 1) << 0.3, 1.0).finished();
  const DelayedLtiSystem sys(A, B, 2, 5);
  const auto cf = build_compact(sys);
  const auto& part = cf.partition;
  EXPECT_EQ(part.u_e_offset(), 2 + 3);
  for (Index k = 0; k < part.u_e_count(); ++k) {
    const Index input = part.u_init_count() + k;  // stored index of u_{k+1}
    EXPECT_EQ(cf.effective_block().col(k), cf.A_bar.col(part.state_dim + input));
  }
  Vector z = Vector::Zero(part.size());
  z.segment(part.u_init_offset(), 3) << 1.0, 2.0, 3.0;
  Vector zp = z;
  zp.segment(part.u_init_offset(), 3) << 3.0, 2.0, 1.0;
  EXPECT_GT((cf.A_bar * z - cf.A_bar * zp).norm(), 1e-6);
}
